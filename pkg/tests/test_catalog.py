from __future__ import annotations

import random
from dataclasses import fields, replace

import pytest

from k2design import formula as fm
from k2design.polyarith import prime_power
from k2design.catalog import (
    Catalog,
    Condition,
    ParseError,
    UnknownCase,
    ValidationError,
    cap_exceptions,
    dump,
    load_builtin_catalog,
    load_catalog_file,
    loads,
    validate_catalog,
    with_numeric_value,
)

# orders of the groups behind the single-q rows, taken from standard tables
ATLAS = {
    ("2B2", 8): 29120,
    ("2B2", 32): 32537600,
    ("3D4", 2): 211341312,
    ("G2", 3): 4245696,
    ("G2", 4): 251596800,
    ("G2", 5): 5859000000,
    ("F4", 2): 3311126603366400,
    ("E6", 2): 76532479683774853939200,  # the twisted group 2E6(2)
}


@pytest.fixture(scope="module")
def cat():
    return load_builtin_catalog()


def test_builtin_catalog_is_consistent(cat):
    assert validate_catalog(cat) == []
    assert len(cat.numerics) == 23
    assert {g.name for g in cat.groups} == {"2B2", "2G2", "3D4", "2F4", "G2", "F4", "E6", "E7", "E8"}


def test_dump_round_trips(cat):
    text = dump(cat)
    again = loads(text)
    assert again == cat
    assert dump(again) == text
    assert again.checksum() == cat.checksum()


def test_numeric_rows_against_independent_orders(cat):
    for n in cat.numerics:
        key = (n.family, n.q)
        if key in ATLAS:
            assert n.order * n.v == ATLAS[key], n.id


def test_conditions():
    c = Condition.parse("p=2&q>2")
    assert c.holds(8) and not c.holds(2) and not c.holds(9)
    assert c.parity() == 0 and c.fixed_p() == 2 and c.lower_q() == 3
    n = Condition.parse("!(q=2&eps=-)")
    assert n.holds(2, 1) and not n.holds(2, -1) and n.holds(4, -1)
    assert Condition.parse("e%2=0").holds(9) and not Condition.parse("e%2=0").holds(27)
    assert Condition.parse("eps=-").eps_values() == (-1,)
    assert str(Condition.parse("p!=2&q>3")) == "p!=2&q>3"


def test_lookup_and_unknown_case(cat):
    assert cat.lookup("G2", "G2(2)").id == "G2.G2(2)"
    assert cat.lookup_numeric("G2", 4, "J2").v == 416
    with pytest.raises(UnknownCase):
        cat.case("nope")


def test_parse_errors_have_positions():
    with pytest.raises(ParseError) as ex:
        loads("group name=X order=q^2+ out=1 fcap_sq=q\n", source="t.cat")
    assert ex.value.line == 1 and ex.value.column > 1
    assert str(ex.value).startswith("t.cat:1:")
    with pytest.raises(ParseError):
        loads("widget id=1\n")
    with pytest.raises(ParseError):
        loads("numeric id=a family=G2 q=3 stab=x order=1\n")
    with pytest.raises(ParseError):
        loads("case id=a family=G2 stab=x route=MAGIC\n")


def test_extra_catalog_file_merges_and_validates(tmp_path, cat):
    good = tmp_path / "good.cat"
    good.write_text("numeric id=G2(4).J2 family=G2 q=4 stab=J2 order=604800 v=416\n"
                    "numeric id=G2(3).G2(2)x family=G2 q=3 stab=x order=4245696 v=1\n")
    merged = load_catalog_file(good)
    assert len(merged.numerics) == len(cat.numerics) + 1
    bad = tmp_path / "bad.cat"
    bad.write_text("numeric id=G2(4).J2 family=G2 q=4 stab=J2 order=604800 v=417\n")
    with pytest.raises(ValidationError):
        load_catalog_file(bad)


def test_cap_exceptions_are_exact(cat):
    g = cat.group("G2")
    bad, _ = cap_exceptions(g, 1)
    for q in range(2, 3000):
        pe = prime_power(q)
        if pe is None:
            continue
        f = g.out_value(q)
        assert (f * f > fm.eval_formula(g.fcap_sq, q)) == (q in bad)


def test_with_numeric_value_breaks_the_index(cat):
    mutated = with_numeric_value(cat, "G2(4).J2", 400)
    assert any("G2(4).J2" in p for p in validate_catalog(mutated))


# ---------------------------------------------------------------------------
# mutation sensitivity

_NODES = (fm.Num, fm.Var, fm.Gcd, fm.BinOp, fm.Pow)


def _literal_paths(node, path=()):
    if isinstance(node, fm.Num):
        yield path
        return
    for f in fields(node):
        child = getattr(node, f.name)
        if isinstance(child, _NODES):
            yield from _literal_paths(child, path + (f.name,))


def _bump(node, path):
    if not path:
        return fm.Num(node.value + 1)
    return replace(node, **{path[0]: _bump(getattr(node, path[0]), path[1:])})


def _checked_formulas(cat: Catalog):
    """Formulas the catalog can cross-check against a second source."""
    for g in cat.groups:
        yield ("group", g.name, "order", g.order)
    for c in cat.cases:
        if c.order is not None:
            yield ("case", c.id, "order", c.order)
        if "v" in c.data:
            yield ("case", c.id, "v", c.formula("v"))


def _swap(cat: Catalog, kind, rid, key, node) -> Catalog:
    if kind == "group":
        return replace(cat, groups=tuple(replace(g, order=node) if g.name == rid else g for g in cat.groups))

    def upd(c):
        if c.id != rid:
            return c
        if key == "order":
            return replace(c, order=node)
        return replace(c, data={**c.data, key: fm.pretty(node)})

    return replace(cat, cases=tuple(upd(c) for c in cat.cases))


def test_every_coefficient_mutation_is_caught(cat):
    pool = list(_checked_formulas(cat))
    chosen = random.Random(20).sample(pool, 20)
    tried = 0
    for kind, rid, key, node in chosen:
        only = None if kind == "group" else {f"case:{rid}"}
        for path in _literal_paths(node):
            tried += 1
            mutated = _swap(cat, kind, rid, key, _bump(node, path))
            assert validate_catalog(mutated, only=only), (rid, key, fm.pretty(_bump(node, path)))
    assert tried >= 20
