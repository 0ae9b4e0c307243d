"""Case data: group families, stabilizer cases, subdegree rows, numeric rows.

The catalog text format is line oriented.  Each non-blank line is one
record: a record type followed by ``key=value`` fields, split with shell
quoting rules so that values containing spaces can be double-quoted.  ``#``
starts a comment.  Formulas use the grammar of :mod:`k2design.formula`;
lists inside a single value are separated by ``|``.

::

    group name=G2 label=G2(q) order=q^6*(q^6-1)*(q^2-1) out=(gcd(3,q)+1)/2 ...
    numeric id=G2(4).A1(13) family=G2 q=4 stab=A1(13) order=1092 v=230400
"""

from __future__ import annotations

import hashlib
import re
import shlex
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from math import lcm
from pathlib import Path
from typing import Iterable

from . import formula as fm
from .polyarith import NotDivisible, prime_power, prime_powers

ROUTES = (
    "NUMERIC",
    "SUBFIELD",
    "GCD_CONGRUENCE",
    "SUBDEGREE_TABLE2",
    "SUBDEGREE_EXPLICIT",
    "PPRIME_BOUND",
    "DIOPHANTINE_G2",
    "PARABOLIC_VALUATION",
    "PARABOLIC_E6",
    "PARABOLIC_PPOWER",
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, source: str = "<catalog>"):
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source}:{line}:{column}: {message}")


class ValidationError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class UnknownCase(KeyError):
    pass


# ---------------------------------------------------------------------------
# conditions

_ATOM = re.compile(r"^(eps|p|q|e)(?:%(\d+))?(=|!=|>=|<=|>|<)(.+)$")


@dataclass(frozen=True)
class Atom:
    var: str
    op: str
    values: tuple
    modulus: int | None = None

    def holds(self, q: int, p: int, e: int, eps: int) -> bool:
        x = {"q": q, "p": p, "e": e, "eps": eps}[self.var]
        if self.modulus is not None:
            x %= self.modulus
        if self.op == "=":
            return x in self.values
        if self.op == "!=":
            return x not in self.values
        y = self.values[0]
        return {">": x > y, ">=": x >= y, "<": x < y, "<=": x <= y}[self.op]

    def __str__(self):
        if self.var == "eps":
            vals = "|".join("+" if v == 1 else "-" for v in self.values)
        else:
            vals = "|".join(str(v) for v in self.values)
        mod = f"%{self.modulus}" if self.modulus is not None else ""
        return f"{self.var}{mod}{self.op}{vals}"


@dataclass(frozen=True)
class Not:
    atoms: tuple[Atom, ...]

    def holds(self, q, p, e, eps) -> bool:
        return not all(a.holds(q, p, e, eps) for a in self.atoms)

    def __str__(self):
        return "!(" + "&".join(str(a) for a in self.atoms) + ")"


@dataclass(frozen=True)
class Condition:
    """A conjunction of atoms such as ``p=2``, ``q>3``, ``e%2=1``, ``eps=-``
    and negated conjunctions ``!(eps=+&q=2)``."""

    terms: tuple = ()

    @staticmethod
    def parse(text: str) -> Condition:
        text = text.strip()
        if not text:
            return Condition()
        terms = []
        for chunk in _split_top(text, "&"):
            chunk = chunk.strip()
            if chunk.startswith("!(") and chunk.endswith(")"):
                inner = tuple(_parse_atom(a) for a in _split_top(chunk[2:-1], "&"))
                terms.append(Not(inner))
            else:
                terms.append(_parse_atom(chunk))
        return Condition(tuple(terms))

    def holds(self, q: int, eps: int = 1, p: int | None = None, e: int | None = None) -> bool:
        if p is None or e is None:
            pe = prime_power(q)
            if pe is None:
                return False
            p, e = pe
        return all(t.holds(q, p, e, eps) for t in self.terms)

    def fixed_p(self) -> int | None:
        for t in self.terms:
            if isinstance(t, Atom) and t.var == "p" and t.op == "=" and len(t.values) == 1:
                return t.values[0]
        return None

    def parity(self) -> int | None:
        """0 if the condition forces q even, 1 if it forces q odd, else None."""
        for t in self.terms:
            if isinstance(t, Atom) and t.var == "p" and t.modulus is None:
                if t.op == "=" and t.values == (2,):
                    return 0
                if t.op == "=" and 2 not in t.values:
                    return 1
                if t.op == "!=" and t.values == (2,):
                    return 1
        return None

    def eps_values(self) -> tuple[int, ...]:
        allowed = {1, -1}
        for t in self.terms:
            if isinstance(t, Atom) and t.var == "eps":
                allowed &= set(t.values) if t.op == "=" else {1, -1} - set(t.values)
        return tuple(sorted(allowed, reverse=True))

    def lower_q(self) -> int:
        """A q0 such that the numeric atoms hold for every q >= q0."""
        q0 = 2
        for t in self.terms:
            atoms = t.atoms if isinstance(t, Not) else (t,)
            for a in atoms:
                if a.var == "q" and a.modulus is None:
                    q0 = max(q0, max(a.values) + 1)
        return q0

    def __str__(self):
        return "&".join(str(t) for t in self.terms)

    def __bool__(self):
        return bool(self.terms)


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _parse_atom(text: str) -> Atom:
    m = _ATOM.match(text.strip())
    if not m:
        raise ValueError(f"bad condition atom {text!r}")
    var, mod, op, vals = m.groups()
    if var == "eps":
        if op not in ("=", "!=") or mod:
            raise ValueError(f"eps only supports = and != in {text!r}")
        values = tuple({"+": 1, "-": -1}[v] for v in vals.split("|"))
    else:
        values = tuple(int(v) for v in vals.split("|"))
    if op not in ("=", "!=") and len(values) != 1:
        raise ValueError(f"comparison needs a single value in {text!r}")
    return Atom(var, op, values, int(mod) if mod else None)


# ---------------------------------------------------------------------------
# records

def _split_list(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split("|") if s.strip())


@dataclass(frozen=True)
class GroupFamily:
    name: str
    label: str
    order: fm.Node
    d: fm.Node
    out: fm.Node
    out_epow: int
    fcap_sq: fm.Node
    eps: str  # "none" or "both"
    adm: Condition

    def eps_values(self) -> tuple[int, ...]:
        return (1, -1) if self.eps == "both" else (1,)

    def admissible(self, q: int, eps: int = 1) -> bool:
        return eps in self.eps_values() and self.adm.holds(q, eps)

    def out_value(self, q: int, eps: int = 1) -> int:
        """The integer that every f divides at this q."""
        p, e = prime_power(q)
        return fm.eval_int(self.out, q, eps) * e ** self.out_epow


@dataclass(frozen=True)
class SubgroupCase:
    id: str
    family: str
    stab: str
    order: fm.Node | None
    cond: Condition
    route: str
    data: dict = field(default_factory=dict, hash=False, compare=True)

    def formula(self, key: str) -> fm.Node | None:
        text = self.data.get(key)
        return fm.parse_formula(text) if text else None

    def formulas(self, key: str) -> tuple[fm.Node, ...]:
        return tuple(fm.parse_formula(t) for t in _split_list(self.data.get(key, "")))

    def items(self, key: str) -> tuple[str, ...]:
        return _split_list(self.data.get(key, ""))

    def int_field(self, key: str, default: int = 0) -> int:
        return int(self.data.get(key, default))

    def signs(self, group: GroupFamily) -> tuple[int, ...]:
        """Signs of eps this case ranges over."""
        base = (1, -1) if self.data.get("sign") == "free" else group.eps_values()
        return tuple(e for e in base if e in self.cond.eps_values())

    @property
    def is_parabolic(self) -> bool:
        return self.route.startswith("PARABOLIC")

    @property
    def is_outer(self) -> bool:
        return "outer" in self.data


@dataclass(frozen=True)
class SubdegreeRow:
    id: str
    family: str
    h0: str
    k: str
    div: fm.Node
    cond: Condition
    eps: str  # "tied": the row's sign is the group's; "free": both signs give a row
    fmul: bool = True  # the divisor carries the outer factor f
    src: str = ""


@dataclass(frozen=True)
class NumericCase:
    id: str
    family: str
    q: int
    eps: int
    stab: str
    order: int
    v: int


@dataclass(frozen=True)
class Catalog:
    groups: tuple[GroupFamily, ...] = ()
    subdegrees: tuple[SubdegreeRow, ...] = ()
    numerics: tuple[NumericCase, ...] = ()
    cases: tuple[SubgroupCase, ...] = ()

    def group(self, name: str) -> GroupFamily:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(f"unknown group family {name!r}")

    def case(self, case_id: str) -> SubgroupCase:
        for c in self.cases:
            if c.id == case_id:
                return c
        raise UnknownCase(case_id)

    def numeric(self, numeric_id: str) -> NumericCase:
        for n in self.numerics:
            if n.id == numeric_id:
                return n
        raise UnknownCase(numeric_id)

    def subdegree(self, row_id: str) -> SubdegreeRow:
        for r in self.subdegrees:
            if r.id == row_id:
                return r
        raise UnknownCase(row_id)

    def lookup(self, family: str, stab: str) -> SubgroupCase:
        for c in self.cases:
            if c.family == family and c.stab == stab:
                return c
        raise UnknownCase(f"{family}/{stab}")

    def lookup_numeric(self, family: str, q: int, stab: str) -> NumericCase:
        for n in self.numerics:
            if n.family == family and n.q == q and n.stab == stab:
                return n
        raise UnknownCase(f"{family}({q})/{stab}")

    def lookup_subdegree(self, family: str, h0: str, k: str) -> SubdegreeRow:
        for r in self.subdegrees:
            if r.family == family and r.h0 == h0 and r.k == k:
                return r
        raise UnknownCase(f"{family}/{h0}/{k}")

    def ids(self) -> list[str]:
        return [n.id for n in self.numerics] + [c.id for c in self.cases]

    def merged(self, other: Catalog) -> Catalog:
        """``other`` layered over ``self``: records with an existing key replace it."""

        def merge(mine, theirs, key):
            out = list(mine)
            index = {key(r): i for i, r in enumerate(out)}
            for r in theirs:
                if key(r) in index:
                    out[index[key(r)]] = r
                else:
                    index[key(r)] = len(out)
                    out.append(r)
            return tuple(out)

        return Catalog(
            merge(self.groups, other.groups, lambda g: g.name),
            merge(self.subdegrees, other.subdegrees, lambda r: r.id),
            merge(self.numerics, other.numerics, lambda n: n.id),
            merge(self.cases, other.cases, lambda c: c.id),
        )

    def checksum(self) -> str:
        return hashlib.sha256(dump(self).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# text format

_GROUP_KEYS = ("name", "label", "order", "d", "out", "out_epow", "fcap_sq", "eps", "adm")
_SUBDEGREE_KEYS = ("id", "family", "h0", "k", "div", "cond", "eps", "fmul", "src")
_NUMERIC_KEYS = ("id", "family", "q", "eps", "stab", "order", "v")
_CASE_KEYS = ("id", "family", "stab", "order", "cond", "route")
_REQUIRED = {
    "group": ("name", "order", "out", "fcap_sq"),
    "subdegree": ("id", "family", "h0", "k", "div"),
    "numeric": ("id", "family", "q", "stab", "order", "v"),
    "case": ("id", "family", "stab", "route"),
}


def _sign(text: str) -> int:
    if text in ("+", "+1", "1"):
        return 1
    if text in ("-", "-1"):
        return -1
    raise ValueError(f"bad sign {text!r}")


def _sign_text(eps: int) -> str:
    return "+" if eps == 1 else "-"


def _formula(text: str, line: int, col: int, source: str) -> fm.Node:
    try:
        return fm.parse_formula(text)
    except fm.FormulaSyntaxError as exc:
        raise ParseError(f"formula error: {exc}", line, col + exc.pos, source) from None
    except fm.UnknownIdentifier as exc:
        raise ParseError(f"formula error: {exc}", line, col + exc.pos, source) from None


def loads(text: str, source: str = "<catalog>") -> Catalog:
    groups, subdegrees, numerics, cases = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        try:
            words = shlex.split(raw, comments=True, posix=True)
        except ValueError as exc:
            raise ParseError(str(exc), lineno, 1, source) from None
        if not words:
            continue
        kind = words[0]
        if kind not in _REQUIRED:
            raise ParseError(f"unknown record type {kind!r}", lineno, raw.find(kind) + 1, source)
        fields: dict[str, str] = {}
        cols: dict[str, int] = {}
        for w in words[1:]:
            if "=" not in w:
                raise ParseError(f"expected key=value, found {w!r}", lineno, max(raw.find(w), 0) + 1, source)
            key, val = w.split("=", 1)
            if key in fields:
                raise ParseError(f"duplicate field {key!r}", lineno, max(raw.find(w), 0) + 1, source)
            fields[key] = val
            pos = raw.find(key + "=")
            cols[key] = (pos if pos >= 0 else 0) + len(key) + 2
        for key in _REQUIRED[kind]:
            if key not in fields:
                raise ParseError(f"{kind} record lacks field {key!r}", lineno, 1, source)

        def F(key, default=None):
            if key not in fields:
                return default
            return _formula(fields[key], lineno, cols[key], source)

        def C(key):
            try:
                return Condition.parse(fields.get(key, ""))
            except ValueError as exc:
                raise ParseError(str(exc), lineno, cols.get(key, 1), source) from None

        try:
            if kind == "group":
                unknown = set(fields) - set(_GROUP_KEYS)
                if unknown:
                    raise ParseError(f"unknown group field(s) {sorted(unknown)}", lineno, 1, source)
                groups.append(GroupFamily(
                    name=fields["name"],
                    label=fields.get("label", fields["name"]),
                    order=F("order"),
                    d=F("d", fm.Num(1)),
                    out=F("out"),
                    out_epow=int(fields.get("out_epow", "1")),
                    fcap_sq=F("fcap_sq"),
                    eps=fields.get("eps", "none"),
                    adm=C("adm"),
                ))
            elif kind == "subdegree":
                unknown = set(fields) - set(_SUBDEGREE_KEYS)
                if unknown:
                    raise ParseError(f"unknown subdegree field(s) {sorted(unknown)}", lineno, 1, source)
                subdegrees.append(SubdegreeRow(
                    id=fields["id"],
                    family=fields["family"],
                    h0=fields["h0"],
                    k=fields["k"],
                    div=F("div"),
                    cond=C("cond"),
                    eps=fields.get("eps", "tied"),
                    fmul=fields.get("fmul", "1") == "1",
                    src=fields.get("src", ""),
                ))
            elif kind == "numeric":
                unknown = set(fields) - set(_NUMERIC_KEYS)
                if unknown:
                    raise ParseError(f"unknown numeric field(s) {sorted(unknown)}", lineno, 1, source)
                numerics.append(NumericCase(
                    id=fields["id"],
                    family=fields["family"],
                    q=int(fields["q"]),
                    eps=_sign(fields.get("eps", "+")),
                    stab=fields["stab"],
                    order=int(fields["order"]),
                    v=int(fields["v"]),
                ))
            else:
                route = fields["route"]
                if route not in ROUTES:
                    raise ParseError(f"unknown route {route!r}", lineno, cols["route"], source)
                data = {k: v for k, v in fields.items() if k not in _CASE_KEYS}
                # parse every formula-valued payload now so errors carry a position
                for key, val in data.items():
                    if key in _FORMULA_LIST_KEYS:
                        for part in _split_list(val):
                            _formula(part.split(":")[0], lineno, cols[key], source)
                cases.append(SubgroupCase(
                    id=fields["id"],
                    family=fields["family"],
                    stab=fields["stab"],
                    order=F("order"),
                    cond=C("cond"),
                    route=route,
                    data=data,
                ))
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(str(exc), lineno, 1, source) from None
    return Catalog(tuple(groups), tuple(subdegrees), tuple(numerics), tuple(cases))


# payload keys whose values are |-separated formulas (``cong`` entries are formula:residue)
_FORMULA_LIST_KEYS = ("cong", "keep", "n", "n_odd", "n_even", "claim", "v", "outer", "ocap", "fcap_sq", "vp", "xgcd")


def _quote(value: str) -> str:
    if value and not re.search(r"[\s\"'#\\]", value):
        return value
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _line(kind: str, pairs: Iterable[tuple[str, str]]) -> str:
    return " ".join([kind] + [f"{k}={_quote(v)}" for k, v in pairs])


def dump(cat: Catalog) -> str:
    """Canonical text for ``cat``; ``loads(dump(c)) == c``."""
    out = []
    for g in cat.groups:
        out.append(_line("group", [
            ("name", g.name), ("label", g.label), ("order", fm.pretty(g.order)),
            ("d", fm.pretty(g.d)), ("out", fm.pretty(g.out)), ("out_epow", str(g.out_epow)),
            ("fcap_sq", fm.pretty(g.fcap_sq)), ("eps", g.eps), ("adm", str(g.adm)),
        ]))
    for r in cat.subdegrees:
        pairs = [
            ("id", r.id), ("family", r.family), ("h0", r.h0), ("k", r.k), ("div", fm.pretty(r.div)),
            ("cond", str(r.cond)), ("eps", r.eps), ("fmul", "1" if r.fmul else "0"),
        ]
        if r.src:
            pairs.append(("src", r.src))
        out.append(_line("subdegree", pairs))
    for n in cat.numerics:
        out.append(_line("numeric", [
            ("id", n.id), ("family", n.family), ("q", str(n.q)), ("eps", _sign_text(n.eps)),
            ("stab", n.stab), ("order", str(n.order)), ("v", str(n.v)),
        ]))
    for c in cat.cases:
        pairs = [("id", c.id), ("family", c.family), ("stab", c.stab)]
        if c.order is not None:
            pairs.append(("order", fm.pretty(c.order)))
        pairs += [("cond", str(c.cond)), ("route", c.route)]
        pairs += [(k, c.data[k]) for k in sorted(c.data)]
        out.append(_line("case", pairs))
    return "\n".join(out) + ("\n" if out else "")


def load_catalog_file(path, base: Catalog | None = None, validate: bool = True) -> Catalog:
    """Parse ``path`` and merge it over ``base`` (the built-ins by default)."""
    path = Path(path)
    extra = loads(path.read_text(encoding="utf-8"), source=str(path))
    if base is None:
        base = load_builtin_catalog()
    merged = base.merged(extra)
    if validate:
        problems = validate_catalog(merged, only=_record_keys(extra))
        if problems:
            raise ValidationError(problems)
    return merged


def _record_keys(cat: Catalog) -> set[str]:
    keys = {f"group:{g.name}" for g in cat.groups}
    keys |= {f"subdegree:{r.id}" for r in cat.subdegrees}
    keys |= {f"numeric:{n.id}" for n in cat.numerics}
    keys |= {f"case:{c.id}" for c in cat.cases}
    return keys


_BUILTIN: Catalog | None = None


def load_builtin_catalog() -> Catalog:
    global _BUILTIN
    if _BUILTIN is None:
        text = resources.files("k2design").joinpath("data/builtin.cat").read_text(encoding="utf-8")
        _BUILTIN = loads(text, source="builtin.cat")
    return _BUILTIN


# ---------------------------------------------------------------------------
# validation

def admissible_qs(group: GroupFamily, cond: Condition, eps: int, limit: int, start: int = 2):
    for q, p, e in prime_powers(start, limit):
        if group.adm.holds(q, eps, p, e) and cond.holds(q, eps, p, e):
            yield q


def branch_modulus(*nodes) -> int:
    """Residue modulus used to split gcd terms; always a multiple of 2."""
    return lcm(2, fm.residue_modulus(*[n for n in nodes if n is not None]))


def cap_exceptions(group: GroupFamily, eps: int, cap_sq: fm.Node | None = None,
                   out: fm.Node | None = None, epow: int | None = None) -> tuple[list[int], str]:
    """Admissible q at which ``out(q)^2 > cap_sq(q)``, found exactly.

    ``cap_sq`` must resolve to ``c*q^j``.  Beyond the returned range the cap
    follows from ``out_max^2 * e^(2*epow) <= c * 2^(j*e)`` and monotonicity in
    ``e``; the explanation string records the argument.
    """
    cap_sq = cap_sq if cap_sq is not None else group.fcap_sq
    out = out if out is not None else group.out
    epow = group.out_epow if epow is None else epow
    cap = fm.resolve(cap_sq, eps)
    if cap.factors or cap.q_power < 1 or cap.const <= 0:
        raise ValueError(f"cap {fm.pretty(cap_sq)} must be c*q^j with j >= 1")
    c, j = cap.const, cap.q_power
    modulus = branch_modulus(out)
    out_max = max(fm.eval_formula(out, r, eps) for r in range(modulus, 2 * modulus))
    out_max = max(out_max, 1)
    k2 = 2 * epow
    # smallest e0 with the bound holding at e0 and the ratio increasing from e0 on
    e0 = 1
    while not (out_max ** 2 * e0 ** k2 <= c * 2 ** (j * e0) and 2 ** j * e0 ** k2 >= (e0 + 1) ** k2):
        e0 += 1
    bad = []
    for e in range(1, e0):
        p = 2
        while c * p ** (j * e) < out_max ** 2 * e ** k2:
            if prime_power(p) == (p, 1):
                q = p ** e
                if group.admissible(q, eps):
                    val = fm.eval_int(out, q, eps) * e ** epow
                    if val ** 2 > fm.eval_formula(cap_sq, q, eps):
                        bad.append(q)
            p += 1
    why = (f"out <= {out_max}*e^{epow} and {c}*q^{j} >= {c}*2^({j}e); "
           f"the cap holds for every e >= {e0} and is checked exactly below")
    return sorted(bad), why


def _sample_admissible(group, cond, eps, count=25, limit=4000):
    out = []
    for q in admissible_qs(group, cond, eps, limit):
        out.append(q)
        if len(out) >= count:
            break
    return out


def case_formulas(cat: Catalog, case: SubgroupCase) -> list:
    """Every formula whose gcd terms the case's branches must resolve."""
    g = cat.group(case.family)
    nodes = [g.order, g.out, g.fcap_sq, case.order]
    for key in _FORMULA_LIST_KEYS:
        if key in ("cong", "xgcd"):
            nodes += [fm.parse_formula(s.split(":")[0]) for s in case.items(key)]
        elif key in case.data:
            nodes += list(case.formulas(key))
    for rid in case.items("rows"):
        try:
            nodes.append(cat.subdegree(rid).div)
        except UnknownCase:
            pass
    return [n for n in nodes if n is not None]


def validate_catalog(cat: Catalog, only: set[str] | None = None) -> list[str]:
    """Consistency problems in ``cat``; an empty list means the data is sound.

    ``only`` restricts the checks to the given ``kind:id`` keys.
    """
    problems: list[str] = []

    def wanted(key):
        return only is None or key in only

    names = [g.name for g in cat.groups]
    for kind, ids in (("group", names), ("subdegree", [r.id for r in cat.subdegrees]),
                      ("numeric", [n.id for n in cat.numerics]), ("case", [c.id for c in cat.cases])):
        seen = set()
        for i in ids:
            if i in seen:
                problems.append(f"{kind} {i}: duplicate id")
            seen.add(i)

    for g in cat.groups:
        if not wanted(f"group:{g.name}"):
            continue
        if g.eps not in ("none", "both"):
            problems.append(f"group {g.name}: eps must be none or both")
        for eps in g.eps_values():
            for q in _sample_admissible(g, Condition(), eps, 12):
                try:
                    val = fm.eval_formula(g.order, q, eps)
                except ZeroDivisionError:
                    val = Fraction(0)
                if val.denominator != 1 or val <= 0:
                    problems.append(f"group {g.name}: order not a positive integer at q={q}")
            try:
                cap_exceptions(g, eps)
            except ValueError as exc:
                problems.append(f"group {g.name}: {exc}")

    for n in cat.numerics:
        if not wanted(f"numeric:{n.id}"):
            continue
        try:
            g = cat.group(n.family)
        except KeyError:
            problems.append(f"numeric {n.id}: unknown family {n.family}")
            continue
        if not g.admissible(n.q, n.eps):
            problems.append(f"numeric {n.id}: q={n.q} is not admissible for {g.name}")
            continue
        X = fm.eval_formula(g.order, n.q, n.eps)
        if n.order * n.v != X:
            problems.append(f"numeric {n.id}: order*v = {n.order * n.v} but |X| = {X}")

    for r in cat.subdegrees:
        if not wanted(f"subdegree:{r.id}"):
            continue
        try:
            g = cat.group(r.family)
        except KeyError:
            problems.append(f"subdegree {r.id}: unknown family {r.family}")
            continue
        signs = (1, -1) if (r.eps == "free" or g.eps == "both") else (1,)
        for eps in signs:
            for q in _sample_admissible(g, r.cond, eps, 12):
                try:
                    val = fm.eval_formula(r.div, q, eps)
                except ZeroDivisionError:
                    val = Fraction(0)
                if val.denominator != 1 or val <= 0:
                    problems.append(f"subdegree {r.id}: divisor not a positive integer at q={q}, eps={eps}")

    for c in cat.cases:
        # a changed subdegree row is checked through every case that uses it
        if not (wanted(f"case:{c.id}") or any(wanted(f"subdegree:{r}") for r in c.items("rows"))):
            continue
        problems += _validate_case(cat, c)
    return problems


def _validate_case(cat: Catalog, c: SubgroupCase) -> list[str]:
    problems = []
    tag = f"case {c.id}"
    try:
        g = cat.group(c.family)
    except KeyError:
        return [f"{tag}: unknown family {c.family}"]
    eps_list = list(c.signs(g))
    if not eps_list:
        return [f"{tag}: condition {c.cond} contradicts the family's sign"]
    if c.route == "NUMERIC":
        refs = c.items("refs")
        if not refs:
            problems.append(f"{tag}: NUMERIC route needs refs")
        for ref in refs:
            try:
                n = cat.numeric(ref)
            except UnknownCase:
                problems.append(f"{tag}: unknown numeric ref {ref}")
                continue
            if n.family != c.family or not c.cond.holds(n.q, n.eps):
                problems.append(f"{tag}: numeric ref {ref} does not match the case")
        return problems
    if c.route == "SUBFIELD":
        r = c.int_field("r")
        if r not in (2, 3):
            return [f"{tag}: subfield degree must be 2 or 3"]
        sub_eps = c.data.get("sub_eps", "same")
        for eps in eps_list:
            se = eps if sub_eps == "same" else _sign(sub_eps)
            big = fm.substitute_power(g.order, r)
            M = branch_modulus(big, g.order)
            for res in range(M):
                try:
                    X = fm.resolve(big, eps, fm.Residue(M, res))
                    H = fm.resolve(g.order, se, fm.Residue(M, res))
                    (X * H.inverse()).to_poly()
                except NotDivisible:
                    problems.append(f"{tag}: subfield order does not divide at eps={eps}, q0={res} mod {M}")
                    break
        return problems
    if c.order is None:
        return [f"{tag}: route {c.route} needs an order formula"]
    if not any(True for _ in admissible_qs(g, c.cond, eps_list[0], 10_000)) and not (
        len(eps_list) > 1 and any(True for _ in admissible_qs(g, c.cond, eps_list[1], 10_000))
    ):
        problems.append(f"{tag}: condition {c.cond} admits no q below 10^4 (contradiction)")
        return problems
    nodes = case_formulas(cat, c)
    M = branch_modulus(*nodes)
    row_ids = {r.id for r in cat.subdegrees}
    stated_v = c.formula("v")
    for eps in eps_list:
        for res in range(M):
            try:
                X = fm.resolve(g.order, eps, fm.Residue(M, res))
                H = fm.resolve(c.order, eps, fm.Residue(M, res))
                (X * H.inverse()).to_poly()
            except NotDivisible:
                problems.append(f"{tag}: order does not divide |X| at eps={eps}, q={res} mod {M}")
                break
            except fm.UnresolvedGcd as exc:
                problems.append(f"{tag}: {exc}")
                break
        for q in _sample_admissible(g, c.cond, eps, 25):
            try:
                val = fm.eval_formula(c.order, q, eps)
                if val.denominator != 1 or val <= 0:
                    problems.append(f"{tag}: order not a positive integer at q={q}, eps={eps}")
                    break
                v = fm.eval_formula(g.order, q, eps) / val
                if v.denominator != 1 and c.data.get("index") != "rational":
                    problems.append(f"{tag}: |X|/order is not an integer at q={q}, eps={eps}")
                    break
                for rid in c.items("rows"):
                    row = cat.subdegree(rid) if rid in row_ids else None
                    if row is None or not row.cond.holds(q, eps):
                        continue
                    d = fm.eval_formula(row.div, q, eps)
                    if d.denominator != 1 or (val * g.out_value(q, eps)) % d:
                        problems.append(f"{tag}: subdegree {rid} does not divide |H|*out at q={q}, eps={eps}")
                        break
                if stated_v is not None and not c.is_outer:
                    if fm.eval_formula(stated_v, q, eps) != v:
                        problems.append(f"{tag}: stated v disagrees with |X|/order at q={q}, eps={eps}")
                        break
            except ZeroDivisionError:
                problems.append(f"{tag}: division by zero at q={q}, eps={eps}")
                break
    for rid in c.items("rows"):
        try:
            row = cat.subdegree(rid)
        except UnknownCase:
            problems.append(f"{tag}: unknown subdegree row {rid}")
            continue
        if row.family != c.family:
            problems.append(f"{tag}: subdegree row {rid} belongs to {row.family}")
    for item in c.items("cong") + c.items("xgcd"):
        if ":" not in item:
            problems.append(f"{tag}: congruence {item!r} needs modulus:residue")
    if c.is_outer:
        try:
            for eps in eps_list:
                cap_exceptions(g, eps, fm.Pow(c.formula("ocap"), 2), c.formula("outer"), c.int_field("outer_epow", 1))
        except ValueError as exc:
            problems.append(f"{tag}: {exc}")
    return problems


def with_numeric_value(cat: Catalog, numeric_id: str, v: int) -> Catalog:
    """A copy of ``cat`` with one numeric row's v replaced (used for mutation tests)."""
    nums = tuple(replace(n, v=v) if n.id == numeric_id else n for n in cat.numerics)
    return replace(cat, numerics=nums)
