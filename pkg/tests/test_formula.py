from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from k2design.formula import (
    BinOp,
    FactoredExpr,
    FormulaError,
    FormulaSyntaxError,
    Gcd,
    Num,
    Pow,
    Residue,
    UnknownIdentifier,
    UnresolvedGcd,
    Var,
    eval_formula,
    eval_int,
    gcd_moduli,
    parse_formula,
    pretty,
    resolve,
    residue_modulus,
    substitute_power,
    uses_eps,
)
from k2design.polyarith import IntPoly

q = IntPoly.var()

E6_ORDER = "1/gcd(3,q-eps)*q^36*(q^12-1)*(q^9-eps)*(q^8-1)*(q^6-1)*(q^5-eps)*(q^2-1)"


def test_parse_precedence():
    n = parse_formula("1+2*q^3")
    assert n == BinOp("+", Num(1), BinOp("*", Num(2), Pow(Var("q"), 3)))


def test_parse_gcd_and_eps():
    n = parse_formula("gcd(3,q-eps)")
    assert isinstance(n, Gcd) and n.modulus == 3
    assert uses_eps(n)
    assert gcd_moduli(parse_formula(E6_ORDER)) == {3}


def test_parse_errors_report_position():
    with pytest.raises(FormulaSyntaxError) as ex:
        parse_formula("q^2+*3")
    assert ex.value.pos == 4
    with pytest.raises(UnknownIdentifier) as ex:
        parse_formula("q+x")
    assert ex.value.name == "x"
    with pytest.raises(FormulaSyntaxError):
        parse_formula("(q+1")


def test_pretty_round_trip_on_group_orders():
    for text in (E6_ORDER, "q^2*(q^2+1)*(q-1)", "(gcd(3,q)+1)/2", "q^8*(q^8+q^4+1)"):
        node = parse_formula(text)
        assert parse_formula(pretty(node)) == node


def test_eval_group_orders():
    # |E6^-(2)| and |G2(3)|
    assert eval_int(parse_formula(E6_ORDER), 2, -1) == 76532479683774853939200
    assert eval_int(parse_formula("q^6*(q^6-1)*(q^2-1)"), 3) == 4245696


def test_eval_int_rejects_fractions():
    with pytest.raises(FormulaError):
        eval_int(parse_formula("q/2"), 3)
    assert eval_formula(parse_formula("q/2"), 3) == Fraction(3, 2)


def test_substitute_power():
    n = substitute_power(parse_formula("q^2*(q-1)"), 3)
    assert eval_formula(n, 2) == eval_formula(parse_formula("q^2*(q-1)"), 8)


def test_resolve_factored_and_gcd_by_residue():
    node = parse_formula(E6_ORDER)
    with pytest.raises(UnresolvedGcd):
        resolve(node, 1)
    fe = resolve(node, 1, Residue(6, 1))
    assert fe.const == Fraction(1, 3) and fe.q_power == 36
    fe2 = resolve(node, 1, Residue(6, 2))
    assert fe2.const == 1
    # symbolic gcd kept when not strict
    loose = resolve(node, 1, None, strict=False)
    assert loose.gcd_terms


def test_residue_modulus():
    assert residue_modulus(parse_formula(E6_ORDER), parse_formula("gcd(4,q^5-1)")) == 12
    assert Residue(6, 13).residue == 1


def test_factored_expr_algebra():
    a = FactoredExpr.from_poly(q ** 3 - q)
    assert (a.const, a.q_power) == (1, 1)
    b = a * a.inverse()
    assert b.evaluate(5) == 1
    assert (a ** 2).evaluate(3) == 24 ** 2
    assert resolve(parse_formula("(q^4-1)/(q^2+1)")).to_poly() == (1, q ** 2 - 1)
    assert resolve(parse_formula("(q^4-1)/2")).to_poly() == (Fraction(1, 2), q ** 4 - 1)


@given(st.integers(2, 200), st.sampled_from([1, -1]))
def test_resolved_form_agrees_with_evaluation(qv, eps):
    node = parse_formula(E6_ORDER)
    fe = resolve(node, eps, Residue(3, qv % 3))
    assert fe.evaluate(qv) == eval_formula(node, qv, eps)
