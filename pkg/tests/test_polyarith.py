from __future__ import annotations

from math import gcd, isqrt

import pytest
from hypothesis import given, settings, strategies as st

from k2design.polyarith import (
    ClaimFailed,
    DegreeTooLow,
    IntPoly,
    NotCoprime,
    NotDivisible,
    NotMonic,
    _const_gcd_bound,
    crossover_bound,
    cyclotomic,
    cyclotomic_factors,
    factorint,
    format_factorization,
    gcd_bound,
    is_perfect_square,
    is_prime,
    p_adic_valuation,
    p_part,
    p_prime_part,
    poly_divexact,
    poly_divmod,
    poly_eval,
    poly_gcd_degree,
    poly_rem_monic,
    positive_root_bound,
    prime_power,
    prime_powers,
    split_cyclotomic,
    xgcd_min_constant,
)

q = IntPoly.var()


def P(*cs):
    return IntPoly(cs)


# ---------------------------------------------------------------------------
# IntPoly basics

def test_intpoly_normalises_trailing_zeros():
    assert P(1, 2, 0, 0) == P(1, 2)
    assert P(0, 0).is_zero()
    assert P().degree == -1


def test_intpoly_arithmetic():
    a = q ** 2 - 1
    b = q + 1
    assert a * b == q ** 3 + q ** 2 - q - 1
    assert a - a == IntPoly()
    assert 3 - q == P(3, -1)
    assert str(q ** 2 - 1) == "q^2 - 1"


def test_intpoly_is_immutable():
    with pytest.raises(AttributeError):
        q.coeffs = (1,)


def test_compose_power_and_shift():
    assert (q - 1).compose_power(3) == q ** 3 - 1
    assert (q ** 2).taylor_shift(1) == q ** 2 + 2 * q + 1
    assert (q ** 3 + q).derivative() == 3 * q ** 2 + 1


def test_poly_divmod_exact_and_remainder():
    quo, rem = poly_divmod(q ** 6 - 1, q ** 2 - 1)
    assert quo == q ** 4 + q ** 2 + 1 and rem.is_zero()
    # division over Z is not allowed to leave fractions behind
    with pytest.raises(NotDivisible):
        poly_divmod(q ** 3, 2 * q + 1)
    with pytest.raises(NotDivisible):
        poly_divexact(q ** 3 + 1, q ** 2 + 5)


def test_poly_rem_monic_requires_monic():
    with pytest.raises(NotMonic):
        poly_rem_monic(q ** 3, 2 * q + 1)


def test_remainder_of_3d4_g2_index_mod_q2_minus_1():
    # v - 1 for G2(q) inside 3D4(q)
    v = q ** 6 * (q ** 8 + q ** 4 + 1)
    assert poly_rem_monic(v - 1, q ** 2 - 1) == IntPoly.const(2)


def test_poly_eval_matches_direct_evaluation():
    f = q ** 5 - 3 * q ** 2 + 7
    for n in range(-5, 6):
        assert poly_eval(f, n) == n ** 5 - 3 * n ** 2 + 7


# ---------------------------------------------------------------------------
# Bezout constants

def test_xgcd_2b2_subfield_constant_is_20():
    # |2B2(q0)| against v(q0) - 1 for 2B2(q0) < 2B2(q0^3)
    A = q ** 2 * (q ** 2 + 1) * (q - 1)
    big = q ** 6 * (q ** 6 + 1) * (q ** 3 - 1)
    v, rem = poly_divmod(big, A)
    assert rem.is_zero()
    cert = xgcd_min_constant(A, v - 1)
    assert cert.constant == 20
    assert cert.verify()
    assert cert.p_coeffs * cert.a + cert.q_coeffs * cert.b == IntPoly.const(20)


def test_xgcd_small_known_constants():
    assert xgcd_min_constant(q - 1, q + 1).constant == 2
    assert xgcd_min_constant(q ** 2 + 1, q ** 2 - 1).constant == 2
    assert xgcd_min_constant(q ** 2 - q + 1, q + 2).constant == 7


def test_xgcd_rejects_common_factor():
    with pytest.raises(NotCoprime):
        xgcd_min_constant(q ** 2 - 1, q - 1)
    assert poly_gcd_degree(q ** 2 - 1, q ** 3 - 1) == 1


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(-6, 6), min_size=2, max_size=5),
       st.lists(st.integers(-6, 6), min_size=2, max_size=5))
def test_bezout_constant_is_a_multiple_of_every_value_gcd(a, b):
    A, B = IntPoly(a), IntPoly(b)
    if A.degree < 1 or B.degree < 1 or poly_gcd_degree(A, B) > 0:
        return
    cert = xgcd_min_constant(A, B)
    assert cert.verify()
    for n in range(-60, 60):
        g = gcd(poly_eval(A, n), poly_eval(B, n))
        assert g == 0 or cert.constant % g == 0


# ---------------------------------------------------------------------------
# integers

def test_prime_power_detection():
    assert prime_power(8) == (2, 3)
    assert prime_power(81) == (3, 4)
    assert prime_power(13) == (13, 1)
    assert prime_power(12) is None
    assert prime_power(1) is None
    assert [n for n, _, _ in prime_powers(2, 20)] == [2, 3, 4, 5, 7, 8, 9, 11, 13, 16, 17, 19]


def test_is_prime_small_range():
    primes = [n for n in range(100) if is_prime(n)]
    assert primes[:10] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29] and len(primes) == 25


def test_p_parts():
    assert p_part(96, 2) == 32 and p_prime_part(96, 2) == 3
    assert p_adic_valuation(3 ** 5 * 7, 3) == 5
    with pytest.raises(ValueError):
        p_adic_valuation(0, 2)


@given(st.integers(1, 10 ** 9), st.integers(1, 10 ** 9), st.sampled_from([2, 3, 5, 7, 13]))
def test_p_part_is_multiplicative(a, b, p):
    assert p_part(a * b, p) == p_part(a, p) * p_part(b, p)
    assert p_prime_part(a * b, p) == p_prime_part(a, p) * p_prime_part(b, p)
    assert p_part(a, p) * p_prime_part(a, p) == a


def test_perfect_square_agrees_with_isqrt_up_to_a_million():
    for n in range(10 ** 6 + 1):
        ok, root = is_perfect_square(n)
        r = isqrt(n)
        assert ok == (r * r == n)
        if ok:
            assert root == r


def test_perfect_square_large():
    k = 3 ** 80 + 11
    assert is_perfect_square(k * k) == (True, k)
    assert is_perfect_square(k * k + 1)[0] is False
    with pytest.raises(ValueError):
        is_perfect_square(-4)


def test_factorint_and_format():
    v = 2 ** 8 * 3 ** 3 * 13
    assert factorint(v) == {2: 8, 3: 3, 13: 1}
    assert format_factorization(factorint(v)) == "2^8*3^3*13"
    big = (2 ** 61 - 1) * (2 ** 31 - 1) * 3
    assert factorint(big) == {3: 1, 2 ** 31 - 1: 1, 2 ** 61 - 1: 1}


@given(st.integers(2, 10 ** 12))
def test_factorint_product_is_input(n):
    prod = 1
    for p, e in factorint(n).items():
        assert is_prime(p)
        prod *= p ** e
    assert prod == n


# ---------------------------------------------------------------------------
# cyclotomic pieces

def test_cyclotomic_polynomials():
    assert cyclotomic(1) == q - 1
    assert cyclotomic(4) == q ** 2 + 1
    assert cyclotomic(12) == q ** 4 - q ** 2 + 1
    prod = IntPoly.const(1)
    for F in cyclotomic_factors(12):
        prod = prod * F
    assert prod == q ** 12 - 1


def test_split_cyclotomic_with_residual():
    c, a, mults, R = split_cyclotomic(3 * q ** 2 * (q ** 6 - 1) * (q ** 2 + 5))
    assert (c, a) == (3, 2)
    assert mults == {1: 1, 2: 1, 3: 1, 6: 1}
    assert R == q ** 2 + 5


# ---------------------------------------------------------------------------
# crossover

def test_crossover_is_least_and_certified():
    V = q ** 5
    D = 10 * q
    qs = crossover_bound(V, D, 1)
    W = V - D * D
    assert poly_eval(W, qs) > 0 and poly_eval(W, qs - 1) <= 0
    assert all(poly_eval(W, n) > 0 for n in range(qs, qs + 500))


def test_crossover_needs_degree_gap():
    with pytest.raises(DegreeTooLow):
        crossover_bound(q ** 4, q ** 2, 1)


def test_positive_root_bound_exceeds_roots():
    W = (q - 7) * (q - 3) * (q + 2)
    assert positive_root_bound(W) > 7


# ---------------------------------------------------------------------------
# gcd bounds

def test_gcd_bound_e6_p1_subdegrees():
    n1 = q * (q ** 7 + q ** 6 + q ** 5 + q ** 4 + q ** 3 + q ** 2 + q + 1) * (q ** 3 + 1)
    c, a, mults, R = split_cyclotomic(n1)
    factors = [(cyclotomic(d), m) for d, m in mults.items()]
    n2 = q ** 8 * (q ** 4 + q ** 3 + q ** 2 + q + 1) * (q ** 4 + 1)
    res = gcd_bound(c, a, factors, n2)
    assert (res.const, res.q_power) == (1, 1)
    assert res.factors == ((q ** 4 + 1, 1),)


def test_gcd_bound_joint_step():
    # piece by piece gives 2*2, the product against N gives 2
    res = gcd_bound(1, 0, [(q - 1, 1), (q + 1, 1)], q ** 2 + 1)
    assert res.evaluate(3) == 2


def test_gcd_bound_congruence_claim_is_checked():
    with pytest.raises(ClaimFailed):
        gcd_bound(1, 0, [(q ** 2 - 1, 1)], q ** 4 + 1, claims=[(q ** 2 - 1, 5)])


def test_const_gcd_bound_matches_brute_force():
    N = q ** 4 + 1
    for C in (2, 17, 17 ** 3, 2 ** 5 * 41, 13 ** 6):
        expect = 1
        for n in range(min(C, 5000)):
            expect = expect * gcd(C, poly_eval(N, n)) // gcd(expect, gcd(C, poly_eval(N, n)))
        got = _const_gcd_bound(C, N)
        assert got % expect == 0
        # exact for these sizes: every prime-power level is reached by some residue
        if C <= 5000:
            assert got == expect


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from([1, 2, 3, 4, 6, 8, 12]), min_size=1, max_size=4),
       st.integers(0, 3), st.sampled_from([1, 2, 3, 6, 12]))
def test_gcd_bound_divides_sampled_gcds(idx, qpow, const):
    factors = [(cyclotomic(d), 1) for d in idx]
    A = IntPoly.const(const) * q ** qpow
    for F, m in factors:
        A = A * F ** m
    N = q ** 9 + q ** 4 - 3
    res = gcd_bound(const, qpow, factors, N)
    for n in range(2, 200):
        g = gcd(poly_eval(A, n), poly_eval(N, n))
        assert res.evaluate(n) % g == 0
