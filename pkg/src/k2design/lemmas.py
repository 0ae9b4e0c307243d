"""Design-theoretic constraints on k as evidence-producing predicates.

For a block-transitive design with v = k^2 points and point stabilizer G_x:

* k+1 divides gcd(|G_x|, v-1), and every nontrivial subdegree;
* in the non-parabolic cases k+1 is prime to the characteristic p;
* |G| < |G_x|^3, and v < |G_x|_{p'}^2 when G_x is not parabolic.

Bounds are built by :func:`k2design.polyarith.gcd_bound` and carry the
steps that produced them as :class:`Evidence` records, each of which can be
re-checked on its own by :func:`replay_evidence`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm

from .formula import FactoredExpr
from .polyarith import (
    ClaimFailed,
    IntPoly,
    _const_gcd_bound,
    _lowest_power,
    crossover_bound,
    factorint,
    format_factorization,
    gcd_bound,
    is_perfect_square,
    p_part,
    poly_divmod,
    poly_eval,
    poly_rem_monic,
    split_cyclotomic,
    xgcd_min_constant,
)

CongruenceFailed = ClaimFailed


# ---------------------------------------------------------------------------
# evidence

@dataclass(frozen=True)
class Evidence:
    """One re-checkable step.  ``data`` holds only JSON values."""

    kind: str
    data: dict = field(default_factory=dict, hash=False)

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.data}


def _poly(cs) -> IntPoly:
    return IntPoly(int(c) for c in cs)


def _frac(text) -> Fraction:
    return Fraction(str(text))


def _replay_crossover(d: dict) -> bool:
    V, D, S = _poly(d["V"]), _poly(d["D"]), _poly(d["scale"])
    q = d["q_star"]
    if crossover_bound(V, D, S, d.get("floor", 2)) != q:
        return False
    W = V - S * D * D
    return poly_eval(W, q) > 0


def _replay_square(d: dict) -> bool:
    ok, root = is_perfect_square(int(d["v"]))
    return ok == d["square"] and (not ok or root == d["k"])


def _replay_divisibility(d: dict) -> bool:
    return (int(d["bound"]) % int(d["k_plus_1"]) == 0) == d["divides"]


def _replay_factorization(d: dict) -> bool:
    v = _frac(d["v"])
    ours = format_factorization(factorint(v.numerator))
    if v.denominator != 1:
        ours += "/" + format_factorization(factorint(v.denominator))
    match = d.get("stated_value") is None or _frac(d["stated_value"]) == v
    return ours == d["ours"] and match == d["match"]


def _replay_valuation(d: dict) -> bool:
    from .verifier import valuation_candidates

    return valuation_candidates(d["p"]) == [tuple(x) for x in d["candidates"]]


def _replay_diophantine(d: dict) -> bool:
    from .verifier import diophantine_solutions

    sols = diophantine_solutions(_frac(d["A"]), d["eps"], d["x_min"])
    return ([list(s) for s in sols[0]], sols[1]) == (d["solutions"], d["m_cap"])


def _replay_split(d: dict) -> bool:
    c, a, mults, R = split_cyclotomic(_poly(d["poly"]))
    return (c, a, {str(k): v for k, v in sorted(mults.items())}, list(R.coeffs)) == (
        d["const"], d["q_power"], d["cyclotomic"], d["residual"])


def _replay_xgcd(d: dict) -> bool:
    A, B = _poly(d["A"]), _poly(d["B"])
    P, Q = _poly(d["P"]), _poly(d["Q"])
    if P * A + Q * B != IntPoly.const(d["constant"]):
        return False
    return xgcd_min_constant(A, B).constant == d["constant"]


def _replay_qpart(d: dict) -> bool:
    N = _poly(d["N"])
    j = _lowest_power(N)
    t = N.content()
    qk = min(d["q_power"], j) if abs(N.coeffs[j]) == t else d["q_power"]
    return qk == d["result"] and d.get("content", 1) == (t if qk < d["q_power"] else 1)


def _replay_enumeration(d: dict) -> bool:
    from .verifier import replay_enumeration

    return replay_enumeration(d)


_REPLAY = {
    "congruence": lambda d: poly_rem_monic(_poly(d["N"]), _poly(d["modulus"])) == IntPoly.const(d["residue"]),
    "remainder": lambda d: poly_rem_monic(_poly(d["N"]), _poly(d["modulus"])) == IntPoly.const(d["residue"]),
    "xgcd": _replay_xgcd,
    "peel": lambda d: poly_divmod(_poly(d["N"]), _poly(d["divisor"]))[1].is_zero(),
    "qpart": _replay_qpart,
    "const": lambda d: _const_gcd_bound(d["C"], _poly(d["N"])) == d["result"],
    "split": _replay_split,
    "crossover": _replay_crossover,
    "square": _replay_square,
    "divisibility": _replay_divisibility,
    "factorization": _replay_factorization,
    "valuation": _replay_valuation,
    "diophantine": _replay_diophantine,
    "enumeration": _replay_enumeration,
}


def replay_evidence(ev: Evidence | dict) -> bool:
    """Re-run one step and compare with what it recorded.

    Steps that only restate a choice (``keep``, ``retain``, ``cap-*``,
    ``bound``, ``note``, ``strip``) have nothing to recompute and replay as
    true.
    """
    if isinstance(ev, Evidence):
        ev = ev.to_json()
    fn = _REPLAY.get(ev["kind"])
    return True if fn is None else bool(fn(ev))


# ---------------------------------------------------------------------------
# divisor bounds

@dataclass(frozen=True)
class DivisorBound:
    """``k+1`` (up to the outer factor f) divides ``bound(q)``."""

    bound: FactoredExpr
    derivation: tuple[Evidence, ...] = ()

    def evaluate(self, q: int) -> Fraction:
        return self.bound.evaluate(q)

    def divides(self, n: int, q: int) -> bool:
        """Whether n divides the bound at q, in the sense that bound(q)/n is an integer."""
        return (self.evaluate(q) / n).denominator == 1


def _parts(F: FactoredExpr) -> tuple[Fraction, int, list]:
    if F.gcd_terms:
        raise ValueError("expression has unresolved gcd terms")
    if F.q_power < 0 or any(m < 0 for _, m in F.factors):
        c, P = F.to_poly()
        F = FactoredExpr.from_poly(P, c)
    return Fraction(F.const), F.q_power, [(P, m) for P, m in F.factors if m]


def _as_poly(F: FactoredExpr) -> tuple[Fraction, IntPoly]:
    c, P = F.to_poly()
    return Fraction(c), P


def _fold(A: FactoredExpr, N_const: Fraction, N: IntPoly, keep=(), claims=(),
          xgcd=()) -> tuple[FactoredExpr, list[Evidence]]:
    """Bound gcd(A(q), N_const*N(q)) for integer-valued A and N_const*N.

    Congruence claims are about N itself and are rescaled with it.
    """
    ca, aa, fa = _parts(A)
    L = lcm(ca.denominator, N_const.denominator)
    NN = N * int(N_const * L)
    scale = int(N_const * L)
    scaled_claims = [(M, r * scale) for M, r in claims]
    res = gcd_bound(int(ca * L), aa, fa, NN, keep, scaled_claims, xgcd)
    steps = [Evidence(s["kind"], {k: x for k, x in s.items() if k != "kind"}) for s in res.steps]
    if L != 1:
        steps.insert(0, Evidence("note", {"text": f"both sides scaled by {L} to clear denominators"}))
    return FactoredExpr(Fraction(res.const, L), res.q_power, res.factors), steps


def minus_one(v: FactoredExpr) -> tuple[int, IntPoly]:
    """``(b, N)`` with ``b*(v-1) = N`` an integer polynomial and b the denominator of v's constant."""
    c, P = _as_poly(v)
    a, b = c.numerator, c.denominator
    return b, P * a - IntPoly.const(b)


def bound_from_gcd(Gx_order: FactoredExpr, v: FactoredExpr, congruences=(), keep=(),
                   xgcd=()) -> DivisorBound:
    """Bound gcd(|G_x ∩ X|, v-1).

    Congruences ``(M, r)`` are facts about the cleared form ``b*(v-1)``
    where ``b`` is the denominator of v; ``xgcd`` lists ``(M, c)`` Bezout
    constants of M against the same cleared form.  A failed fact raises
    :class:`CongruenceFailed`.
    """
    b, N = minus_one(v)
    bound, steps = _fold(Gx_order, Fraction(1, b), N, keep, congruences, xgcd)
    if b != 1:
        steps.insert(0, Evidence("note", {"text": f"v has denominator {b}; facts refer to {b}*(v-1)"}))
    steps.append(Evidence("bound", {"value": str(bound)}))
    return DivisorBound(bound, tuple(steps))


def bound_from_subdegrees(rows, start: DivisorBound | None = None) -> DivisorBound:
    """Bound the gcd of the given subdegree divisors (and of ``start`` when given)."""
    rows = list(rows)
    if not rows and start is None:
        raise ValueError("need at least one subdegree row")
    steps: list[Evidence] = list(start.derivation) if start else []
    if start is None:
        cur, rows = rows[0], rows[1:]
    else:
        cur = start.bound
    for R in rows:
        c, P = _as_poly(R)
        cur, st = _fold(cur, c, P)
        steps += st
    steps.append(Evidence("bound", {"value": str(cur)}))
    return DivisorBound(cur, tuple(steps))


def strip_p_part(bound: DivisorBound, p: int | None = None) -> DivisorBound:
    """Drop the q-power, and the p-part of the constant when p is known.

    Valid when k+1 is prime to p, so only the p'-part of a bound matters.
    """
    B = bound.bound
    c = Fraction(B.const)
    if p is not None:
        c = Fraction(c.numerator // p_part(c.numerator, p), c.denominator // p_part(c.denominator, p))
    new = FactoredExpr(c, 0, B.factors, B.gcd_terms)
    if new == B:
        return bound
    ev = Evidence("strip", {"p": p, "before": str(B), "after": str(new)})
    return DivisorBound(new, bound.derivation + (ev,))


# ---------------------------------------------------------------------------
# numeric predicates

def largeness_filter(Gx_order: int, G_order: int) -> bool:
    """True when |G| < |G_x|^3, the necessary largeness condition."""
    return G_order < Gx_order ** 3


def pprime_bound_check(v: int, Gx_pprime: int) -> bool:
    """True when v < (|G_x|_{p'})^2; false excludes a non-parabolic stabilizer."""
    return v < Gx_pprime ** 2


@dataclass(frozen=True)
class SquareOutcome:
    kind: str  # "NonSquare", "DivisibilityFail" or "Survives"
    k: int | None = None
    evidence: tuple[Evidence, ...] = ()


def square_route(v: int, k_plus_1_bound: int) -> SquareOutcome:
    """Test v = k^2 and k+1 | bound."""
    ok, k = is_perfect_square(v)
    sq = Evidence("square", {"v": v, "square": ok, "k": k})
    if not ok:
        return SquareOutcome("NonSquare", None, (sq,))
    div = k_plus_1_bound % (k + 1) == 0
    dv = Evidence("divisibility", {"k_plus_1": k + 1, "bound": k_plus_1_bound, "divides": div})
    return SquareOutcome("Survives" if div else "DivisibilityFail", k, (sq, dv))


def factorization_evidence(v: Fraction, stated: str | None = None, stated_value: Fraction | None = None) -> Evidence:
    v = Fraction(v)
    ours = format_factorization(factorint(v.numerator))
    if v.denominator != 1:
        ours += "/" + format_factorization(factorint(v.denominator))
    data = {"v": str(v), "ours": ours, "stated": stated,
            "stated_value": None if stated_value is None else str(stated_value),
            "match": stated_value is None or stated_value == v}
    return Evidence("factorization", data)


def gcd_of(*values: int) -> int:
    g = 0
    for x in values:
        g = gcd(g, x)
    return g
