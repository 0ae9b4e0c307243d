"""Exact integer and integer-polynomial arithmetic.

Polynomials are dense coefficient tuples, lowest degree first, so that
``IntPoly((1, 0, 1))`` is ``q^2 + 1``.  Trailing zeros are stripped; the
zero polynomial has an empty tuple and degree -1.  Every value in this
module is an exact integer or rational; nothing touches floats.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, isqrt, lcm
from typing import Iterable, Sequence

import sympy
from gmpy2 import mpq


class NotDivisible(ArithmeticError):
    pass


class NotMonic(ValueError):
    pass


class NotCoprime(ArithmeticError):
    pass


class ClaimFailed(ValueError):
    """A stated congruence or Bezout constant does not hold."""

    def __init__(self, message: str, modulus: IntPoly | None = None):
        self.modulus = modulus
        super().__init__(message)


class DegreeTooLow(ValueError):
    pass


def _strip(coeffs: Sequence[int]) -> tuple[int, ...]:
    n = len(coeffs)
    while n and not coeffs[n - 1]:
        n -= 1
    return tuple(coeffs[:n])


class IntPoly:
    """Dense polynomial in ``q`` with arbitrary-precision integer coefficients."""

    __slots__ = ("coeffs", "_hash")

    def __init__(self, coeffs: Iterable[int] = ()):
        cs = [int(c) for c in coeffs]
        object.__setattr__(self, "coeffs", _strip(cs))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("IntPoly is immutable")

    @classmethod
    def const(cls, c: int) -> IntPoly:
        return cls((c,))

    @classmethod
    def monomial(cls, n: int, c: int = 1) -> IntPoly:
        return cls((0,) * n + (c,))

    @classmethod
    def var(cls) -> IntPoly:
        return cls((0, 1))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def lead(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_const(self) -> bool:
        return len(self.coeffs) <= 1

    def const_value(self) -> int:
        if len(self.coeffs) > 1:
            raise ValueError(f"{self} is not constant")
        return self.coeffs[0] if self.coeffs else 0

    def content(self) -> int:
        g = 0
        for c in self.coeffs:
            g = gcd(g, c)
        return g

    def __eq__(self, other):
        if isinstance(other, int):
            other = IntPoly.const(other)
        if not isinstance(other, IntPoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash(("IntPoly", self.coeffs))
            object.__setattr__(self, "_hash", h)
        return h

    def __bool__(self):
        return bool(self.coeffs)

    def __repr__(self):
        return f"IntPoly({list(self.coeffs)!r})"

    def __str__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for i in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[i]
            if not c:
                continue
            sign = "-" if c < 0 else "+"
            a = abs(c)
            if i == 0:
                body = str(a)
            else:
                mono = "q" if i == 1 else f"q^{i}"
                body = mono if a == 1 else f"{a}*{mono}"
            parts.append((sign, body))
        first_sign, first_body = parts[0]
        out = ("-" if first_sign == "-" else "") + first_body
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    def _coerce(self, other) -> IntPoly:
        if isinstance(other, IntPoly):
            return other
        if isinstance(other, int):
            return IntPoly.const(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        res = list(a)
        for i, c in enumerate(b):
            res[i] += c
        return IntPoly(res)

    __radd__ = __add__

    def __neg__(self):
        return IntPoly(-c for c in self.coeffs)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, int):
            return IntPoly(c * other for c in self.coeffs)
        if not isinstance(other, IntPoly):
            return NotImplemented
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return IntPoly()
        res = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    res[i + j] += x * y
        return IntPoly(res)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative exponent")
        result = IntPoly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __call__(self, n):
        return poly_eval(self, n)

    def __divmod__(self, other: IntPoly):
        return poly_divmod(self, other)

    def compose_power(self, r: int) -> IntPoly:
        """Substitute ``q -> q^r``."""
        if r < 1:
            raise ValueError("r must be positive")
        res = [0] * (r * self.degree + 1) if self.coeffs else []
        for i, c in enumerate(self.coeffs):
            res[r * i] = c
        return IntPoly(res)

    def taylor_shift(self, m: int) -> IntPoly:
        """Coefficients of ``P(q + m)``."""
        a = list(self.coeffs)
        n = len(a)
        for i in range(n - 1):
            for j in range(n - 2, i - 1, -1):
                a[j] += m * a[j + 1]
        return IntPoly(a)

    def derivative(self) -> IntPoly:
        return IntPoly(i * c for i, c in enumerate(self.coeffs) if i)


Q = IntPoly.var()
ONE = IntPoly.const(1)
ZERO = IntPoly()


def poly_eval(P: IntPoly, n):
    """Horner evaluation; exact for ``int`` and ``Fraction`` arguments."""
    acc = 0
    for c in reversed(P.coeffs):
        acc = acc * n + c
    return acc


def poly_divmod(A: IntPoly, B: IntPoly) -> tuple[IntPoly, IntPoly]:
    """Division with remainder in Z[q]; every step must divide by lead(B)."""
    if B.is_zero():
        raise ZeroDivisionError("polynomial division by zero")
    a = list(A.coeffs)
    b = B.coeffs
    db = len(b) - 1
    lb = b[-1]
    if len(a) - 1 < db:
        return ZERO, A
    quo = [0] * (len(a) - db)
    for i in range(len(a) - 1, db - 1, -1):
        c = a[i]
        if not c:
            continue
        t, r = divmod(c, lb)
        if r:
            raise NotDivisible(f"leading coefficient {lb} does not divide {c}")
        quo[i - db] = t
        off = i - db
        for j in range(db + 1):
            a[off + j] -= t * b[j]
    return IntPoly(quo), IntPoly(a[:db])


def poly_divexact(A: IntPoly, B: IntPoly) -> IntPoly:
    """Return ``A / B`` when the division is exact in Z[q]."""
    try:
        quo, rem = poly_divmod(A, B)
    except NotDivisible:
        raise NotDivisible(f"({A}) is not divisible by ({B})") from None
    if rem:
        raise NotDivisible(f"({A}) is not divisible by ({B}); remainder {rem}")
    return quo


def poly_rem_monic(A: IntPoly, M: IntPoly) -> IntPoly:
    if M.lead != 1 or M.degree < 1:
        raise NotMonic(f"modulus {M} must be monic of degree >= 1")
    return poly_divmod(A, M)[1]


# ---------------------------------------------------------------------------
# rational polynomial helpers for the extended Euclidean algorithm
#
# These work on plain lists of gmpy2.mpq values.  Fraction gives the same
# answers but is roughly ten times slower on the degree-250 remainders that
# the largest subfield checks produce.

def _rstrip(a: list) -> list:
    while a and not a[-1]:
        a.pop()
    return a


def _rdivmod(a: list, b: list) -> tuple[list, list]:
    a = list(a)
    db = len(b) - 1
    inv = 1 / mpq(b[-1])
    if len(a) - 1 < db:
        return [], a
    quo = [mpq(0)] * (len(a) - db)
    for i in range(len(a) - 1, db - 1, -1):
        c = a[i]
        if not c:
            continue
        t = c * inv
        quo[i - db] = t
        off = i - db
        for j in range(db + 1):
            a[off + j] -= t * b[j]
    return _rstrip(quo), _rstrip(a[:db])


def _rmul(a: list, b: list) -> list:
    if not a or not b:
        return []
    res = [mpq(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                res[i + j] += x * y
    return _rstrip(res)


def _rsub(a: list, b: list) -> list:
    n = max(len(a), len(b))
    res = [mpq(0)] * n
    for i, x in enumerate(a):
        res[i] += x
    for i, y in enumerate(b):
        res[i] -= y
    return _rstrip(res)


@dataclass(frozen=True)
class BezoutCertificate:
    """``p_coeffs * a + q_coeffs * b == constant`` as a polynomial identity."""

    a: IntPoly
    b: IntPoly
    p_coeffs: IntPoly
    q_coeffs: IntPoly
    constant: int

    def verify(self) -> bool:
        lhs = self.p_coeffs * self.a + self.q_coeffs * self.b
        return lhs == IntPoly.const(self.constant)


@functools.lru_cache(maxsize=4096)
def _rational_inverse(a: tuple, b: tuple) -> tuple[tuple, tuple] | None:
    """Cofactors ``(s, t)`` with ``s*a + t*b = 1`` over Q, degree reduced.

    Only ``t`` is carried through the Euclidean loop; ``s`` is recovered as
    the exact quotient ``(1 - t*b) / a``.  Returns None when gcd(a, b) is
    nonconstant.
    """
    r0 = [mpq(c) for c in a]
    r1 = [mpq(c) for c in b]
    t0, t1 = [], [mpq(1)]
    while r1:
        quo, rem = _rdivmod(r0, r1)
        r0, r1 = r1, rem
        t0, t1 = t1, _rsub(t0, _rmul(quo, t1))
    if len(r0) != 1:
        return None
    g = r0[0]
    t = [c / g for c in t0]
    num = _rsub([mpq(1)], _rmul(t, [mpq(c) for c in b]))
    s, rem = _rdivmod(num, [mpq(c) for c in a])
    if rem:
        raise ArithmeticError("inconsistent Bezout cofactors")
    to_frac = lambda xs: tuple(Fraction(int(x.numerator), int(x.denominator)) for x in xs)
    return to_frac(s), to_frac(t)


def xgcd_min_constant(A: IntPoly, B: IntPoly) -> BezoutCertificate:
    """Smallest positive ``c`` reachable as ``P*A + Q*B`` with degree-reduced cofactors.

    The rational cofactors of ``P*A + Q*B = 1`` with ``deg P < deg B`` and
    ``deg Q < deg A`` are unique; clearing their denominators gives ``c``.
    For every integer ``n``, ``gcd(A(n), B(n))`` divides ``c``.
    """
    if A.is_zero() or B.is_zero():
        raise NotCoprime("zero polynomial has no Bezout constant")
    res = _rational_inverse(A.coeffs, B.coeffs)
    if res is None:
        raise NotCoprime(f"({A}) and ({B}) share a nonconstant factor")
    s, t = res
    c = 1
    for x in s + t:
        c = lcm(c, x.denominator)
    P = IntPoly(int(x * c) for x in s)
    Qc = IntPoly(int(x * c) for x in t)
    return BezoutCertificate(A, B, P, Qc, c)


def poly_gcd_degree(A: IntPoly, B: IntPoly) -> int:
    """Degree of gcd(A, B) over Q (0 means coprime)."""
    r0 = [mpq(c) for c in A.coeffs]
    r1 = [mpq(c) for c in B.coeffs]
    while r1:
        r0, r1 = r1, _rdivmod(r0, r1)[1]
    return len(r0) - 1


# ---------------------------------------------------------------------------
# integer helpers

def p_adic_valuation(n: int, p: int) -> int:
    if n == 0:
        raise ValueError("valuation of 0 is undefined")
    if p < 2:
        raise ValueError("p must be prime")
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def p_part(n: int, p: int) -> int:
    return p ** p_adic_valuation(n, p)


def p_prime_part(n: int, p: int) -> int:
    return abs(n) // p_part(n, p)


def is_perfect_square(n: int) -> tuple[bool, int | None]:
    if n < 0:
        raise ValueError("negative input")
    r = isqrt(n)
    if r * r == n:
        return True, r
    return False, None


def is_prime(n: int) -> bool:
    return bool(sympy.isprime(n))


def prime_power(n: int) -> tuple[int, int] | None:
    """``(p, e)`` with ``n == p**e`` and ``e >= 1``, else None (trial division)."""
    if n < 2:
        return None
    p = 2
    while p * p <= n:
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            return (p, e) if n == 1 else None
        p += 1
    return n, 1


def prime_powers(lo: int, hi: int):
    """Prime powers ``q`` with ``lo <= q < hi``, ascending."""
    for n in range(max(lo, 2), hi):
        pe = prime_power(n)
        if pe is not None:
            yield n, pe[0], pe[1]


def factorint(n: int) -> dict[int, int]:
    """Prime factorisation of ``|n|`` as an ascending ``{p: e}`` dict."""
    if n == 0:
        raise ValueError("cannot factor 0")
    return {int(p): int(e) for p, e in sorted(sympy.factorint(abs(n)).items())}


def format_factorization(fac: dict[int, int]) -> str:
    return "*".join(f"{p}^{e}" if e > 1 else str(p) for p, e in fac.items()) or "1"


# ---------------------------------------------------------------------------
# cyclotomic building blocks

@functools.lru_cache(maxsize=None)
def cyclotomic(n: int) -> IntPoly:
    """The n-th cyclotomic polynomial."""
    if n < 1:
        raise ValueError("n must be positive")
    num = IntPoly.monomial(n) - 1
    for d in range(1, n):
        if n % d == 0:
            num = poly_divexact(num, cyclotomic(d))
    return num


def cyclotomic_factors(n: int) -> list[IntPoly]:
    """Irreducible factors of ``q^n - 1``, ordered by index."""
    if n < 1:
        raise ValueError("n must be positive")
    return [cyclotomic(d) for d in range(1, n + 1) if n % d == 0]


def split_cyclotomic(P: IntPoly, max_index: int = 512) -> tuple[int, int, dict[int, int], IntPoly]:
    """Write ``P = c * q^a * prod Phi_d^m_d * R``.

    Returns ``(c, a, {d: m_d}, R)`` where ``c`` is the content sign-normalised
    so that ``R`` has positive leading coefficient and contains no cyclotomic
    factor of index <= max_index.
    """
    if P.is_zero():
        raise ValueError("cannot split the zero polynomial")
    a = 0
    cs = P.coeffs
    while cs[a] == 0:
        a += 1
    R = IntPoly(cs[a:])
    c = R.content()
    if R.lead < 0:
        c = -c
    R = IntPoly(x // c for x in R.coeffs)
    mults: dict[int, int] = {}
    d = 1
    while R.degree >= 1 and d <= max_index:
        phi = cyclotomic(d)
        if phi.degree <= R.degree:
            while R.degree >= phi.degree:
                try:
                    R = poly_divexact(R, phi)
                except NotDivisible:
                    break
                mults[d] = mults.get(d, 0) + 1
        d += 1
    return c, a, mults, R


# ---------------------------------------------------------------------------
# inequality crossover

def positive_root_bound(W: IntPoly) -> int:
    """An integer strictly above every positive real root of W (lead > 0).

    Kioustelidis: positive roots are at most ``2 * max (|a_{n-k}|/a_n)^(1/k)``
    over negative coefficients.  Integer roots are rounded up.
    """
    n = W.degree
    an = W.lead
    if an <= 0:
        raise ValueError("leading coefficient must be positive")
    best = 0
    for k in range(1, n + 1):
        a = W.coeffs[n - k]
        if a < 0:
            ratio = -(-(-a) // an)  # ceil(|a|/an)
            r = _iroot_ceil(ratio, k)
            best = max(best, r)
    return 2 * best + 1


def _iroot_ceil(x: int, k: int) -> int:
    if x <= 1:
        return x
    lo, hi = 1, 1 << (x.bit_length() // k + 1)
    while lo < hi:
        mid = (lo + hi) // 2
        if mid ** k >= x:
            hi = mid
        else:
            lo = mid + 1
    return lo


def crossover_bound(V: IntPoly, D: IntPoly, scale: IntPoly | int = 1, floor: int = 2) -> int:
    """Least integer ``q* >= floor`` with ``V(q) > scale(q)*D(q)^2`` for every integer q >= q*.

    A root bound on ``W = V - scale*D^2`` certifies positivity beyond some
    integer; the value is then lowered one step at a time while W stays
    positive.
    """
    if isinstance(scale, int):
        scale = IntPoly.const(scale)
    rhs = scale * D * D
    if V.degree <= rhs.degree:
        raise DegreeTooLow(f"deg V = {V.degree} <= deg scale*D^2 = {rhs.degree}")
    W = V - rhs
    top = max(positive_root_bound(W), floor)
    q = top
    while q > floor and poly_eval(W, q - 1) > 0:
        q -= 1
    return q


# ---------------------------------------------------------------------------
# gcd bounds for factored values

def poly_gcd(A: IntPoly, B: IntPoly) -> IntPoly:
    """Primitive gcd of A and B over Q, with positive leading coefficient."""
    r0 = [mpq(c) for c in A.coeffs]
    r1 = [mpq(c) for c in B.coeffs]
    while r1:
        r0, r1 = r1, _rdivmod(r0, r1)[1]
    if not r0:
        return ZERO
    den = 1
    for c in r0:
        den = lcm(den, int(c.denominator))
    G = IntPoly(int(c * den) for c in r0)
    cont = G.content()
    if G.lead < 0:
        cont = -cont
    return IntPoly(x // cont for x in G.coeffs)


def _lowest_power(N: IntPoly) -> int:
    j = 0
    while N.coeffs[j] == 0:
        j += 1
    return j


def _const_gcd_bound(C: int, N: IntPoly, limit: int = 2000) -> int:
    """An integer divisible by gcd(C, N(q)) for every integer q.

    Works one prime l of C at a time: the residues q mod l^j with
    l^j | N(q) are lifted from those mod l^(j-1), and the highest j reached
    (at most v_l(C)) is the exact maximum of v_l(gcd(C, N(q))).
    """
    C = abs(C)
    if C <= 1:
        return C
    out = 1
    for ell, a in factorint(C).items():
        roots, mod, j = [0], 1, 0
        while j < a:
            nxt = [r + t * mod for r in roots for t in range(ell)]
            mod *= ell
            roots = [r for r in nxt if poly_eval(N, r) % mod == 0]
            if not roots:
                break
            j += 1
            if len(roots) > limit:
                j = a
                break
        out *= ell ** j
    return out


_JOINT_DEGREE = 80


@dataclass(frozen=True)
class GcdBound:
    """``const * q^q_power * prod F^m``, a multiple of gcd(A(q), N(q)) for every q."""

    const: int
    q_power: int
    factors: tuple[tuple[IntPoly, int], ...]
    steps: tuple[dict, ...]

    def evaluate(self, q: int) -> int:
        val = self.const * q ** self.q_power
        for F, m in self.factors:
            val *= poly_eval(F, q) ** m
        return val


def gcd_bound(const: int, q_power: int, factors: Sequence[tuple[IntPoly, int]], N: IntPoly,
              keep: Sequence[IntPoly] = (), claims: Sequence[tuple[IntPoly, int]] = (),
              xgcd_claims: Sequence[tuple[IntPoly, int]] = ()) -> GcdBound:
    """Bound ``gcd(A(q), N(q))`` where ``A = const * q^q_power * prod F^m``.

    Each factor is first split into cyclotomic pieces.  Then, in order:

    * ``keep`` pieces stay in the bound unchanged;
    * a congruence ``N = r (mod M)`` with ``r != 0`` caps the part of ``A``
      made of the pieces of ``M`` (to minimum multiplicity) by ``|r|``;
      a Bezout claim ``(M, c)`` does the same with ``c``;
    * pieces that divide ``N`` exactly are peeled off, using
      ``gcd(F*a, F*b) = F*gcd(a, b)``;
    * every remaining piece ``F^m`` contributes ``|N mod F|^m`` when that
      remainder is constant and the minimal Bezout constant to the m-th
      power otherwise, by ``gcd(ab, n) | gcd(a, n) gcd(b, n)``;
    * ``q^k`` contributes ``q^min(k, j)`` when ``N = q^j N'`` with
      ``N'(0) = +-1``, and ``q^k`` otherwise; the constant contributes the
      lcm over residues of ``gcd(const, N(r))``.

    Raises ClaimFailed when a stated congruence or Bezout constant is wrong.
    """
    steps: list[dict] = []
    pieces: dict[IntPoly, int] = {}
    C = const

    def add(F, m):
        pieces[F] = pieces.get(F, 0) + m

    for F, m in factors:
        if m <= 0:
            raise ValueError("factors must have positive multiplicity")
        c, a, mults, R = split_cyclotomic(F)
        C *= c ** m
        q_power += a * m
        for d, k in mults.items():
            add(cyclotomic(d), k * m)
        if R.degree >= 1:
            add(R, m)
        if len(mults) + (R.degree >= 1) > 1 or c != 1:
            steps.append({"kind": "split", "poly": list(F.coeffs), "const": c, "q_power": a,
                          "cyclotomic": {str(d): k for d, k in sorted(mults.items())},
                          "residual": list(R.coeffs)})

    out: list[tuple[IntPoly, int]] = []
    kept: set[IntPoly] = set()
    for K in keep:
        _, _, mults, R = split_cyclotomic(K)
        for P in [cyclotomic(d) for d in mults] + ([R] if R.degree >= 1 else []):
            if P in pieces and P not in kept:
                kept.add(P)
                out.append((P, pieces.pop(P)))
                steps.append({"kind": "keep", "factor": list(P.coeffs), "mult": out[-1][1]})

    def apply_cap(M: IntPoly, value: int, kind: str):
        nonlocal C
        _, a, mults, R = split_cyclotomic(M)
        if a or R.degree >= 1:
            return
        group = [cyclotomic(d) for d in mults]
        if not group or any(pieces.get(P, 0) < 1 for P in group):
            return
        m = min(pieces[P] for P in group)
        for P in group:
            pieces[P] -= m
            if not pieces[P]:
                del pieces[P]
        C *= abs(value) ** m
        steps.append({"kind": kind, "modulus": list(M.coeffs), "value": abs(value), "mult": m})

    for M, r in claims:
        if M.degree < 1 or M.lead != 1:
            raise ValueError(f"congruence modulus {M} must be monic of positive degree")
        R = poly_rem_monic(N, M)
        if R != IntPoly.const(r):
            raise ClaimFailed(f"congruence fails: N mod ({M}) is {R}, not {r}", M)
        steps.append({"kind": "congruence", "N": list(N.coeffs), "modulus": list(M.coeffs), "residue": r})
        if M == Q:
            continue
        if r != 0:
            apply_cap(M, r, "cap-congruence")
    for M, c in xgcd_claims:
        cert = xgcd_min_constant(M, N)
        if cert.constant != c:
            raise ClaimFailed(f"Bezout constant of ({M}, N) is {cert.constant}, not {c}", M)
        steps.append({"kind": "xgcd", "A": list(M.coeffs), "B": list(N.coeffs), "constant": c,
                      "P": list(cert.p_coeffs.coeffs), "Q": list(cert.q_coeffs.coeffs)})
        apply_cap(M, c, "cap-xgcd")

    # peel pieces that divide N exactly
    peeled = ONE
    Nr = N
    changed = True
    while changed:
        changed = False
        for P in sorted(pieces, key=lambda P: (P.degree, P.coeffs)):
            quo, rem = poly_divmod(Nr, P)
            if rem.is_zero():
                Nr = quo
                peeled = peeled * P
                out.append((P, 1))
                pieces[P] -= 1
                if not pieces[P]:
                    del pieces[P]
                changed = True
                break
    if peeled != ONE:
        steps.append({"kind": "peel", "N": list(N.coeffs), "divisor": list(peeled.coeffs)})

    # the q-power; a content t of N costs at most a factor t
    q_content = 1
    if q_power > 0:
        j = _lowest_power(Nr)
        t = Nr.content()
        qk = min(q_power, j) if abs(Nr.coeffs[j]) == t else q_power
        if qk < q_power and t > 1:
            q_content = t
        steps.append({"kind": "qpart", "N": list(Nr.coeffs), "q_power": q_power, "result": qk,
                      "content": q_content})
        q_power = qk

    # the constant
    if abs(C) > 1:
        g = _const_gcd_bound(C, Nr)
        steps.append({"kind": "const", "C": abs(C), "N": list(Nr.coeffs), "result": g})
        C = g
    else:
        C = abs(C)

    # remaining pieces
    rem_const = 1
    rem_poly = ONE
    for P in sorted(pieces, key=lambda P: (P.degree, P.coeffs)):
        m = pieces[P]
        R = poly_rem_monic(Nr, P) if P.lead == 1 else None
        if R is not None and R.is_const():
            r = abs(R.const_value())
            steps.append({"kind": "remainder", "N": list(Nr.coeffs), "modulus": list(P.coeffs),
                          "residue": R.const_value(), "mult": m})
            rem_const *= r ** m
            rem_poly = rem_poly * P ** m
            continue
        try:
            cert = xgcd_min_constant(P, Nr)
        except NotCoprime:
            out.append((P, m))
            steps.append({"kind": "retain", "factor": list(P.coeffs), "mult": m})
            continue
        steps.append({"kind": "xgcd", "A": list(P.coeffs), "B": list(Nr.coeffs), "constant": cert.constant,
                      "P": list(cert.p_coeffs.coeffs), "Q": list(cert.q_coeffs.coeffs), "mult": m})
        rem_const *= cert.constant ** m
        rem_poly = rem_poly * P ** m
    # the pieces taken together can do better than piece by piece
    if rem_const > 1 and rem_poly.degree > 1 and rem_poly.degree + Nr.degree <= _JOINT_DEGREE:
        cert = xgcd_min_constant(rem_poly, Nr)
        joint = gcd(rem_const, cert.constant)
        if joint < rem_const:
            steps.append({"kind": "xgcd", "A": list(rem_poly.coeffs), "B": list(Nr.coeffs),
                          "constant": cert.constant, "P": list(cert.p_coeffs.coeffs),
                          "Q": list(cert.q_coeffs.coeffs), "joint": joint})
            rem_const = joint
    C *= rem_const * q_content

    merged: dict[IntPoly, int] = {}
    for P, m in out:
        merged[P] = merged.get(P, 0) + m
    factors_out = tuple(sorted(merged.items(), key=lambda t: (t[0].degree, t[0].coeffs)))
    return GcdBound(C, q_power, factors_out, tuple(steps))


def _integer_parts(F) -> tuple[Fraction, int, list[tuple[IntPoly, int]]]:
    """``(c, a, factors)`` with F = c * q^a * prod factors and every multiplicity positive."""
    if F.gcd_terms:
        raise ValueError("expression has unresolved gcd terms")
    if F.q_power < 0 or any(m < 0 for _, m in F.factors):
        c, P = F.to_poly()
        F = type(F).from_poly(P, c)
    return Fraction(F.const), F.q_power, [(P, m) for P, m in F.factors if m]


def scaled_gcd_bound(FA, FB, keep=(), claims=(), xgcd_claims=()):
    """Run :func:`gcd_bound` on ``L*FA`` against ``L*FB`` for the least L clearing both constants.

    Returns ``(L, bound)``; ``gcd(FA(q), FB(q))`` divides ``bound(q) / L``
    whenever FA(q) and FB(q) are integers.
    """
    ca, aa, fa = _integer_parts(FA)
    cb, ab, fb = _integer_parts(FB)
    L = lcm(ca.denominator, cb.denominator)
    N = IntPoly.monomial(ab, int(cb * L))
    for P, m in fb:
        N = N * P ** m
    return L, gcd_bound(int(ca * L), aa, fa, N, keep, claims, xgcd_claims)


def factored_gcd_bound(FA, FB):
    """A FactoredExpr D with gcd(FA(q), FB(q)) dividing D(q) for every integer q
    at which both sides are integers."""
    from .formula import FactoredExpr

    L, b = scaled_gcd_bound(FA, FB)
    return FactoredExpr(Fraction(b.const, L), b.q_power, b.factors)
