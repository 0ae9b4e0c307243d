"""The order-formula language used by catalog files.

Grammar (whitespace-insensitive)::

    expr  := term (('+' | '-') term)*
    term  := pow  (('*' | '/') pow)*
    pow   := atom ('^' uint)?
    atom  := uint | 'q' | 'eps' | 'gcd' '(' uint ',' expr ')' | '(' expr ')'

``eps`` stands for a sign, +1 or -1.  A formula can be evaluated exactly at a
point, or *resolved* for a fixed sign and a congruence class of ``q`` into a
:class:`FactoredExpr`, which is what the lemma layer works with.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import Union

from .polyarith import IntPoly, NotDivisible, poly_divexact, poly_eval


class FormulaError(ValueError):
    pass


class FormulaSyntaxError(FormulaError):
    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


class UnknownIdentifier(FormulaError):
    def __init__(self, name: str, pos: int):
        self.name = name
        self.pos = pos
        super().__init__(f"unknown identifier {name!r} at position {pos}")


class UnresolvedGcd(FormulaError):
    pass


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Var:
    name: str  # "q" or "eps"


@dataclass(frozen=True)
class Gcd:
    modulus: int
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exp: int


Node = Union[Num, Var, Gcd, BinOp, Pow]


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:  # only trailing whitespace is left
            break
        if m.group(1) is not None:
            toks.append(("int", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            toks.append(("name", m.group(2), m.start(2)))
        elif m.group(3) is not None:
            ch = m.group(3)
            if ch not in "+-*/^(),":
                raise FormulaSyntaxError(f"unexpected character {ch!r}", m.start(3), text)
            toks.append(("op", ch, m.start(3)))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind not in ("op", "name"):
            found = "end of input" if kind == "end" else repr(val)
            raise FormulaSyntaxError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise FormulaSyntaxError(f"unexpected {val!r}", pos, self.text)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.power()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.power())
        return node

    def power(self) -> Node:
        node = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            kind, val, pos = self.take()
            if kind != "int":
                raise FormulaSyntaxError("exponent must be a nonnegative integer literal", pos, self.text)
            node = Pow(node, int(val))
        return node

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "int":
            return Num(int(val))
        if kind == "name":
            if val in ("q", "eps"):
                return Var(val)
            if val == "gcd":
                self.expect("(")
                mk, mv, mpos = self.take()
                if mk != "int":
                    raise FormulaSyntaxError("gcd modulus must be an integer literal", mpos, self.text)
                self.expect(",")
                arg = self.expr()
                self.expect(")")
                if int(mv) < 1:
                    raise FormulaSyntaxError("gcd modulus must be positive", mpos, self.text)
                return Gcd(int(mv), arg)
            raise UnknownIdentifier(val, pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise FormulaSyntaxError(f"expected a number, 'q', 'eps', 'gcd' or '(', found {found}", pos, self.text)


def parse_formula(text: str) -> Node:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing

def _level(node: Node) -> int:
    if isinstance(node, BinOp):
        return 1 if node.op in "+-" else 2
    if isinstance(node, Pow):
        return 3
    return 4


def pretty(node: Node) -> str:
    """Canonical text for ``node``; ``parse_formula(pretty(n)) == n``."""
    if isinstance(node, Num):
        return str(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Gcd):
        return f"gcd({node.modulus},{pretty(node.arg)})"
    if isinstance(node, Pow):
        base = pretty(node.base)
        if _level(node.base) < 4:
            base = f"({base})"
        return f"{base}^{node.exp}"
    lvl = _level(node)
    left = pretty(node.left)
    if _level(node.left) < lvl:
        left = f"({left})"
    right = pretty(node.right)
    if _level(node.right) <= lvl:
        right = f"({right})"
    return f"{left}{node.op}{right}"


def uses_eps(node: Node) -> bool:
    if isinstance(node, Var):
        return node.name == "eps"
    if isinstance(node, Gcd):
        return uses_eps(node.arg)
    if isinstance(node, Pow):
        return uses_eps(node.base)
    if isinstance(node, BinOp):
        return uses_eps(node.left) or uses_eps(node.right)
    return False


def gcd_moduli(node: Node) -> set[int]:
    """Every gcd modulus appearing in ``node``."""
    if isinstance(node, Gcd):
        return {node.modulus} | gcd_moduli(node.arg)
    if isinstance(node, Pow):
        return gcd_moduli(node.base)
    if isinstance(node, BinOp):
        return gcd_moduli(node.left) | gcd_moduli(node.right)
    return set()


def substitute_power(node: Node, r: int) -> Node:
    """The formula with ``q`` replaced by ``q^r``."""
    if isinstance(node, Var):
        return Pow(node, r) if node.name == "q" else node
    if isinstance(node, Gcd):
        return Gcd(node.modulus, substitute_power(node.arg, r))
    if isinstance(node, Pow):
        if node.base == Var("q"):
            return Pow(Var("q"), node.exp * r)
        return Pow(substitute_power(node.base, r), node.exp)
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute_power(node.left, r), substitute_power(node.right, r))
    return node


# ---------------------------------------------------------------------------
# exact evaluation

def eval_formula(node: Node, q: int, eps: int = 1) -> Fraction:
    if isinstance(node, Num):
        return Fraction(node.value)
    if isinstance(node, Var):
        return Fraction(q) if node.name == "q" else Fraction(eps)
    if isinstance(node, Gcd):
        a = eval_formula(node.arg, q, eps)
        if a.denominator != 1:
            raise FormulaError(f"gcd argument {pretty(node.arg)} is not an integer at q={q}")
        return Fraction(gcd(node.modulus, int(a)))
    if isinstance(node, Pow):
        return eval_formula(node.base, q, eps) ** node.exp
    a = eval_formula(node.left, q, eps)
    b = eval_formula(node.right, q, eps)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    return a / b


def eval_int(node: Node, q: int, eps: int = 1) -> int:
    val = eval_formula(node, q, eps)
    if val.denominator != 1:
        raise FormulaError(f"{pretty(node)} is not an integer at q={q}, eps={eps}: {val}")
    return int(val)


# ---------------------------------------------------------------------------
# factored form

@dataclass(frozen=True)
class Residue:
    """The assumption ``q = residue (mod modulus)``."""

    modulus: int
    residue: int

    def __post_init__(self):
        if self.modulus < 1:
            raise ValueError("modulus must be positive")
        object.__setattr__(self, "residue", self.residue % self.modulus)

    def __str__(self):
        return f"q = {self.residue} mod {self.modulus}"


def _poly_key(P: IntPoly):
    return (P.degree, P.coeffs)


@dataclass(frozen=True)
class FactoredExpr:
    """``const * q^q_power * prod P^m * prod gcd(mod, A)^e``.

    Factor polynomials are primitive with positive leading coefficient and
    nonzero constant term; negative multiplicities are denominators.
    """

    const: Fraction = Fraction(1)
    q_power: int = 0
    factors: tuple[tuple[IntPoly, int], ...] = ()
    gcd_terms: tuple[tuple[int, IntPoly, int], ...] = ()

    @staticmethod
    def constant(c) -> FactoredExpr:
        return FactoredExpr(Fraction(c))

    @staticmethod
    def from_poly(P: IntPoly, c=Fraction(1)) -> FactoredExpr:
        if P.is_zero():
            return FactoredExpr(Fraction(0))
        a = 0
        while P.coeffs[a] == 0:
            a += 1
        R = IntPoly(P.coeffs[a:])
        content = R.content()
        if R.lead < 0:
            content = -content
        R = IntPoly(x // content for x in R.coeffs)
        const = Fraction(c) * content
        if R.is_const():
            return FactoredExpr(const, a)
        return FactoredExpr(const, a, ((R, 1),))

    @property
    def is_resolved(self) -> bool:
        return not self.gcd_terms

    def __mul__(self, other: FactoredExpr) -> FactoredExpr:
        mult: dict[IntPoly, int] = {}
        for P, m in self.factors + other.factors:
            mult[P] = mult.get(P, 0) + m
        factors = tuple(sorted(((P, m) for P, m in mult.items() if m), key=lambda t: _poly_key(t[0])))
        return FactoredExpr(
            self.const * other.const,
            self.q_power + other.q_power,
            factors,
            self.gcd_terms + other.gcd_terms,
        )

    def inverse(self) -> FactoredExpr:
        if self.const == 0:
            raise ZeroDivisionError("inverse of zero")
        return FactoredExpr(
            1 / self.const,
            -self.q_power,
            tuple((P, -m) for P, m in self.factors),
            tuple((mod, A, -e) for mod, A, e in self.gcd_terms),
        )

    def __pow__(self, n: int) -> FactoredExpr:
        if n < 0:
            raise ValueError("negative exponent")
        return FactoredExpr(
            self.const ** n,
            self.q_power * n,
            tuple((P, m * n) for P, m in self.factors if m * n),
            self.gcd_terms * n,
        )

    def evaluate(self, q: int) -> Fraction:
        val = Fraction(self.const) * Fraction(q) ** self.q_power
        for P, m in self.factors:
            val *= Fraction(poly_eval(P, q)) ** m
        for mod, A, e in self.gcd_terms:
            val *= Fraction(gcd(mod, poly_eval(A, q))) ** e
        return val

    def numerator_poly(self) -> IntPoly:
        """Product of the q-power and the positive-multiplicity factors."""
        P = IntPoly.monomial(max(self.q_power, 0))
        for F, m in self.factors:
            if m > 0:
                P = P * F ** m
        return P

    def denominator_poly(self) -> IntPoly:
        P = IntPoly.monomial(max(-self.q_power, 0))
        for F, m in self.factors:
            if m < 0:
                P = P * F ** (-m)
        return P

    def to_poly(self) -> tuple[Fraction, IntPoly]:
        """``(c, P)`` with this expression equal to ``c * P``; denominators must divide exactly."""
        if self.gcd_terms:
            raise UnresolvedGcd("cannot expand an expression with unresolved gcd terms")
        num, den = self.numerator_poly(), self.denominator_poly()
        if den.degree > 0:
            try:
                num = poly_divexact(num, den)
            except NotDivisible:
                raise NotDivisible(f"{self} is not a polynomial") from None
        return self.const, num

    def __str__(self) -> str:
        parts = []
        if self.const != 1 or (not self.q_power and not self.factors and not self.gcd_terms):
            parts.append(str(self.const))
        for mod, A, e in self.gcd_terms:
            parts.append(f"gcd({mod},{A})" + ("^-1" if e < 0 else ""))
        if self.q_power:
            parts.append("q" if self.q_power == 1 else f"q^{self.q_power}")
        for P, m in self.factors:
            parts.append(f"({P})" + ("" if m == 1 else f"^{m}"))
        return "*".join(parts)


def _gcd_value(mod: int, A: IntPoly, residue: Residue | None) -> int | None:
    """``gcd(mod, A(q))`` when it is constant on the assumed residue class."""
    if residue is not None and residue.modulus % mod == 0:
        return gcd(mod, poly_eval(A, residue.residue) % mod)
    values = {gcd(mod, poly_eval(A, r) % mod) for r in range(mod)}
    if len(values) == 1:
        return values.pop()
    return None


def resolve(node: Node, eps: int = 1, residue: Residue | None = None, strict: bool = True) -> FactoredExpr:
    """Factored form of ``node`` for the given sign and congruence class of ``q``.

    A gcd term is replaced by its value when that value is determined by the
    residue class.  Otherwise it raises :class:`UnresolvedGcd` when ``strict``
    and is kept as a symbolic gcd term when not.
    """
    if eps not in (1, -1):
        raise ValueError("eps must be +1 or -1")
    return _resolve(node, eps, residue, strict)


def _expand(fe: FactoredExpr) -> tuple[Fraction, IntPoly]:
    if fe.gcd_terms:
        raise UnresolvedGcd("gcd term inside a sum needs a residue assumption")
    return fe.to_poly()


def _resolve(node: Node, eps: int, residue: Residue | None, strict: bool) -> FactoredExpr:
    if isinstance(node, Num):
        return FactoredExpr.constant(node.value)
    if isinstance(node, Var):
        if node.name == "q":
            return FactoredExpr(Fraction(1), 1)
        return FactoredExpr.constant(eps)
    if isinstance(node, Gcd):
        c, A = _expand(_resolve(node.arg, eps, residue, True))
        if c.denominator != 1:
            raise FormulaError(f"gcd argument {pretty(node.arg)} must be an integer polynomial")
        A = A * int(c)
        val = _gcd_value(node.modulus, A, residue)
        if val is not None:
            return FactoredExpr.constant(val)
        if strict:
            raise UnresolvedGcd(f"gcd({node.modulus}, {A}) is not determined by {residue or 'no residue assumption'}")
        return FactoredExpr(gcd_terms=((node.modulus, A, 1),))
    if isinstance(node, Pow):
        return _resolve(node.base, eps, residue, strict) ** node.exp
    left = _resolve(node.left, eps, residue, strict)
    right = _resolve(node.right, eps, residue, strict)
    if node.op == "*":
        return left * right
    if node.op == "/":
        return left * right.inverse()
    c1, P1 = _expand(left)
    c2, P2 = _expand(right)
    den = lcm(c1.denominator, c2.denominator)
    P = P1 * int(c1 * den) + (P2 * int(c2 * den) if node.op == "+" else -(P2 * int(c2 * den)))
    return FactoredExpr.from_poly(P, Fraction(1, den))


def residue_modulus(*nodes: Node) -> int:
    """Least common multiple of the gcd moduli in ``nodes`` (1 if none)."""
    m = 1
    for node in nodes:
        for mod in gcd_moduli(node):
            m = lcm(m, mod)
    return m
