"""Small expression engine: parse, print, differentiate, evaluate, and test
expressions for identical vanishing on a sampled domain.

Expressions are immutable trees (DAGs once subtrees are shared) over state
variables ``x1..xn``.  There is no canonical form.  Two expressions are
considered equal when their difference passes :func:`is_zero`, a seeded
probabilistic identity test.
"""

from __future__ import annotations

import hashlib
import math
import re
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import qmc

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary", "Pow",
    "ExprError", "ParseError", "UndefinedError", "UndecidableError", "DimensionError",
    "Domain", "ZeroTest",
    "const", "var", "parse", "to_text", "evaluate", "evaluate_points",
    "differentiate", "substitute", "simplify", "is_zero", "zero_test", "lambdify",
    "max_index", "ZERO", "ONE",
    "EPS_ZERO", "N_ZERO",
]

EPS_ZERO = 1e-9
N_ZERO = 64

UNARY_OPS = ("neg", "sqrt", "exp", "log", "sin", "cos")


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError, ValueError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class DimensionError(ExprError, ValueError):
    pass


class UndefinedError(ExprError, ArithmeticError):
    """Evaluation hit a point where the expression is not defined."""


class UndecidableError(ExprError):
    """Every sample point was outside the definable set of an expression."""


# ---------------------------------------------------------------------------
# nodes


class Expr:
    """Base node.  Equality is identity; use :func:`is_zero` for semantics."""

    __slots__ = ("_dcache", "__weakref__")

    def __init__(self):
        self._dcache: dict[int, Expr] = {}

    # arithmetic sugar, all routed through the rewriting constructors
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"<{type(self).__name__} {to_text(self)}>"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Fraction | float | int):
        super().__init__()
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, int):
            value = Fraction(value)
        elif isinstance(value, (np.floating, np.integer)):
            value = float(value) if isinstance(value, np.floating) else Fraction(int(value))
        if not isinstance(value, (Fraction, float)):
            raise TypeError(f"unsupported constant {value!r}")
        self.value = value

    def is_value(self, v) -> bool:
        return self.value == v


class Var(Expr):
    __slots__ = ("index",)

    def __init__(self, index: int):
        super().__init__()
        if index < 0:
            raise DimensionError(f"negative variable index {index}")
        self.index = index


class Unary(Expr):
    __slots__ = ("op", "arg")

    def __init__(self, op: str, arg: Expr):
        super().__init__()
        if op not in UNARY_OPS:
            raise ValueError(f"unknown unary op {op!r}")
        self.op = op
        self.arg = arg


class Binary(Expr):
    __slots__ = ("op", "left", "right")

    def __init__(self, op: str, left: Expr, right: Expr):
        super().__init__()
        if op not in "+-*/":
            raise ValueError(f"unknown binary op {op!r}")
        self.op = op
        self.left = left
        self.right = right


class Pow(Expr):
    """``base ^ exponent`` with a constant rational exponent."""

    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: Fraction):
        super().__init__()
        self.base = base
        self.exponent = Fraction(exponent)


ZERO = Const(0)
ONE = Const(1)


def const(value) -> Const:
    return Const(value)


def var(index: int) -> Var:
    return Var(index)


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, Fraction, np.floating, np.integer)):
        return Const(value)
    raise TypeError(f"cannot use {type(value).__name__} as an expression")


# ---------------------------------------------------------------------------
# rewriting constructors (light local rewrites + constant folding only)


def _is(e: Expr, v) -> bool:
    return isinstance(e, Const) and e.value == v


def _fold(op: str, a, b):
    if isinstance(a, float) or isinstance(b, float):
        a, b = float(a), float(b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    return a / b


def add(a: Expr, b: Expr) -> Expr:
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(_fold("+", a.value, b.value))
    if isinstance(b, Unary) and b.op == "neg":
        return sub(a, b.arg)
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(_fold("-", a.value, b.value))
    if isinstance(b, Unary) and b.op == "neg":
        return add(a, b.arg)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(_fold("*", a.value, b.value))
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is(b, 1):
        return a
    if _is(a, 0) and not _is(b, 0):
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(_fold("/", a.value, b.value))
    return Binary("/", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def unary(op: str, a: Expr) -> Expr:
    if op == "neg":
        return neg(a)
    if isinstance(a, Const):
        v = a.value
        if op == "sqrt" and isinstance(v, Fraction) and v >= 0:
            num, den = math.isqrt(v.numerator), math.isqrt(v.denominator)
            if num * num == v.numerator and den * den == v.denominator:
                return Const(Fraction(num, den))
        if v == 0 and op in ("sin",):
            return ZERO
        if v == 0 and op in ("exp", "cos"):
            return ONE
        if v == 1 and op == "log":
            return ZERO
    return Unary(op, a)


def power(base: Expr, exponent) -> Expr:
    exponent = Fraction(exponent) if not isinstance(exponent, float) else Fraction(exponent).limit_denominator(10**6)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        v = base.value
        if exponent.denominator == 1 and not (v == 0 and exponent < 0):
            if isinstance(v, Fraction):
                return Const(v ** int(exponent))
            return Const(float(v) ** int(exponent))
    if isinstance(base, Pow) and exponent.denominator == 1 and base.exponent.denominator == 1:
        return Pow(base.base, base.exponent * exponent)
    return Pow(base, exponent)


def sqrt(a: Expr) -> Expr:
    return unary("sqrt", a)


def exp(a: Expr) -> Expr:
    return unary("exp", a)


def log(a: Expr) -> Expr:
    return unary("log", a)


def sin(a: Expr) -> Expr:
    return unary("sin", a)


def cos(a: Expr) -> Expr:
    return unary("cos", a)


# ---------------------------------------------------------------------------
# traversal helpers


def _children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, Unary):
        return (e.arg,)
    if isinstance(e, Binary):
        return (e.left, e.right)
    if isinstance(e, Pow):
        return (e.base,)
    return ()


def _postorder(roots: Iterable[Expr]) -> list[Expr]:
    """Unique nodes reachable from ``roots``, children before parents."""
    seen: set[int] = set()
    order: list[Expr] = []
    for root in roots:
        stack: list[tuple[Expr, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                order.append(node)
                continue
            stack.append((node, True))
            for child in _children(node):
                if id(child) not in seen:
                    stack.append((child, False))
    return order


def max_index(e: Expr | Iterable[Expr]) -> int:
    """Largest variable index used, or -1 for a constant expression."""
    roots = [e] if isinstance(e, Expr) else list(e)
    return max((n.index for n in _postorder(roots) if isinstance(n, Var)), default=-1)


def check_dimension(e: Expr | Iterable[Expr], n: int) -> None:
    k = max_index(e)
    if k >= n:
        raise DimensionError(f"variable x{k + 1} used but dimension is {n}")


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _const_text(v) -> tuple[str, int]:
    if isinstance(v, Fraction):
        if v < 0:
            return f"neg({_const_text(-v)[0]})", 4
        if v.denominator == 1:
            return str(v.numerator), 4
        return f"({v.numerator}/{v.denominator})", 4
    if not math.isfinite(v):
        raise ExprError(f"cannot print non-finite constant {v}")
    if v < 0:
        return f"neg({repr(-v)})", 4
    return repr(float(v)), 4


def _exponent_text(r: Fraction) -> str:
    if r.denominator == 1 and r > 0:
        return str(r.numerator)
    if r.denominator == 1:
        return f"({r.numerator})"
    return f"({r.numerator}/{r.denominator})"


def to_text(e: Expr, n: int | None = None) -> str:
    """Render in the parse grammar.  Uses ``x, y, z`` when ``n <= 3``."""
    if n is not None and n <= 3:
        names = ["x", "y", "z"][:n]
    else:
        names = None

    memo: dict[int, tuple[str, int]] = {}
    for node in _postorder([e]):
        if isinstance(node, Const):
            out = _const_text(node.value)
        elif isinstance(node, Var):
            if names is not None and node.index < len(names):
                out = (names[node.index], 4)
            else:
                out = (f"x{node.index + 1}", 4)
        elif isinstance(node, Unary):
            out = (f"{node.op}({memo[id(node.arg)][0]})", 4)
        elif isinstance(node, Pow):
            s, p = memo[id(node.base)]
            if p < 4:
                s = f"({s})"
            out = (f"{s}^{_exponent_text(node.exponent)}", 3)
        else:
            prec = _PREC[node.op]
            ls, lp = memo[id(node.left)]
            rs, rp = memo[id(node.right)]
            if lp < prec:
                ls = f"({ls})"
            if rp < prec or (rp == prec and node.op in "-/"):
                rs = f"({rs})"
            out = (f"{ls}{node.op}{rs}" if prec == 2 else f"{ls} {node.op} {rs}", prec)
        memo[id(node)] = out
    return memo[id(e)][0]


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int):
        if not text.isascii():
            raise ParseError("expression must be ASCII", next(i for i, c in enumerate(text) if not c.isascii()))
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n

    @property
    def tok(self):
        return self.tokens[self.i]

    def take(self, value=None, kind=None):
        k, v, p = self.tok
        if (value is not None and v != value) or (kind is not None and k != kind):
            want = value if value is not None else kind
            got = v if k != "end" else "end of input"
            raise ParseError(f"expected {want!r}, got {got!r}", p)
        self.i += 1
        return v

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok[0] != "end":
            raise ParseError(f"unexpected {self.tok[1]!r}", self.tok[2])
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok[1] in ("+", "-") and self.tok[0] == "op":
            op = self.take()
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.signed()
        while self.tok[1] in ("*", "/") and self.tok[0] == "op":
            op = self.take()
            rhs = self.signed()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def signed(self) -> Expr:
        # leading unary minus is accepted as shorthand for neg(...)
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.take()
            return neg(self.signed())
        return self.factor()

    def factor(self) -> Expr:
        base = self.base()
        if self.tok[1] == "^" and self.tok[0] == "op":
            self.take()
            return power(base, self.rational())
        return base

    def _number(self) -> Fraction:
        k, v, p = self.tok
        if k != "num":
            raise ParseError(f"expected a number, got {v or 'end of input'!r}", p)
        self.take()
        return Fraction(v)

    def rational(self) -> Fraction:
        if self.tok[1] == "(":
            self.take("(")
            sign = -1 if self.tok[1] == "-" else 1
            if sign < 0:
                self.take("-")
            r = self._number()
            if self.tok[1] == "/":
                self.take("/")
                p = self.tok[2]
                d = self._number()
                if d == 0:
                    raise ParseError("zero denominator in exponent", p)
                r = r / d
            self.take(")")
            return sign * r
        sign = 1
        if self.tok[1] == "-":
            self.take("-")
            sign = -1
        return sign * self._number()

    def base(self) -> Expr:
        k, v, p = self.tok
        if k == "num":
            self.take()
            return Const(Fraction(v))
        if k == "name":
            self.take()
            if v in UNARY_OPS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return unary(v, arg)
            return self.variable(v, p)
        if v == "(":
            self.take("(")
            e = self.expr()
            self.take(")")
            return e
        raise ParseError(f"unexpected {v or 'end of input'!r}", p)

    def variable(self, name: str, pos: int) -> Expr:
        aliases = {"x": 0, "y": 1, "z": 2}
        m = re.fullmatch(r"x([1-9]\d*)", name)
        if m:
            index = int(m.group(1)) - 1
        elif name in aliases and self.n <= 3:
            index = aliases[name]
        else:
            raise ParseError(f"unknown identifier {name!r}", pos)
        if index >= self.n:
            raise ParseError(f"variable {name!r} out of range for dimension {self.n}", pos)
        return Var(index)


def parse(text: str, n: int) -> Expr:
    """Parse ``text`` into an expression over ``n`` state variables.

    >>> to_text(parse("x1/(x1^2+x2^2)", 2), 2)
    'x/(x^2 + y^2)'
    """
    if n < 1:
        raise DimensionError("dimension must be positive")
    return _Parser(str(text), n).parse()


# ---------------------------------------------------------------------------
# differentiation and substitution


def differentiate(e: Expr, i: int, n: int | None = None) -> Expr:
    """Symbolic partial derivative with respect to variable ``i`` (0-based)."""
    if i < 0 or (n is not None and i >= n):
        raise DimensionError(f"derivative index {i} out of range")
    for node in _postorder([e]):
        if i in node._dcache:
            continue
        node._dcache[i] = _d_node(node, i)
    return e._dcache[i]


def _d_node(node: Expr, i: int) -> Expr:
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.index == i else ZERO
    if isinstance(node, Pow):
        du = node.base._dcache[i]
        if _is(du, 0):
            return ZERO
        r = node.exponent
        return mul(mul(Const(r), power(node.base, r - 1)), du)
    if isinstance(node, Unary):
        u = node.arg
        du = u._dcache[i]
        if _is(du, 0):
            return ZERO
        op = node.op
        if op == "neg":
            return neg(du)
        if op == "sqrt":
            return div(du, mul(Const(2), node))
        if op == "exp":
            return mul(node, du)
        if op == "log":
            return div(du, u)
        if op == "sin":
            return mul(cos(u), du)
        return neg(mul(sin(u), du))
    a, b = node.left, node.right
    da, db = a._dcache[i], b._dcache[i]
    if node.op == "+":
        return add(da, db)
    if node.op == "-":
        return sub(da, db)
    if node.op == "*":
        return add(mul(da, b), mul(a, db))
    # quotient rule, split so that constant denominators stay cheap
    if _is(db, 0):
        return div(da, b)
    return div(sub(mul(da, b), mul(a, db)), power(b, 2))


def substitute(e: Expr, values: Sequence[Expr]) -> Expr:
    """Replace each variable ``x_k`` by ``values[k]`` (composition ``e o F``)."""
    memo: dict[int, Expr] = {}
    for node in _postorder([e]):
        if isinstance(node, Const):
            out = node
        elif isinstance(node, Var):
            if node.index >= len(values):
                raise DimensionError(f"no substitute for x{node.index + 1}")
            out = values[node.index]
        elif isinstance(node, Unary):
            out = unary(node.op, memo[id(node.arg)])
        elif isinstance(node, Pow):
            out = power(memo[id(node.base)], node.exponent)
        else:
            l, r = memo[id(node.left)], memo[id(node.right)]
            out = {"+": add, "-": sub, "*": mul, "/": div}[node.op](l, r)
        memo[id(node)] = out
    return memo[id(e)]


# ---------------------------------------------------------------------------
# normalisation
#
# A sum is a dict  monomial-key -> (coefficient, factors)  where factors maps
# an atom key to (atom, exponent).  Atoms are variables, non-power unaries,
# sums that could not be merged, and irreducible powers.


def _mono_key(factors) -> tuple:
    return tuple(sorted((k, f[1]) for k, f in factors.items()))


def _add_term(acc: dict, coef, factors) -> None:
    if coef == 0:
        return
    key = _mono_key(factors)
    if key in acc:
        c = acc[key][0] + coef
        if c == 0:
            del acc[key]
        else:
            acc[key] = (c, factors)
    else:
        acc[key] = (coef, factors)


def _atom(e: Expr, exponent=Fraction(1)) -> dict:
    factors = {to_text(e): (e, exponent)}
    return {_mono_key(factors): (Fraction(1), factors)}


def _single(s: dict):
    if len(s) == 1:
        return next(iter(s.values()))
    return None


def _as_factor(s: dict):
    """Coefficient and factors of a one-term sum, else the sum as an atom."""
    t = _single(s)
    if t is not None:
        return t
    e = _build_sum(s)
    return Fraction(1), {to_text(e): (e, Fraction(1))}


def _times(a: dict, b: dict) -> dict:
    ca, fa = _as_factor(a)
    cb, fb = _as_factor(b)
    factors = dict(fa)
    for k, (base, p) in fb.items():
        if k in factors:
            q = factors[k][1] + p
            if q == 0:
                del factors[k]
            else:
                factors[k] = (base, q)
        else:
            factors[k] = (base, p)
    out: dict = {}
    _add_term(out, ca * cb, factors)
    return out


def _raise(s: dict, q: Fraction) -> dict:
    t = _single(s)
    if t is not None:
        c, factors = t
        if q.denominator == 1 and (c != 0 or q > 0):
            out: dict = {}
            _add_term(out, c ** int(q), {k: (b, p * q) for k, (b, p) in factors.items()})
            return out
        if c == 1 and not factors:
            return {(): (Fraction(1), {})}
        if c == 1 and len(factors) == 1:
            (k, (b, p)), = factors.items()
            if abs(p) == 1:
                out = {}
                _add_term(out, Fraction(1), {k: (b, p * q)})
                return out
    if not s:
        return {} if q > 0 else _atom(power(ZERO, q))
    if t is None:
        return _atom(_build_sum(s), q)
    return _atom(Pow(_build_sum(s), q))


def _build_term(coef, factors) -> Expr:
    num, den = ONE, ONE
    for k in sorted(factors):
        base, p = factors[k]
        if p > 0:
            num = mul(num, power(base, p))
        else:
            den = mul(den, power(base, -p))
    mono = div(num, den)
    return mul(Const(coef), mono)


def _build_sum(s: dict) -> Expr:
    out = None
    for key in sorted(s, key=lambda k: (len(k), k)):
        coef, factors = s[key]
        negative = coef < 0
        term = _build_term(-coef if negative else coef, factors)
        if out is None:
            out = neg(term) if negative else term
        else:
            out = sub(out, term) if negative else add(out, term)
    return ZERO if out is None else out


def simplify(e: Expr) -> Expr:
    """An expression equal to ``e`` wherever ``e`` is defined, with constants
    folded, equal factors merged and like terms collected.

    Products are not distributed over sums, so this is a tidy-up for
    display and output files, not a canonical form.
    """
    memo: dict[int, dict] = {}
    for node in _postorder([e]):
        if isinstance(node, Const):
            out: dict = {}
            _add_term(out, node.value, {})
        elif isinstance(node, Var):
            out = _atom(node)
        elif isinstance(node, Unary):
            a = memo[id(node.arg)]
            if node.op == "neg":
                out = {k: (-c, f) for k, (c, f) in a.items()}
            elif node.op == "sqrt":
                out = _raise(a, Fraction(1, 2))
            else:
                out = _atom(unary(node.op, _build_sum(a)))
        elif isinstance(node, Pow):
            out = _raise(memo[id(node.base)], node.exponent)
        else:
            a, b = memo[id(node.left)], memo[id(node.right)]
            if node.op in "+-":
                out = dict(a)
                for c, f in b.values():
                    _add_term(out, c if node.op == "+" else -c, f)
            elif node.op == "*":
                out = _times(a, b)
            elif b:
                out = _times(a, _raise(b, Fraction(-1)))
            else:
                out = _atom(Binary("/", _build_sum(a), ZERO))
        memo[id(node)] = out
    return _build_sum(memo[id(e)])


# ---------------------------------------------------------------------------
# numerics


def _rational_power(x: np.ndarray, r: Fraction) -> np.ndarray:
    if r.denominator == 1:
        return np.power(x, float(r)) if r < 0 else np.power(x, int(r))
    if r.denominator % 2 == 1:
        # real odd root: (-b)^(p/q) = (-1)^p |b|^(p/q)
        mag = np.power(np.abs(x), float(r))
        return mag if r.numerator % 2 == 0 else np.sign(x) * mag
    return np.power(x, float(r))


_UFUNC = {"sqrt": np.sqrt, "exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos}


def _evaluate_many(roots: Sequence[Expr], points: np.ndarray, want_scale: bool = False):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    npts = pts.shape[0]
    memo: dict[int, np.ndarray] = {}
    scale = np.zeros(npts) if want_scale else None
    with np.errstate(all="ignore"):
        for node in _postorder(roots):
            if isinstance(node, Const):
                v = np.full(npts, float(node.value))
            elif isinstance(node, Var):
                if node.index >= pts.shape[1]:
                    raise DimensionError(f"point has dimension {pts.shape[1]}, expression uses x{node.index + 1}")
                v = pts[:, node.index].copy()
            elif isinstance(node, Unary):
                a = memo[id(node.arg)]
                v = -a if node.op == "neg" else _UFUNC[node.op](a)
            elif isinstance(node, Pow):
                v = _rational_power(memo[id(node.base)], node.exponent)
            else:
                a, b = memo[id(node.left)], memo[id(node.right)]
                if node.op == "+":
                    v = a + b
                elif node.op == "-":
                    v = a - b
                elif node.op == "*":
                    v = a * b
                else:
                    v = a / b
            v = np.where(np.isfinite(v), v, np.nan)
            if want_scale:
                scale = np.fmax(scale, np.abs(v))
            memo[id(node)] = v
    values = np.stack([memo[id(r)] for r in roots], axis=-1) if roots else np.empty((npts, 0))
    return values, scale


def evaluate_points(e: Expr | Sequence[Expr], points) -> np.ndarray:
    """Vectorised evaluation; undefined entries come back as NaN.

    With a single expression the result has shape ``(N,)``; with a sequence it
    has shape ``(N, len(e))``.
    """
    if isinstance(e, Expr):
        return _evaluate_many([e], points)[0][:, 0]
    return _evaluate_many(list(e), points)[0]


def evaluate(e: Expr, point) -> float:
    """Evaluate at a single point; raises :class:`UndefinedError` off the
    definable set (division by zero, sqrt/log of a negative, overflow)."""
    p = np.asarray(point, dtype=float).reshape(1, -1)
    value = float(_evaluate_many([e], p)[0][0, 0])
    if math.isnan(value):
        raise UndefinedError(f"{to_text(e)} is undefined at {tuple(p[0])}")
    return value


# ---------------------------------------------------------------------------
# domains and the identity test


@dataclass(frozen=True, eq=False)
class Domain:
    """Sampling box in R^n with an exclusion list.

    A point ``p`` is admissible when it lies in the box and
    ``|g(p)| >= margin`` for every exclusion expression ``g``.  The default
    margin is 1e-3 of the box diagonal.
    """

    low: tuple[float, ...]
    high: tuple[float, ...]
    exclusions: tuple[Expr, ...] = ()
    margin: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        low = tuple(float(v) for v in self.low)
        high = tuple(float(v) for v in self.high)
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)
        object.__setattr__(self, "exclusions", tuple(self.exclusions))
        if len(low) != len(high) or not low:
            raise DimensionError("box bounds must be non-empty and of equal length")
        if any(h <= l for l, h in zip(low, high)):
            raise ValueError("box must have positive volume")
        check_dimension(self.exclusions, len(low))
        if self.margin is not None and self.margin <= 0:
            raise ValueError("exclusion margin must be positive")

    @classmethod
    def box(cls, n: int, low: float = -1.0, high: float = 1.0, exclusions=(), margin=None) -> "Domain":
        return cls((low,) * n, (high,) * n, tuple(exclusions), margin)

    @property
    def n(self) -> int:
        return len(self.low)

    @property
    def eps(self) -> float:
        if self.margin is not None:
            return self.margin
        diag = math.sqrt(sum((h - l) ** 2 for l, h in zip(self.low, self.high)))
        return 1e-3 * diag

    def key(self) -> str:
        parts = [repr(self.low), repr(self.high), repr(self.eps)]
        parts += [to_text(g) for g in self.exclusions]
        return "|".join(parts)

    def seed(self, salt: int = 0) -> int:
        digest = hashlib.sha256(f"{self.key()}#{salt}".encode()).digest()
        return int.from_bytes(digest[:8], "little")

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = np.asarray(self.low), np.asarray(self.high)
        ok = np.all((pts >= lo) & (pts <= hi), axis=1)
        if self.exclusions:
            g = evaluate_points(list(self.exclusions), pts)
            ok &= np.all(np.abs(g) >= self.eps, axis=1)
        return ok

    def sample(self, count: int = N_ZERO, salt: int = 0) -> np.ndarray:
        """Deterministic scrambled-Halton points inside the domain."""
        key = (count, salt)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        sampler = qmc.Halton(d=self.n, scramble=True, seed=self.seed(salt))
        lo, hi = np.asarray(self.low), np.asarray(self.high)
        accepted = []
        total = 0
        for _ in range(64):
            batch = qmc.scale(sampler.random(max(2 * count, 16)), lo, hi)
            batch = batch[self.contains(batch)]
            accepted.append(batch)
            total += len(batch)
            if total >= count:
                break
        pts = np.concatenate(accepted)[:count] if accepted else np.empty((0, self.n))
        if len(pts) < count:
            raise UndecidableError("could not draw enough admissible points from the domain")
        pts.setflags(write=False)
        with self._lock:
            self._cache[key] = pts
        return pts


@dataclass(frozen=True)
class ZeroTest:
    passed: bool
    worst: float          # largest |e(p)| over defined sample points
    worst_ratio: float    # largest |e(p)| / (1 + scale(p))
    n_defined: int

    def __bool__(self):
        return self.passed


def zero_test(e: Expr, domain: Domain, eps: float = EPS_ZERO, n_points: int = N_ZERO,
              points=None) -> ZeroTest:
    """Probabilistic identity test with a diagnostic record.

    ``e`` passes when ``|e(p)| <= eps * (1 + scale(p))`` at every defined
    sample point, ``scale(p)`` being the largest absolute value taken by any
    subterm of ``e`` at ``p``.  This certifies vanishing on the sampled set
    only; it is not a proof.
    """
    pts = domain.sample(n_points) if points is None else np.atleast_2d(points)
    check_dimension(e, pts.shape[1])
    values, scale = _evaluate_many([e], pts, want_scale=True)
    v = values[:, 0]
    defined = ~np.isnan(v)
    if not defined.any():
        raise UndecidableError(f"{to_text(e)} is undefined at every sample point")
    absv = np.abs(v[defined])
    ratio = absv / (1.0 + scale[defined])
    return ZeroTest(bool(np.all(ratio <= eps)), float(absv.max()), float(ratio.max()), int(defined.sum()))


def is_zero(e: Expr, domain: Domain, eps: float = EPS_ZERO, n_points: int = N_ZERO) -> bool:
    return zero_test(e, domain, eps, n_points).passed


# ---------------------------------------------------------------------------
# compilation to numpy for hot loops

_COMPILED: dict[tuple[int, ...], tuple[tuple[Expr, ...], Callable]] = {}
_COMPILED_LOCK = threading.Lock()


def _oddroot(x, p, q):
    mag = np.power(np.abs(x), p / q)
    return mag if p % 2 == 0 else np.sign(x) * mag


def lambdify(exprs: Sequence[Expr]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile expressions into ``f(points) -> (N, len(exprs))``.

    Shared subtrees are emitted once.  Undefined values come out as NaN or
    inf; callers that care must check.
    """
    exprs = tuple(exprs)
    key = tuple(id(e) for e in exprs)
    with _COMPILED_LOCK:
        hit = _COMPILED.get(key)
        if hit is not None and all(a is b for a, b in zip(hit[0], exprs)):
            return hit[1]

    lines = ["def _f(P):", "    N = P.shape[0]"]
    names: dict[int, str] = {}
    for k, node in enumerate(_postorder(exprs)):
        t = f"t{k}"
        if isinstance(node, Const):
            src = repr(float(node.value))
        elif isinstance(node, Var):
            src = f"P[:, {node.index}]"
        elif isinstance(node, Unary):
            a = names[id(node.arg)]
            src = f"-{a}" if node.op == "neg" else f"np.{node.op}({a})"
        elif isinstance(node, Pow):
            a = names[id(node.base)]
            r = node.exponent
            if r.denominator == 1 and r > 0:
                src = f"{a} ** {int(r)}"
            elif r.denominator == 1:
                src = f"{a} ** {float(r)!r}"
            elif r.denominator % 2 == 1:
                src = f"_oddroot({a}, {r.numerator}, {r.denominator})"
            else:
                src = f"np.power({a}, {float(r)!r})"
        else:
            src = f"{names[id(node.left)]} {node.op} {names[id(node.right)]}"
        lines.append(f"    {t} = {src}")
        names[id(node)] = t
    cols = ", ".join(f"np.broadcast_to({names[id(e)]}, (N,))" for e in exprs)
    lines.append(f"    return np.stack([{cols}], axis=-1)" if exprs else "    return np.empty((N, 0))")
    scope = {"np": np, "_oddroot": _oddroot}
    exec("\n".join(lines), scope)
    raw = scope["_f"]

    def f(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        with np.errstate(all="ignore"):
            return raw(pts)

    with _COMPILED_LOCK:
        if len(_COMPILED) > 4096:
            _COMPILED.clear()
        _COMPILED[key] = (exprs, f)
    return f
