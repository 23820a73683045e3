"""Scalar expressions in one variable ``t`` evaluated on order-3 Taylor jets.

Grammar (``^`` binds tightest and is right-associative, then unary minus,
then ``* /``, then ``+ -``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 't' | 'pi' | 'e' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := sin | cos | tan | exp | log | sqrt | atan | sinh | cosh

There are deliberately no non-smooth primitives (abs, floor, min, ...), so
every expression that evaluates without a domain error is C^infinity there.
Jet coefficients may be floats or numpy arrays, which gives vectorised
trajectory evaluation for free.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .curves import Trajectory

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "atan", "sinh", "cosh")
CONSTANTS = {"pi": math.pi, "e": math.e}


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    """Syntax error at byte ``offset`` of the source."""

    def __init__(self, message: str, offset: int, expected=(), source: str = ""):
        self.message = message
        self.offset = offset
        self.expected = tuple(sorted(expected))
        self.source = source
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class EvalDomainError(ExprError):
    """Evaluation left the real domain of a subexpression."""

    def __init__(self, message: str, node: "Node"):
        self.reason = message
        self.node = node
        super().__init__(f"{message} in '{to_source(node)}'")


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Const, Neg, BinOp, Call]


# ---------------------------------------------------------------------------
# Lexer / parser

_NUMBER = re.compile(rb"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(rb"[A-Za-z_][A-Za-z_0-9]*")


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    data = source.encode("utf-8")
    tokens = []
    i = 0
    while i < len(data):
        ch = data[i:i + 1]
        if ch.isspace():
            i += 1
            continue
        m = _NUMBER.match(data, i)
        if m:
            tokens.append(_Token("num", m.group().decode(), i))
            i = m.end()
            continue
        m = _IDENT.match(data, i)
        if m:
            tokens.append(_Token("ident", m.group().decode(), i))
            i = m.end()
            continue
        if ch in b"+-*/^()":
            tokens.append(_Token("op", ch.decode(), i))
            i += 1
            continue
        char = data[i:].decode(errors="replace")[:1]
        raise ParseError(f"unexpected character {char!r}", i,
                         ("number", "identifier", "operator"), source)
    tokens.append(_Token("end", "", len(data)))
    return tokens


_ATOM_START = ("number", "t", "pi", "e", "function", "(", "-")


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def error(self, message: str, expected) -> ParseError:
        return ParseError(message, self.tok.offset, expected, self.source)

    def describe(self) -> str:
        return "end of input" if self.tok.kind == "end" else f"{self.tok.text!r}"

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.describe()}", ("+", "-", "*", "/", "^", "end of input"))
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return Num(float(tok.text))
        if tok.kind == "ident":
            if tok.text == "t":
                self.pos += 1
                return Var()
            if tok.text in CONSTANTS:
                self.pos += 1
                return Const(tok.text)
            if tok.text in FUNCTIONS:
                self.pos += 1
                if not self.accept("("):
                    raise self.error(f"expected '(' after function {tok.text}, found {self.describe()}", ("(",))
                arg = self.expr()
                if not self.accept(")"):
                    raise self.error(f"expected ')', found {self.describe()}", (")", "+", "-", "*", "/", "^"))
                return Call(tok.text, arg)
            raise ParseError(f"unknown identifier {tok.text!r}", tok.offset,
                             ("t", *CONSTANTS, *FUNCTIONS), self.source)
        if self.accept("("):
            node = self.expr()
            if not self.accept(")"):
                raise self.error(f"expected ')', found {self.describe()}", (")", "+", "-", "*", "/", "^"))
            return node
        raise self.error(f"expected an operand, found {self.describe()}", _ATOM_START)


def parse_expression(source: str) -> Node:
    """Parse ``source`` into an AST; raises :class:`ParseError` with a byte offset."""
    if not source or not source.strip():
        raise ParseError("empty expression", 0, _ATOM_START, source)
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Canonical printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def _wrap(node: Node, needs_parens: bool) -> str:
    s = to_source(node)
    return f"({s})" if needs_parens else s


def to_source(node: Node) -> str:
    """Canonical text for ``node``; ``parse_expression(to_source(n)) == n``.

    Number literals must be finite and non-negative (the parser never builds
    negative literals; ``-2`` is ``Neg(Num(2))``).
    """
    if isinstance(node, Num):
        v = float(node.value)
        return str(int(v)) if v.is_integer() and v < 1e15 else repr(v)
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _prec(node.operand) < _PREC["neg"])
    p = _PREC[node.op]
    if node.op == "^":
        left = _wrap(node.left, _prec(node.left) < _PREC["atom"])
        right = _wrap(node.right, _prec(node.right) < _PREC["neg"])
        return f"{left}^{right}"
    left = _wrap(node.left, _prec(node.left) < p)
    right = _wrap(node.right, _prec(node.right) <= p)
    return f"{left} {node.op} {right}"


# ---------------------------------------------------------------------------
# Jets

@dataclass(frozen=True)
class ScalarJet:
    """``(f, f', f'', f''')`` at a point; entries may be numpy arrays."""

    c0: object
    c1: object = 0.0
    c2: object = 0.0
    c3: object = 0.0

    @classmethod
    def constant(cls, value) -> "ScalarJet":
        return cls(value, 0.0, 0.0, 0.0)

    @classmethod
    def variable(cls, t) -> "ScalarJet":
        return cls(t, np.ones_like(t) if isinstance(t, np.ndarray) else 1.0, 0.0, 0.0)

    def __add__(self, o: "ScalarJet") -> "ScalarJet":
        return ScalarJet(self.c0 + o.c0, self.c1 + o.c1, self.c2 + o.c2, self.c3 + o.c3)

    def __sub__(self, o: "ScalarJet") -> "ScalarJet":
        return ScalarJet(self.c0 - o.c0, self.c1 - o.c1, self.c2 - o.c2, self.c3 - o.c3)

    def __neg__(self) -> "ScalarJet":
        return ScalarJet(-self.c0, -self.c1, -self.c2, -self.c3)

    def __mul__(self, o: "ScalarJet") -> "ScalarJet":
        f, g = self, o
        return ScalarJet(
            f.c0 * g.c0,
            f.c1 * g.c0 + f.c0 * g.c1,
            f.c2 * g.c0 + 2 * f.c1 * g.c1 + f.c0 * g.c2,
            f.c3 * g.c0 + 3 * f.c2 * g.c1 + 3 * f.c1 * g.c2 + f.c0 * g.c3,
        )

    def compose(self, g0, g1, g2, g3) -> "ScalarJet":
        """Jet of ``g(f)`` given ``g`` and its first three derivatives at ``f(t)``."""
        f1, f2, f3 = self.c1, self.c2, self.c3
        return ScalarJet(
            g0,
            g1 * f1,
            g2 * f1 * f1 + g1 * f2,
            g3 * f1 * f1 * f1 + 3 * g2 * f1 * f2 + g1 * f3,
        )

    def is_constant(self) -> bool:
        return all(np.all(np.asarray(c) == 0) for c in (self.c1, self.c2, self.c3))


def _check(cond, message: str, node: Node):
    if not np.all(cond):
        raise EvalDomainError(message, node)


def _int_power(base: ScalarJet, n: int, node: Node) -> ScalarJet:
    x = base.c0
    if n < 0:
        _check(np.asarray(x) != 0, "zero raised to a negative power", node)

    def term(k: int):
        # d^k/dx^k x^n = n (n-1) ... (n-k+1) x^(n-k)
        coef = 1.0
        for j in range(k):
            coef *= n - j
        if coef == 0:
            return 0.0 * x
        return coef * np.power(x, float(n - k)) if isinstance(x, np.ndarray) else coef * x ** (n - k)

    return base.compose(term(0), term(1), term(2), term(3))


def _real_power(base: ScalarJet, p: float, node: Node) -> ScalarJet:
    x = base.c0
    _check(np.asarray(x) > 0, "non-positive base with non-integer exponent", node)
    return base.compose(
        x**p, p * x ** (p - 1), p * (p - 1) * x ** (p - 2), p * (p - 1) * (p - 2) * x ** (p - 3)
    )


def _apply(func: str, f: ScalarJet, node: Node) -> ScalarJet:
    x = f.c0
    if func == "sin":
        s, c = np.sin(x), np.cos(x)
        return f.compose(s, c, -s, -c)
    if func == "cos":
        s, c = np.sin(x), np.cos(x)
        return f.compose(c, -s, -c, s)
    if func == "tan":
        _check(np.cos(x) != 0, "tan at a pole", node)
        y = np.tan(x)
        sec2 = 1 + y * y
        _check(np.isfinite(sec2), "tan at a pole", node)
        return f.compose(y, sec2, 2 * y * sec2, sec2 * (2 + 6 * y * y))
    if func == "exp":
        y = np.exp(x)
        return f.compose(y, y, y, y)
    if func == "log":
        _check(np.asarray(x) > 0, "log of a non-positive value", node)
        return f.compose(np.log(x), 1 / x, -1 / x**2, 2 / x**3)
    if func == "sqrt":
        _check(np.asarray(x) > 0, "sqrt of a non-positive value", node)
        y = np.sqrt(x)
        return f.compose(y, 0.5 / y, -0.25 / (x * y), 0.375 / (x * x * y))
    if func == "atan":
        q = 1 / (1 + x * x)
        return f.compose(np.arctan(x), q, -2 * x * q * q, (6 * x * x - 2) * q**3)
    if func == "sinh":
        s, c = np.sinh(x), np.cosh(x)
        return f.compose(s, c, s, c)
    if func == "cosh":
        s, c = np.sinh(x), np.cosh(x)
        return f.compose(c, s, c, s)
    raise ExprError(f"unknown function {func!r}")


def _eval(node: Node, t) -> ScalarJet:
    if isinstance(node, Num):
        return ScalarJet.constant(node.value)
    if isinstance(node, Const):
        return ScalarJet.constant(CONSTANTS[node.name])
    if isinstance(node, Var):
        return ScalarJet.variable(t)
    if isinstance(node, Neg):
        return -_eval(node.operand, t)
    if isinstance(node, Call):
        return _apply(node.func, _eval(node.arg, t), node)
    left = _eval(node.left, t)
    right = _eval(node.right, t)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        x = right.c0
        _check(np.asarray(x) != 0, "division by zero", node)
        recip = right.compose(1 / x, -1 / x**2, 2 / x**3, -6 / x**4)
        return left * recip
    # "^"
    if right.is_constant():
        p = np.asarray(right.c0)
        if p.ndim == 0:
            p = float(p)
            if p.is_integer():
                return _int_power(left, int(p), node)
            return _real_power(left, p, node)
    _check(np.asarray(left.c0) > 0, "non-positive base with variable exponent", node)
    log_base = _apply("log", left, node)
    return _apply("exp", right * log_base, node)


def eval_scalar_jet(ast: Node, t) -> ScalarJet:
    """Evaluate ``(f, f', f'', f''')`` at ``t`` (float or array)."""
    if isinstance(t, np.ndarray):
        t = t.astype(float)
    else:
        t = float(t)
    with np.errstate(all="ignore"):
        jet = _eval(ast, t)
    cs = [np.asarray(c, dtype=float) for c in (jet.c0, jet.c1, jet.c2, jet.c3)]
    if not all(np.all(np.isfinite(c)) for c in cs):
        raise EvalDomainError("non-finite value", ast)
    if isinstance(t, np.ndarray):
        return ScalarJet(*(np.broadcast_to(c, t.shape).copy() for c in cs))
    return ScalarJet(*(float(c) for c in cs))


def make_expression_trajectory(x_src: str, y_src: str, z_src: str, a: float, b: float,
                               label: str = "") -> Trajectory:
    """Trajectory from three coordinate expressions, jets up to order 3."""
    asts = []
    for axis, src in zip("xyz", (x_src, y_src, z_src)):
        try:
            asts.append(parse_expression(src))
        except ParseError as err:
            raise ParseError(f"{axis}: {err.message}", err.offset, err.expected, src) from None
    asts = tuple(asts)

    def ev(t, order):
        jets = [eval_scalar_jet(n, t) for n in asts]
        coeffs = ("c0", "c1", "c2", "c3")[: order + 1]
        return [np.stack([getattr(j, c) for j in jets], axis=-1) for c in coeffs]

    traj = Trajectory(float(a), float(b), ev, 3,
                      label or f"({x_src}, {y_src}, {z_src})")
    for t in (traj.a, 0.5 * (traj.a + traj.b), traj.b):
        try:
            ev(np.array([t]), 3)
        except EvalDomainError as err:
            raise EvalDomainError(f"at t = {t!r}: {err.reason}", err.node) from None
    return traj
