"""Scalar expressions of named real variables.

Every coefficient function in this package (anchor components, structure
functions, Hamiltonians, section components) is one of these expressions.
The module provides parsing, printing, evaluation, and exact first partial
derivatives via forward-mode dual arithmetic.

Grammar (EBNF)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'

'^' is right-associative and binds tighter than unary minus, so "-x^2"
means -(x^2).  Numbers are decimals with optional fraction and exponent.
Known functions: sin, cos, tan, exp, log, sqrt.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence, Union

__all__ = [
    "Expr",
    "Lit",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Env",
    "ExprError",
    "ParseError",
    "UnknownFunctionError",
    "EvalError",
    "UnboundVariableError",
    "DomainError",
    "parse",
    "to_string",
    "evaluate",
    "evaluate_with_partials",
    "substitute",
    "free_vars",
    "FUNCTIONS",
]


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    """Syntax error; carries the byte offset and the expected-token set."""

    def __init__(self, message: str, offset: int, expected: frozenset[str]):
        super().__init__(f"{message} at offset {offset} (expected {sorted(expected)})")
        self.offset = offset
        self.expected = expected


class UnknownFunctionError(ParseError):
    def __init__(self, name: str, offset: int):
        ParseError.__init__(self, f"unknown function '{name}'", offset, frozenset(FUNCTIONS))
        self.name = name


class EvalError(ExprError):
    """Base class for evaluation errors."""


class UnboundVariableError(EvalError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable '{name}'")
        self.name = name


class DomainError(EvalError):
    """Domain violation; reports the offending subexpression."""

    def __init__(self, reason: str, node: "Expr"):
        super().__init__(f"{reason} in '{to_string(node)}'")
        self.reason = reason
        self.node = node


class _Node:
    """Shared operator sugar so ASTs can be assembled programmatically."""

    __slots__ = ()

    def __add__(self, other):
        return BinOp("+", self, _lift(other))

    def __radd__(self, other):
        return BinOp("+", _lift(other), self)

    def __sub__(self, other):
        return BinOp("-", self, _lift(other))

    def __rsub__(self, other):
        return BinOp("-", _lift(other), self)

    def __mul__(self, other):
        return BinOp("*", self, _lift(other))

    def __rmul__(self, other):
        return BinOp("*", _lift(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, _lift(other))

    def __rtruediv__(self, other):
        return BinOp("/", _lift(other), self)

    def __pow__(self, other):
        return BinOp("^", self, _lift(other))

    def __neg__(self):
        return Neg(self)


@dataclass(frozen=True)
class Lit(_Node):
    value: float


@dataclass(frozen=True)
class Var(_Node):
    name: str


@dataclass(frozen=True)
class Neg(_Node):
    arg: "Expr"


@dataclass(frozen=True)
class BinOp(_Node):
    op: str  # one of + - * / ^
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Call(_Node):
    fn: str
    arg: "Expr"


Expr = Union[Lit, Var, Neg, BinOp, Call]
Env = Mapping[str, float]

# fn -> (value, derivative given (x, fn(x)))
FUNCTIONS = {
    "sin": (math.sin, lambda x, fx: math.cos(x)),
    "cos": (math.cos, lambda x, fx: -math.sin(x)),
    "tan": (math.tan, lambda x, fx: 1.0 + fx * fx),
    "exp": (math.exp, lambda x, fx: fx),
    "log": (math.log, lambda x, fx: 1.0 / x),
    "sqrt": (math.sqrt, lambda x, fx: 0.5 / fx if fx != 0.0 else math.inf),
}


def _lift(obj) -> Expr:
    if isinstance(obj, _Node):
        return obj  # type: ignore[return-value]
    if isinstance(obj, (int, float)):
        v = float(obj)
        return Neg(Lit(-v)) if v < 0 else Lit(v)
    raise TypeError(f"cannot use {obj!r} as an expression")


# ----------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<ident>[a-zA-Z_][a-zA-Z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str) -> Iterator[tuple[str, str, int]]:
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            at = len(src) - len(stripped)
            raise ParseError(f"unexpected character {stripped[0]!r}", at, frozenset({"token"}))
        pos = m.end()
        if m.lastgroup == "num":
            yield "num", m.group("num"), m.start("num")
        elif m.lastgroup == "ident":
            yield "ident", m.group("ident"), m.start("ident")
        else:
            yield m.group("op"), m.group("op"), m.start("op")
    yield "eof", "", len(src)


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = list(_tokenize(src))
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != kind:
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2], frozenset({kind}))
        return self.take()

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "eof":
            raise ParseError(
                f"trailing input {tok[1]!r}", tok[2], frozenset({"+", "-", "*", "/", "^", "eof"})
            )
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        if self.peek()[0] == "-":
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        kind, text, offset = self.peek()
        if kind == "num":
            self.take()
            return Lit(float(text))
        if kind == "ident":
            self.take()
            if self.peek()[0] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunctionError(text, offset)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            return Var(text)
        if kind == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(
            f"unexpected token {text!r}" if text else "unexpected end of input",
            offset,
            frozenset({"number", "identifier", "(", "-"}),
        )


def parse(src: str) -> Expr:
    """Parse a source string into an expression AST."""
    return _Parser(src).parse()


# ---------------------------------------------------------------- printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt(e: Expr, ctx: int) -> str:
    if isinstance(e, Lit):
        v = e.value
        s = repr(int(v)) if v.is_integer() and abs(v) < 1e16 else repr(v)
        return f"({s})" if v < 0 else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({_fmt(e.arg, 0)})"
    if isinstance(e, Neg):
        s = "-" + _fmt(e.arg, _PREC_NEG)
        return f"({s})" if _PREC_NEG < ctx else s
    assert isinstance(e, BinOp)
    if e.op in ("+", "-"):
        prec, s = _PREC_ADD, f"{_fmt(e.lhs, _PREC_ADD)}{e.op}{_fmt(e.rhs, _PREC_ADD + 1)}"
    elif e.op in ("*", "/"):
        prec, s = _PREC_MUL, f"{_fmt(e.lhs, _PREC_MUL)}{e.op}{_fmt(e.rhs, _PREC_MUL + 1)}"
    else:
        # right-associative; exponent at factor level so x^-2 prints bare
        prec, s = _PREC_POW, f"{_fmt(e.lhs, _PREC_ATOM)}^{_fmt(e.rhs, _PREC_NEG)}"
    return f"({s})" if prec < ctx else s


def to_string(e: Expr) -> str:
    """Print an AST so that re-parsing reproduces it node for node."""
    return _fmt(e, 0)


# -------------------------------------------------------------- evaluation


def _const_exponent(e: Expr):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Neg) and isinstance(e.arg, Lit):
        return -e.arg.value
    return None


def _checked_pow(base: float, c: float, node: Expr) -> float:
    if base == 0.0:
        if c < 0.0:
            raise DomainError("0 raised to a negative power", node)
        return 1.0 if c == 0.0 else 0.0
    if base < 0.0 and not float(c).is_integer():
        raise DomainError("negative base with non-integer exponent", node)
    try:
        return math.pow(base, c)
    except OverflowError:
        raise DomainError("overflow in power", node) from None


def evaluate(e: Expr, env: Env) -> float:
    """Evaluate at a point; every free variable must be bound."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Call):
        x = evaluate(e.arg, env)
        if e.fn == "log" and x <= 0.0:
            raise DomainError("log of non-positive value", e)
        if e.fn == "sqrt" and x < 0.0:
            raise DomainError("sqrt of negative value", e)
        try:
            return FUNCTIONS[e.fn][0](x)
        except OverflowError:
            raise DomainError(f"overflow in {e.fn}", e) from None
    assert isinstance(e, BinOp)
    a = evaluate(e.lhs, env)
    if e.op == "^":
        c = _const_exponent(e.rhs)
        if c is not None:
            return _checked_pow(a, c, e)
        b = evaluate(e.rhs, env)
        if a <= 0.0:
            raise DomainError("non-literal exponent requires positive base", e)
        try:
            return math.pow(a, b)
        except OverflowError:
            raise DomainError("overflow in power", e) from None
    b = evaluate(e.rhs, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if b == 0.0:
        raise DomainError("division by zero", e)
    return a / b


def evaluate_with_partials(
    e: Expr, env: Env, wrt: Sequence[str]
) -> tuple[float, list[float]]:
    """Value and exact first partials with respect to ``wrt``.

    One forward pass of dual arithmetic carrying one derivative slot per
    requested variable; partials are exact up to floating-point rounding.
    """
    slot = {name: k for k, name in enumerate(wrt)}
    n = len(wrt)
    return _dual(e, env, slot, n)


def _dual(e: Expr, env: Env, slot: Mapping[str, int], n: int) -> tuple[float, list[float]]:
    if isinstance(e, Lit):
        return e.value, [0.0] * n
    if isinstance(e, Var):
        try:
            v = env[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
        d = [0.0] * n
        k = slot.get(e.name)
        if k is not None:
            d[k] = 1.0
        return v, d
    if isinstance(e, Neg):
        v, d = _dual(e.arg, env, slot, n)
        return -v, [-x for x in d]
    if isinstance(e, Call):
        x, dx = _dual(e.arg, env, slot, n)
        if e.fn == "log" and x <= 0.0:
            raise DomainError("log of non-positive value", e)
        if e.fn == "sqrt" and x < 0.0:
            raise DomainError("sqrt of negative value", e)
        val_fn, der_fn = FUNCTIONS[e.fn]
        try:
            fx = val_fn(x)
        except OverflowError:
            raise DomainError(f"overflow in {e.fn}", e) from None
        g = der_fn(x, fx)
        if not math.isfinite(g) and any(dx):
            raise DomainError(f"infinite derivative of {e.fn}", e)
        return fx, [g * t for t in dx]
    assert isinstance(e, BinOp)
    a, da = _dual(e.lhs, env, slot, n)
    if e.op == "^":
        c = _const_exponent(e.rhs)
        if c is not None:
            v = _checked_pow(a, c, e)
            if c == 0.0:
                return v, [0.0] * n
            g = c * _checked_pow(a, c - 1.0, e)
            return v, [g * t for t in da]
        b, db = _dual(e.rhs, env, slot, n)
        if a <= 0.0:
            raise DomainError("non-literal exponent requires positive base", e)
        try:
            v = math.pow(a, b)
        except OverflowError:
            raise DomainError("overflow in power", e) from None
        lg = math.log(a)
        return v, [v * (db[k] * lg + b * da[k] / a) for k in range(n)]
    b, db = _dual(e.rhs, env, slot, n)
    if e.op == "+":
        return a + b, [da[k] + db[k] for k in range(n)]
    if e.op == "-":
        return a - b, [da[k] - db[k] for k in range(n)]
    if e.op == "*":
        return a * b, [da[k] * b + a * db[k] for k in range(n)]
    if b == 0.0:
        raise DomainError("division by zero", e)
    v = a / b
    return v, [(da[k] - v * db[k]) / b for k in range(n)]


# ------------------------------------------------------------ manipulation


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions, simultaneously.

    Purely structural; no simplification is performed.
    """
    if isinstance(e, Lit):
        return e
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.arg, mapping))
    assert isinstance(e, BinOp)
    return BinOp(e.op, substitute(e.lhs, mapping), substitute(e.rhs, mapping))


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Lit):
        return set()
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_vars(e.arg)
    if isinstance(e, Call):
        return free_vars(e.arg)
    assert isinstance(e, BinOp)
    return free_vars(e.lhs) | free_vars(e.rhs)
