"""Tiny arithmetic expression grammar with analytic differentiation.

User models are declared in config files as closed-form coefficient
expressions; this module parses them and produces vectorized numpy
callables together with exact first and second derivatives, so inline
models get the same analytic jacobians as built-in ones.

Grammar (sup of what is accepted):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('-' | '+') factor | power
    power  := atom (('^' | '**') factor)?
    atom   := NUMBER | 'pi' | 'x' | 'x<i>' | fn '(' expr ')' | '(' expr ')'
    fn     := 'cos' | 'sin' | 'exp' | 'tanh'

Exponents must fold to constants (general f^g needs logarithms the
derivative rules here deliberately avoid).  Variables are x1..xd, with
bare ``x`` accepted as x1.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .model import DiffusionModel, TestFunctionPack

__all__ = [
    "ExpressionError",
    "parse_expression",
    "model_from_expressions",
    "pack_from_expression",
    "ScalarField",
    "VectorField",
    "MatrixField",
]


class ExpressionError(ValueError):
    """Malformed or unsupported coefficient expression."""


# --- AST ------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float

    def eval(self, x: np.ndarray) -> np.ndarray:
        return np.full(x.shape[:-1], self.value)

    def diff(self, i: int) -> "Expr":
        return Const(0.0)


@dataclass(frozen=True)
class Var:
    index: int

    def eval(self, x: np.ndarray) -> np.ndarray:
        if self.index >= x.shape[-1]:
            raise ExpressionError(
                f"variable x{self.index + 1} out of range for dimension {x.shape[-1]}"
            )
        return x[..., self.index]

    def diff(self, i: int) -> "Expr":
        return Const(1.0 if i == self.index else 0.0)


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"

    def eval(self, x):
        return self.left.eval(x) + self.right.eval(x)

    def diff(self, i):
        return _add(self.left.diff(i), self.right.diff(i))


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"

    def eval(self, x):
        return self.left.eval(x) - self.right.eval(x)

    def diff(self, i):
        return _sub(self.left.diff(i), self.right.diff(i))


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"

    def eval(self, x):
        return self.left.eval(x) * self.right.eval(x)

    def diff(self, i):
        return _add(
            _mul(self.left.diff(i), self.right), _mul(self.left, self.right.diff(i))
        )


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"

    def eval(self, x):
        return self.left.eval(x) / self.right.eval(x)

    def diff(self, i):
        num = _sub(
            _mul(self.left.diff(i), self.right), _mul(self.left, self.right.diff(i))
        )
        return _div(num, _pow(self.right, 2.0))


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: float

    def eval(self, x):
        return self.base.eval(x) ** self.exponent

    def diff(self, i):
        return _mul(
            _mul(Const(self.exponent), _pow(self.base, self.exponent - 1.0)),
            self.base.diff(i),
        )


@dataclass(frozen=True)
class Neg:
    arg: "Expr"

    def eval(self, x):
        return -self.arg.eval(x)

    def diff(self, i):
        return _neg(self.arg.diff(i))


_FUNCTIONS = {
    "cos": np.cos,
    "sin": np.sin,
    "exp": np.exp,
    "tanh": np.tanh,
}


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Expr"

    def eval(self, x):
        return _FUNCTIONS[self.name](self.arg.eval(x))

    def diff(self, i):
        inner = self.arg.diff(i)
        if self.name == "cos":
            outer: Expr = _neg(Call("sin", self.arg))
        elif self.name == "sin":
            outer = Call("cos", self.arg)
        elif self.name == "exp":
            outer = Call("exp", self.arg)
        else:  # tanh
            outer = _sub(Const(1.0), _pow(Call("tanh", self.arg), 2.0))
        return _mul(outer, inner)


Expr = Const | Var | Add | Sub | Mul | Div | Pow | Neg | Call


# Smart constructors with constant folding; keeps derivative trees small.


def _const_of(e: Expr) -> float | None:
    return e.value if isinstance(e, Const) else None


def _add(a: Expr, b: Expr) -> Expr:
    ca, cb = _const_of(a), _const_of(b)
    if ca is not None and cb is not None:
        return Const(ca + cb)
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    return Add(a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    ca, cb = _const_of(a), _const_of(b)
    if ca is not None and cb is not None:
        return Const(ca - cb)
    if cb == 0.0:
        return a
    if ca == 0.0:
        return _neg(b)
    return Sub(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    ca, cb = _const_of(a), _const_of(b)
    if ca is not None and cb is not None:
        return Const(ca * cb)
    if ca == 0.0 or cb == 0.0:
        return Const(0.0)
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    return Mul(a, b)


def _div(a: Expr, b: Expr) -> Expr:
    ca, cb = _const_of(a), _const_of(b)
    if cb == 0.0:
        raise ExpressionError("division by the constant 0")
    if ca is not None and cb is not None:
        return Const(ca / cb)
    if ca == 0.0:
        return Const(0.0)
    if cb == 1.0:
        return a
    return Div(a, b)


def _pow(base: Expr, exponent: float) -> Expr:
    if exponent == 0.0:
        return Const(1.0)
    if exponent == 1.0:
        return base
    cb = _const_of(base)
    if cb is not None:
        return Const(cb**exponent)
    return Pow(base, exponent)


def _neg(a: Expr) -> Expr:
    ca = _const_of(a)
    if ca is not None:
        return Const(-ca)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


# --- Parser ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {text[pos]!r} at position {pos}")
        pos = m.end()
        if m.lastgroup is not None:
            tokens.append((m.lastgroup, m.group(m.lastgroup)))
    return tokens


_VAR_RE = re.compile(r"^x(\d*)$")


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.text = text

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise ExpressionError(f"unexpected end of expression in {self.text!r}")
        self.pos += 1
        return tok

    def expect(self, value: str) -> None:
        tok = self.take()
        if tok[1] != value:
            raise ExpressionError(f"expected {value!r} but found {tok[1]!r} in {self.text!r}")

    def parse(self) -> Expr:
        node = self.expr()
        if self.peek() is not None:
            raise ExpressionError(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while (tok := self.peek()) is not None and tok[1] in "+-":
            self.take()
            rhs = self.term()
            node = _add(node, rhs) if tok[1] == "+" else _sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while (tok := self.peek()) is not None and tok[1] in "*/":
            self.take()
            rhs = self.factor()
            node = _mul(node, rhs) if tok[1] == "*" else _div(node, rhs)
        return node

    def factor(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok[1] in "+-":
            self.take()
            inner = self.factor()
            return inner if tok[1] == "+" else _neg(inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok is not None and tok[1] in ("^", "**"):
            self.take()
            exponent = self.factor()
            c = _const_of(exponent)
            if c is None:
                raise ExpressionError(
                    f"exponents must be constants in {self.text!r} (got a variable exponent)"
                )
            return _pow(base, c)
        return base

    def atom(self) -> Expr:
        kind, value = self.take()
        if kind == "number":
            return Const(float(value))
        if kind == "name":
            if value == "pi":
                return Const(math.pi)
            if value in _FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            m = _VAR_RE.match(value)
            if m is not None:
                index = int(m.group(1)) - 1 if m.group(1) else 0
                if index < 0:
                    raise ExpressionError(f"bad variable {value!r}: indices start at x1")
                return Var(index)
            raise ExpressionError(f"unknown name {value!r} in {self.text!r}")
        if value == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected token {value!r} in {self.text!r}")


def parse_expression(text: str) -> Expr:
    """Parse one expression; raises ExpressionError on anything off-grammar."""
    if not text.strip():
        raise ExpressionError("empty expression")
    return _Parser(text).parse()


# --- Vectorized fields ------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    expr: Expr

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.expr.eval(np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class VectorField:
    exprs: tuple[Expr, ...]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.stack([e.eval(x) for e in self.exprs], axis=-1)


@dataclass(frozen=True)
class MatrixField:
    rows: tuple[tuple[Expr, ...], ...]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.stack(
            [np.stack([e.eval(x) for e in row], axis=-1) for row in self.rows], axis=-2
        )


def model_from_expressions(
    d: int,
    r: int,
    b_exprs: list[str],
    sigma_exprs: list[list[str]],
    name: str = "inline",
) -> DiffusionModel:
    """Build a model with analytic jacobians from coefficient expressions."""
    if len(b_exprs) != d:
        raise ExpressionError(f"drift needs {d} expressions, got {len(b_exprs)}")
    if len(sigma_exprs) != d or any(len(row) != r for row in sigma_exprs):
        raise ExpressionError(f"sigma needs a {d} x {r} expression matrix")
    b_ast = tuple(parse_expression(s) for s in b_exprs)
    sigma_ast = tuple(tuple(parse_expression(s) for s in row) for row in sigma_exprs)
    jac_b = MatrixField(tuple(tuple(e.diff(j) for j in range(d)) for e in b_ast))
    jac_sigma_cols = tuple(
        MatrixField(tuple(tuple(sigma_ast[i][j].diff(k) for k in range(d)) for i in range(d)))
        for j in range(r)
    )
    return DiffusionModel(
        d=d,
        r=r,
        b=VectorField(b_ast),
        sigma=MatrixField(sigma_ast),
        jac_b=jac_b,
        jac_sigma_cols=jac_sigma_cols,
        name=name,
    )


def pack_from_expression(d: int, phi_expr: str) -> TestFunctionPack:
    """Build a test-function pack with analytic gradient and Hessian."""
    phi_ast = parse_expression(phi_expr)
    grads = tuple(phi_ast.diff(i) for i in range(d))
    hess = tuple(tuple(g.diff(j) for j in range(d)) for g in grads)
    return TestFunctionPack(
        phi=ScalarField(phi_ast),
        grad_phi=VectorField(grads),
        hess_phi=MatrixField(hess),
    )
