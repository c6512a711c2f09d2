"""Small arithmetic expression language for user-defined fields.

Grammar (precedence low to high): ``+ -``, ``* /``, unary ``-``, ``^``
(right-associative, binds tightest).  Variables are ``x, y, z``; ``pi`` is
the only named constant; functions are ``sin cos tan exp log sqrt abs``.

Expressions are parsed once into an immutable AST and evaluated with plain
IEEE doubles; evaluation is pure, so trees can be shared freely across
workers.  Evaluation also accepts numpy arrays for the coordinates, which is
how grid sampling and particle stepping stay vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

VARIABLES = ("x", "y", "z")


class ParseError(ValueError):
    """Syntax error carrying the byte offset of the offending token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class DomainError(ArithmeticError):
    """Evaluation left the domain of a sub-expression (log, sqrt, division)."""

    def __init__(self, message: str, subexpr: "Expression"):
        super().__init__(f"{message} in '{to_text(subexpr)}'")
        self.subexpr = subexpr


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # one of VARIABLES


@dataclass(frozen=True)
class Const:
    name: str  # only "pi"


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / ^
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str  # key of FUNCTIONS
    arg: "Expression"


Expression = Union[Num, Var, Const, Neg, BinOp, Call]


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

_OPERATORS = set("+-*/^()")


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    """Return (kind, text, offset) triples; kinds: num, ident, op."""
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPERATORS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ParseError(f"malformed number '{text}'", i) from None
            tokens.append(("num", text, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("ident", source[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character '{ch}'", i)
    tokens.append(("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# recursive-descent parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[tuple[str, str, int]]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, text, offset = self.peek()
        if kind != "op" or text != op:
            if op == ")":
                raise ParseError("unbalanced parenthesis", offset)
            raise ParseError(f"expected '{op}'", offset)
        self.advance()

    def parse_expr(self) -> Expression:
        node = self.parse_term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = BinOp(text, node, self.parse_term())
            else:
                return node

    def parse_term(self) -> Expression:
        node = self.parse_unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = BinOp(text, node, self.parse_unary())
            else:
                return node

    def parse_unary(self) -> Expression:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Expression:
        base = self.parse_atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            # exponent at unary level: 2^-3 is legal, right-associative
            return BinOp("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> Expression:
        kind, text, offset = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if text in VARIABLES:
                return Var(text)
            if text == "pi":
                return Const("pi")
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return Call(text, arg)
            raise ParseError(f"unknown identifier '{text}'", offset)
        if kind == "op" and text == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        if kind == "end":
            raise ParseError("unexpected end of input", offset)
        raise ParseError(f"unexpected token '{text}'", offset)


def parse(source: str) -> Expression:
    """Parse ``source`` into an AST, raising :class:`ParseError` with the
    byte offset on malformed input."""
    parser = _Parser(_tokenize(source))
    node = parser.parse_expr()
    kind, text, offset = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected token '{text}'", offset)
    return node


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate(expr: Expression, point):
    """Evaluate ``expr`` at ``point = (x, y, z)``.

    Coordinates may be scalars or broadcastable numpy arrays; the result has
    the broadcast shape.  Raises :class:`DomainError` on log of a
    non-positive value, sqrt of a negative value, division by zero, or a
    non-finite power.
    """
    x, y, z = point
    env = {"x": x, "y": y, "z": z}
    return _eval(expr, env)


def _eval(expr: Expression, env: dict):
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        return env[expr.name]
    if isinstance(expr, Const):
        return np.pi
    if isinstance(expr, Neg):
        return -_eval(expr.operand, env)
    if isinstance(expr, BinOp):
        left = _eval(expr.left, env)
        right = _eval(expr.right, env)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if expr.op == "/":
            if np.any(right == 0):
                raise DomainError("division by zero", expr)
            return left / right
        # power
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            result = left ** right
        if not np.all(np.isfinite(result)):
            raise DomainError("non-finite power", expr)
        return result
    if isinstance(expr, Call):
        arg = _eval(expr.arg, env)
        if expr.func == "log" and np.any(arg <= 0):
            raise DomainError("log of non-positive value", expr)
        if expr.func == "sqrt" and np.any(arg < 0):
            raise DomainError("sqrt of negative value", expr)
        with np.errstate(over="ignore"):
            result = FUNCTIONS[expr.func](arg)
        if not np.all(np.isfinite(result)):
            raise DomainError(f"non-finite {expr.func}", expr)
        return result
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# pretty printing
# ---------------------------------------------------------------------------

# minimum precedence a node must have to appear unparenthesized in a slot
_ADD, _MUL, _UNARY, _POW, _ATOM = 1, 2, 3, 4, 5


def _precedence(expr: Expression) -> int:
    if isinstance(expr, BinOp):
        if expr.op in "+-":
            return _ADD
        if expr.op in "*/":
            return _MUL
        return _POW
    if isinstance(expr, Neg):
        return _UNARY
    return _ATOM


def _render(expr: Expression, min_prec: int) -> str:
    prec = _precedence(expr)
    if isinstance(expr, Num):
        text = repr(expr.value)
    elif isinstance(expr, Var):
        text = expr.name
    elif isinstance(expr, Const):
        text = expr.name
    elif isinstance(expr, Neg):
        text = "-" + _render(expr.operand, _UNARY)
    elif isinstance(expr, Call):
        text = f"{expr.func}({_render(expr.arg, _ADD)})"
    elif isinstance(expr, BinOp):
        if expr.op in "+-":
            text = _render(expr.left, _ADD) + expr.op + _render(expr.right, _MUL)
        elif expr.op in "*/":
            text = _render(expr.left, _MUL) + expr.op + _render(expr.right, _UNARY)
        else:  # ^: base must be an atom, exponent may be unary
            text = _render(expr.left, _ATOM) + "^" + _render(expr.right, _UNARY)
    else:
        raise TypeError(f"not an expression node: {expr!r}")
    if prec < min_prec:
        return "(" + text + ")"
    return text


def to_text(expr: Expression) -> str:
    """Render the tree so that ``parse(to_text(t))`` is structurally
    identical to ``t``."""
    return _render(expr, _ADD)
