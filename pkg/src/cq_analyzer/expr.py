"""Parsing, evaluation, and exact first derivatives for a small expression language.

Grammar (whitespace insignificant)::

    expr    := term (("+"|"-") term)*
    term    := factor (("*"|"/") factor)*
    factor  := ("-")? power
    power   := atom ("^" power)?          right-associative, binds tighter than unary minus
    atom    := number | identifier | identifier "(" expr ")" | "(" expr ")"

Known functions: sin, cos, tan, exp, log, sqrt.  Numbers are decimals with
an optional exponent.  Non-differentiable primitives (abs, min, max) are
deliberately absent, so every parsed expression is C1 on its natural domain.

Derivatives are computed by one forward-mode dual-number pass per point and
are exact up to floating-point rounding.  Integer powers are expanded into
repeated multiplication, which keeps expressions like ``t^3`` exact; a
non-integer exponent falls back to ``exp(p*log(x))`` and requires a positive
base.  Division by zero, logarithms and roots outside their domain, and
overflow all raise :class:`DomainEvaluationError` instead of propagating
non-finite values.

Expressions are immutable after parsing and evaluation is side-effect free,
so a single :class:`Expression` may be shared across concurrent evaluators.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "ArityMismatchError",
    "DomainEvaluationError",
    "DualNumber",
    "Expression",
    "ExpressionError",
    "ExprSyntaxError",
    "FUNCTIONS",
    "UnknownIdentifierError",
    "finite_diff_gradient",
    "parse",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")


class ExpressionError(ValueError):
    """Base class for every error raised by this module."""


class ExprSyntaxError(ExpressionError):
    """Malformed input text; ``position`` is the 0-based offset of the problem."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (offset {position})")
        self.position = position


class UnknownIdentifierError(ExpressionError):
    """An identifier that is neither a declared variable nor a known function."""

    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier '{name}' (offset {position})")
        self.name = name
        self.position = position


class ArityMismatchError(ExpressionError):
    """A function used without an argument, or a variable applied like a function."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (offset {position})")
        self.position = position


class DomainEvaluationError(ExpressionError):
    """Evaluation left the expression's natural domain (1/0, log(-1), ...)."""

    def __init__(self, message: str, fragment: str):
        super().__init__(f"{message} in '{fragment}'")
        self.fragment = fragment


# ---------------------------------------------------------------------------
# AST nodes.  ``span`` is the (start, end) offset range in the source text and
# is excluded from equality so that parse -> unparse -> parse round-trips
# compare structurally identical.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    span: tuple = field(compare=False, repr=False, default=(0, 0))


@dataclass(frozen=True)
class Var:
    name: str
    index: int
    span: tuple = field(compare=False, repr=False, default=(0, 0))


@dataclass(frozen=True)
class Neg:
    operand: "AstNode"
    span: tuple = field(compare=False, repr=False, default=(0, 0))


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "AstNode"
    right: "AstNode"
    span: tuple = field(compare=False, repr=False, default=(0, 0))


@dataclass(frozen=True)
class IntPow:
    base: "AstNode"
    exponent: int
    span: tuple = field(compare=False, repr=False, default=(0, 0))


@dataclass(frozen=True)
class Pow:
    base: "AstNode"
    exponent: "AstNode"
    span: tuple = field(compare=False, repr=False, default=(0, 0))


@dataclass(frozen=True)
class Call:
    func: str
    arg: "AstNode"
    span: tuple = field(compare=False, repr=False, default=(0, 0))


AstNode = Union[Num, Var, Neg, BinOp, IntPow, Pow, Call]


@dataclass(frozen=True)
class DualNumber:
    """Value plus the vector of partial derivatives at the evaluation point."""

    value: float
    partials: Optional[np.ndarray]


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_OPERATORS = "+-*/^()"


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "ident" | "op" | "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPERATORS:
            tokens.append(_Token("op", ch, i))
            i += 1
            continue
        m = _NUMBER_RE.match(text, i)
        if m:
            tokens.append(_Token("num", m.group(), i))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(_Token("ident", m.group(), i))
            i = m.end()
            continue
        raise ExprSyntaxError(f"unexpected character '{ch}'", i)
    tokens.append(_Token("end", "", len(text)))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent, one token of lookahead)
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.k = 0
        self.var_index = {name: i for i, name in enumerate(variables)}

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def advance(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def accept_op(self, *ops: str) -> Optional[_Token]:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ops:
            return self.advance()
        return None

    def fail(self, message: str) -> ExprSyntaxError:
        return ExprSyntaxError(message, self.peek().pos)

    def parse(self) -> AstNode:
        node = self.expr()
        if self.peek().kind != "end":
            raise self.fail(f"unexpected token '{self.peek().text}'")
        return node

    def expr(self) -> AstNode:
        node = self.term()
        while True:
            tok = self.accept_op("+", "-")
            if tok is None:
                return node
            right = self.term()
            node = BinOp(tok.text, node, right, span=(node.span[0], right.span[1]))

    def term(self) -> AstNode:
        node = self.factor()
        while True:
            tok = self.accept_op("*", "/")
            if tok is None:
                return node
            right = self.factor()
            node = BinOp(tok.text, node, right, span=(node.span[0], right.span[1]))

    def factor(self) -> AstNode:
        tok = self.accept_op("-")
        node = self.power()
        if tok is not None:
            return Neg(node, span=(tok.pos, node.span[1]))
        return node

    def power(self) -> AstNode:
        base = self.atom()
        if self.accept_op("^") is None:
            return base
        exponent = self.power()  # right-associative
        span = (base.span[0], exponent.span[1])
        p = _const_int(exponent)
        if p is not None:
            return IntPow(base, p, span=span)
        return Pow(base, exponent, span=span)

    def atom(self) -> AstNode:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text), span=(tok.pos, tok.pos + len(tok.text)))
        if tok.kind == "ident":
            self.advance()
            if tok.text in self.var_index:
                if self.accept_op("("):
                    raise ArityMismatchError(
                        f"'{tok.text}' is a variable, not a function", tok.pos
                    )
                return Var(tok.text, self.var_index[tok.text],
                           span=(tok.pos, tok.pos + len(tok.text)))
            if tok.text in FUNCTIONS:
                if self.accept_op("(") is None:
                    raise ArityMismatchError(
                        f"function '{tok.text}' requires one parenthesized argument",
                        tok.pos,
                    )
                arg = self.expr()
                closing = self.accept_op(")")
                if closing is None:
                    raise self.fail("expected ')'")
                return Call(tok.text, arg, span=(tok.pos, closing.pos + 1))
            raise UnknownIdentifierError(tok.text, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            closing = self.accept_op(")")
            if closing is None:
                raise self.fail("expected ')'")
            return node
        raise self.fail(f"expected a number, identifier, or '(', got '{tok.text or 'end of input'}'")


def _const_int(node: AstNode) -> Optional[int]:
    """Return the integer value of a constant exponent, or None."""
    if isinstance(node, Num):
        if float(node.value).is_integer() and abs(node.value) < 2**31:
            return int(node.value)
        return None
    if isinstance(node, Neg):
        inner = _const_int(node.operand)
        return None if inner is None else -inner
    return None


# ---------------------------------------------------------------------------
# Evaluation: one dual-number walker serves both plain evaluation
# (partials is None) and gradient evaluation (partials seeded per variable).
# ---------------------------------------------------------------------------


class _Evaluator:
    def __init__(self, source: str, point: Sequence[float], n: int, want_grad: bool):
        self.source = source
        self.point = point
        self.n = n
        self.want_grad = want_grad

    def frag(self, node: AstNode) -> str:
        return self.source[node.span[0]:node.span[1]]

    def run(self, node: AstNode) -> DualNumber:
        d = self.eval(node)
        if not math.isfinite(d.value) or (
            d.partials is not None and not np.all(np.isfinite(d.partials))
        ):
            raise DomainEvaluationError("non-finite result", self.frag(node))
        return d

    def eval(self, node: AstNode) -> DualNumber:
        grad = self.want_grad
        if isinstance(node, Num):
            return DualNumber(node.value, np.zeros(self.n) if grad else None)
        if isinstance(node, Var):
            p = None
            if grad:
                p = np.zeros(self.n)
                p[node.index] = 1.0
            return DualNumber(float(self.point[node.index]), p)
        if isinstance(node, Neg):
            a = self.eval(node.operand)
            return DualNumber(-a.value, None if not grad else -a.partials)
        if isinstance(node, BinOp):
            a = self.eval(node.left)
            b = self.eval(node.right)
            if node.op == "+":
                return DualNumber(a.value + b.value,
                                  None if not grad else a.partials + b.partials)
            if node.op == "-":
                return DualNumber(a.value - b.value,
                                  None if not grad else a.partials - b.partials)
            if node.op == "*":
                return DualNumber(
                    a.value * b.value,
                    None if not grad else a.partials * b.value + a.value * b.partials,
                )
            if b.value == 0.0:
                raise DomainEvaluationError("division by zero", self.frag(node))
            value = a.value / b.value
            p = None
            if grad:
                p = (a.partials * b.value - a.value * b.partials) / (b.value * b.value)
            return DualNumber(value, p)
        if isinstance(node, IntPow):
            base = self.eval(node.base)
            p = abs(node.exponent)
            out = DualNumber(1.0, np.zeros(self.n) if grad else None)
            for _ in range(p):  # repeated multiplication keeps t^3 exact
                out = DualNumber(
                    out.value * base.value,
                    None if not grad else out.partials * base.value + out.value * base.partials,
                )
            if node.exponent < 0:
                if out.value == 0.0:
                    raise DomainEvaluationError(
                        "zero raised to a negative power", self.frag(node)
                    )
                value = 1.0 / out.value
                pp = None if not grad else -out.partials / (out.value * out.value)
                return DualNumber(value, pp)
            return out
        if isinstance(node, Pow):
            base = self.eval(node.base)
            if base.value <= 0.0:
                raise DomainEvaluationError(
                    "non-integer power of a non-positive base", self.frag(node)
                )
            exponent = self.eval(node.exponent)
            # exp(p * log x): the dual chain supplies the derivative.
            log_base = self.call_value("log", base, node)
            product = DualNumber(
                exponent.value * log_base.value,
                None if not grad else exponent.partials * log_base.value
                + exponent.value * log_base.partials,
            )
            return self.call_value("exp", product, node)
        if isinstance(node, Call):
            arg = self.eval(node.arg)
            return self.call_value(node.func, arg, node)
        raise AssertionError(f"unhandled node {node!r}")

    def call_value(self, func: str, arg: DualNumber, node: AstNode) -> DualNumber:
        grad = self.want_grad
        x = arg.value
        if func == "sin":
            return DualNumber(math.sin(x), None if not grad else math.cos(x) * arg.partials)
        if func == "cos":
            return DualNumber(math.cos(x), None if not grad else -math.sin(x) * arg.partials)
        if func == "tan":
            c = math.cos(x)
            return DualNumber(math.tan(x), None if not grad else arg.partials / (c * c))
        if func == "exp":
            try:
                v = math.exp(x)
            except OverflowError:
                raise DomainEvaluationError("overflow in exp", self.frag(node)) from None
            return DualNumber(v, None if not grad else v * arg.partials)
        if func == "log":
            if x <= 0.0:
                raise DomainEvaluationError(
                    "logarithm of a non-positive value", self.frag(node)
                )
            return DualNumber(math.log(x), None if not grad else arg.partials / x)
        if func == "sqrt":
            if x < 0.0:
                raise DomainEvaluationError(
                    "square root of a negative value", self.frag(node)
                )
            if grad and x == 0.0:
                raise DomainEvaluationError(
                    "sqrt is not differentiable at zero", self.frag(node)
                )
            v = math.sqrt(x)
            return DualNumber(v, None if not grad else arg.partials / (2.0 * v))
        raise AssertionError(f"unknown function {func}")


# ---------------------------------------------------------------------------
# Unparsing with minimal parentheses; re-parsing the output reproduces the
# AST structurally (tested).
# ---------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _unparse(node: AstNode, context: int) -> str:
    if isinstance(node, Num):
        text = format(node.value, ".17g")
        return text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = _unparse(node.operand, _PREC_POW)
        out = f"-{inner}"
        return f"({out})" if context > _PREC_NEG else out
    if isinstance(node, BinOp):
        own = _PREC_ADD if node.op in "+-" else _PREC_MUL
        left = _unparse(node.left, own)
        right = _unparse(node.right, own + 1)
        out = f"{left} {node.op} {right}"
        return f"({out})" if context > own else out
    if isinstance(node, (IntPow, Pow)):
        base = _unparse(node.base, _PREC_ATOM)
        if isinstance(node, IntPow):
            exponent = str(node.exponent) if node.exponent >= 0 else f"({node.exponent})"
        else:
            exponent = _unparse(node.exponent, _PREC_ATOM)
        out = f"{base}^{exponent}"
        return f"({out})" if context > _PREC_POW else out
    if isinstance(node, Call):
        return f"{node.func}({_unparse(node.arg, _PREC_ADD)})"
    raise AssertionError(f"unhandled node {node!r}")


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expression:
    """An immutable parsed expression over an ordered list of variables."""

    root: AstNode
    variables: tuple[str, ...]
    source: str = field(compare=False)

    @property
    def dimension(self) -> int:
        return len(self.variables)

    def _check_point(self, point: Sequence[float]) -> None:
        if len(point) != len(self.variables):
            raise ValueError(
                f"point has length {len(point)}, expected {len(self.variables)}"
            )

    def evaluate(self, point: Sequence[float]) -> float:
        """IEEE double value of the expression at ``point``."""
        self._check_point(point)
        ev = _Evaluator(self.source, point, len(self.variables), want_grad=False)
        return ev.run(self.root).value

    def gradient(self, point: Sequence[float]) -> np.ndarray:
        """Vector of partial derivatives, exact up to rounding."""
        return self.value_and_gradient(point)[1]

    def value_and_gradient(self, point: Sequence[float]) -> tuple[float, np.ndarray]:
        """Value and gradient from a single dual-number pass."""
        self._check_point(point)
        ev = _Evaluator(self.source, point, len(self.variables), want_grad=True)
        d = ev.run(self.root)
        return d.value, d.partials

    def unparse(self) -> str:
        return _unparse(self.root, _PREC_ADD)

    def __str__(self) -> str:
        return self.unparse()


def parse(text: str, variables: Sequence[str]) -> Expression:
    """Parse ``text`` over the ordered variable list ``variables``.

    Raises :class:`ExprSyntaxError`, :class:`UnknownIdentifierError`, or
    :class:`ArityMismatchError` on malformed input; every error carries the
    0-based offset of the problem.
    """
    for name in variables:
        if name in FUNCTIONS:
            raise ValueError(f"variable name '{name}' collides with a function name")
    if len(set(variables)) != len(tuple(variables)):
        raise ValueError("duplicate variable names")
    root = _Parser(text, variables).parse()
    return Expression(root=root, variables=tuple(variables), source=text)


def finite_diff_gradient(e: Expression, point: Sequence[float], step: float) -> np.ndarray:
    """Central-difference gradient with per-component step ``step*(1+|x_j|)``.

    Serves as the independent oracle for :meth:`Expression.gradient`; raises
    :class:`DomainEvaluationError` if any probe point leaves the domain.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    x = np.asarray(point, dtype=float)
    e._check_point(x)
    out = np.zeros(len(x))
    for j in range(len(x)):
        h = step * (1.0 + abs(x[j]))
        up = x.copy()
        up[j] += h
        down = x.copy()
        down[j] -= h
        out[j] = (e.evaluate(up) - e.evaluate(down)) / (2.0 * h)
    return out
