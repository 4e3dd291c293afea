"""Arithmetic mini-language for branch dynamics and running costs.

Expressions are built from the variables ``x`` (position) and ``a``
(control), numeric literals, unary minus, the binary operators
``+ - * /`` and the functions ``abs``, ``exp`` (one argument) and
``min``, ``max`` (two arguments).

Evaluation accepts scalars or numpy arrays and broadcasts; division by
zero raises :class:`ExprEvalError` instead of producing inf/nan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Expr",
    "ExprError",
    "ExprSyntaxError",
    "ExprEvalError",
    "parse_expr",
    "scalar_fn",
]


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    """Malformed source; carries the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExprEvalError(ExprError):
    """Runtime evaluation failure (division by zero, non-finite input)."""


@dataclass(frozen=True)
class Expr:
    """Parsed expression tree node."""

    kind: str  # "num" | "var" | "neg" | "binop" | "call"
    value: float | str | None = None
    args: tuple = ()

    # precedence used for printing: addition < multiplication < unary
    _PREC = {"+": 1, "-": 1, "*": 2, "/": 2}

    def evaluate(self, x, a):
        """Evaluate at position ``x`` and control ``a`` (scalars or arrays)."""
        if self.kind == "num":
            return self.value
        if self.kind == "var":
            return x if self.value == "x" else a
        if self.kind == "neg":
            return -self.args[0].evaluate(x, a)
        if self.kind == "binop":
            lhs = self.args[0].evaluate(x, a)
            rhs = self.args[1].evaluate(x, a)
            op = self.value
            if op == "+":
                return lhs + rhs
            if op == "-":
                return lhs - rhs
            if op == "*":
                return lhs * rhs
            if np.any(rhs == 0):
                raise ExprEvalError("division by zero")
            return lhs / rhs
        # call
        fn = self.value
        if fn == "abs":
            return np.abs(self.args[0].evaluate(x, a))
        if fn == "exp":
            # large arguments saturate to inf; callers treat non-finite
            # values as out of range, so silence the overflow warning
            with np.errstate(over="ignore"):
                return np.exp(self.args[0].evaluate(x, a))
        lhs = self.args[0].evaluate(x, a)
        rhs = self.args[1].evaluate(x, a)
        return np.minimum(lhs, rhs) if fn == "min" else np.maximum(lhs, rhs)

    def to_source(self):
        """Render back to parseable source; reparsing yields an equal tree."""
        if self.kind == "num":
            return repr(self.value)
        if self.kind == "var":
            return self.value
        if self.kind == "neg":
            inner = self.args[0]
            src = inner.to_source()
            if inner.kind == "binop":
                src = f"({src})"
            return f"-{src}"
        if self.kind == "binop":
            op = self.value
            prec = self._PREC[op]
            lhs, rhs = self.args
            ls = lhs.to_source()
            rs = rhs.to_source()
            if lhs.kind == "binop" and self._PREC[lhs.value] < prec:
                ls = f"({ls})"
            if lhs.kind == "neg":
                ls = f"({ls})"
            # parsing is left-associative, so a right operand of equal (or
            # lower) precedence needs parentheses to keep the tree shape
            if rhs.kind == "binop" and self._PREC[rhs.value] <= prec:
                rs = f"({rs})"
            if rhs.kind == "neg":
                rs = f"({rs})"
            return f"{ls} {op} {rs}"
        return f"{self.value}({', '.join(arg.to_source() for arg in self.args)})"

    def __str__(self):
        return self.to_source()


_FUNCTIONS = {"abs": 1, "exp": 1, "min": 2, "max": 2}
_VARIABLES = ("x", "a")


class _Parser:
    """Recursive-descent parser over a token stream with byte offsets."""

    def __init__(self, source):
        self.source = source
        self.tokens = self._tokenize(source)
        self.pos = 0

    @staticmethod
    def _tokenize(source):
        tokens = []
        i = 0
        n = len(source)
        while i < n:
            c = source[i]
            if c.isspace():
                i += 1
                continue
            if c in "+-*/(),":
                tokens.append((c, c, i))
                i += 1
                continue
            if c.isdigit() or c == ".":
                j = i
                seen_exp = False
                while j < n and (
                    source[j].isdigit()
                    or source[j] == "."
                    or (source[j] in "eE" and not seen_exp and j + 1 < n
                        and (source[j + 1].isdigit() or source[j + 1] in "+-"))
                    or (source[j] in "+-" and j > i and source[j - 1] in "eE")
                ):
                    if source[j] in "eE":
                        seen_exp = True
                    j += 1
                text = source[i:j]
                try:
                    value = float(text)
                except ValueError:
                    raise ExprSyntaxError(f"bad number {text!r}", i) from None
                tokens.append(("num", value, i))
                i = j
                continue
            if c.isalpha() or c == "_":
                j = i
                while j < n and (source[j].isalnum() or source[j] == "_"):
                    j += 1
                tokens.append(("name", source[i:j], i))
                i = j
                continue
            raise ExprSyntaxError(f"unexpected character {c!r}", i)
        tokens.append(("eof", None, n))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.advance()
        if tok[0] != kind:
            raise ExprSyntaxError(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        return tok

    def parse(self):
        expr = self.expression()
        tok = self.peek()
        if tok[0] != "eof":
            raise ExprSyntaxError(f"trailing input {tok[1]!r}", tok[2])
        return expr

    def expression(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            node = Expr("binop", op, (node, self.term()))
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            node = Expr("binop", op, (node, self.factor()))
        return node

    def factor(self):
        if self.peek()[0] == "-":
            self.advance()
            return Expr("neg", None, (self.factor(),))
        return self.primary()

    def primary(self):
        kind, value, offset = self.advance()
        if kind == "num":
            return Expr("num", value)
        if kind == "(":
            node = self.expression()
            self.expect(")")
            return node
        if kind == "name":
            if value in _VARIABLES:
                return Expr("var", value)
            if value in _FUNCTIONS:
                self.expect("(")
                args = [self.expression()]
                while self.peek()[0] == ",":
                    self.advance()
                    args.append(self.expression())
                self.expect(")")
                arity = _FUNCTIONS[value]
                if len(args) != arity:
                    raise ExprSyntaxError(
                        f"{value} takes {arity} argument(s), got {len(args)}", offset
                    )
                return Expr("call", value, tuple(args))
            raise ExprSyntaxError(f"unknown identifier {value!r}", offset)
        raise ExprSyntaxError(f"unexpected token {value!r}", offset)


_SCALAR_NS = {
    "__builtins__": {},
    "abs": abs,
    "min": min,
    "max": max,
    "exp": math.exp,
}


@lru_cache(maxsize=256)
def scalar_fn(expr):
    """Compile ``expr`` to a fast scalar callable (x, a) -> float.

    The printed source is valid Python for the supported grammar, so a
    lambda compiled from it evaluates orders of magnitude faster than the
    tree walk — used in trajectory integration hot loops. Division by
    zero raises :class:`ExprEvalError` like the tree walk.
    """
    fn = eval(f"lambda x, a: ({expr.to_source()})", dict(_SCALAR_NS))

    def call(x, a):
        try:
            return fn(x, a)
        except ZeroDivisionError as exc:
            raise ExprEvalError("division by zero") from exc

    return call


def parse_expr(source):
    """Parse ``source`` into an :class:`Expr`.

    Raises :class:`ExprSyntaxError` with a byte offset on malformed input.
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source).parse()
