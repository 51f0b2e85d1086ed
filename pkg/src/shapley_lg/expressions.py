"""Minimal arithmetic expression language for model files.

Supports numbers, named inputs and constants, ``+ - * /``, powers (``^`` or
``**``), unary minus, parentheses and the functions ``sin``, ``cos`` and
``exp``. Compiled expressions evaluate over numpy arrays, one column per
input, so a batch of points is one call. Nothing is ever executed as
Python code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import ExpressionParseError

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}

_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()])"
    r"|(?P<ws>\s+)"
)


@dataclass(frozen=True)
class _Token:
    kind: str          # "num" | "name" | "op" | "end"
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    for line_no, line in enumerate(text.splitlines() or [""], start=1):
        pos = 0
        while pos < len(line):
            match = _TOKEN_RE.match(line, pos)
            if match is None:
                raise ExpressionParseError(
                    f"unexpected character {line[pos]!r}", line_no, pos + 1
                )
            kind = match.lastgroup
            if kind != "ws":
                tokens.append(_Token(kind, match.group(), line_no, pos + 1))
            pos = match.end()
    last_line = max(1, text.count("\n") + 1)
    tokens.append(_Token("end", "", last_line, len(text.splitlines()[-1]) + 1
                         if text.splitlines() else 1))
    return tokens


class _Parser:
    """Recursive descent over the token stream; builds evaluator closures."""

    def __init__(self, tokens: list[_Token], names: frozenset[str]):
        self.tokens = tokens
        self.pos = 0
        self.names = names

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, text: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ExpressionParseError(
                f"expected {text!r}, found {tok.text!r}" if tok.kind != "end"
                else f"expected {text!r}, found end of input",
                tok.line, tok.column,
            )
        self.advance()

    def parse(self) -> Callable:
        fn = self.expression()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionParseError(
                f"unexpected trailing input {tok.text!r}", tok.line, tok.column
            )
        return fn

    def expression(self) -> Callable:
        fn = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.term()
            lhs = fn
            if op == "+":
                fn = lambda env, a=lhs, b=rhs: a(env) + b(env)
            else:
                fn = lambda env, a=lhs, b=rhs: a(env) - b(env)
        return fn

    def term(self) -> Callable:
        fn = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            rhs = self.factor()
            lhs = fn
            if op == "*":
                fn = lambda env, a=lhs, b=rhs: a(env) * b(env)
            else:
                fn = lambda env, a=lhs, b=rhs: a(env) / b(env)
        return fn

    def factor(self) -> Callable:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            inner = self.factor()
            return lambda env, a=inner: -a(env)
        return self.power()

    def power(self) -> Callable:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("^", "**"):
            self.advance()
            exponent = self.factor()
            return lambda env, a=base, b=exponent: a(env) ** b(env)
        return base

    def atom(self) -> Callable:
        tok = self.advance()
        if tok.kind == "num":
            value = float(tok.text)
            return lambda env, v=value: v
        if tok.kind == "name":
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                func = FUNCTIONS.get(tok.text)
                if func is None:
                    raise ExpressionParseError(
                        f"unknown function {tok.text!r} (have: "
                        f"{', '.join(sorted(FUNCTIONS))})",
                        tok.line, tok.column,
                    )
                self.advance()
                arg = self.expression()
                self.expect_op(")")
                return lambda env, f=func, a=arg: f(a(env))
            if tok.text not in self.names:
                raise ExpressionParseError(
                    f"unknown name {tok.text!r}", tok.line, tok.column
                )
            return lambda env, n=tok.text: env[n]
        if tok.kind == "op" and tok.text == "(":
            inner = self.expression()
            self.expect_op(")")
            return inner
        where = f"{tok.text!r}" if tok.kind != "end" else "end of input"
        raise ExpressionParseError(f"expected a value, found {where}",
                                   tok.line, tok.column)


def compile_expression(text: str, names: Iterable[str]) -> Callable:
    """Compile one expression into ``fn(env) -> value``.

    ``names`` lists the identifiers the expression may reference; ``env``
    must map each referenced name to a float or numpy array. Parse and
    name-resolution failures raise :class:`ExpressionParseError` with a
    1-based line and column.
    """
    return _Parser(_tokenize(text), frozenset(names)).parse()
