"""Tiny arithmetic-expression compiler for problem files.

Grammar (infix, usual precedence, ``^`` is right-associative power):

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := number | name "(" expr ")" | variable | "(" expr ")"

Variables are ``y1..yn`` (state) and ``u1..up`` (control); the only callable
names are ``sin``, ``cos``, ``exp``, ``log``.  Anything else is rejected at
parse time, so a problem file can never smuggle in arbitrary code.  Parsed
expressions are compiled once to a Python code object and evaluated with
numpy scalar functions.
"""

from __future__ import annotations

import re

import numpy as np

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)

# numpy scalar functions: out-of-domain arguments map to inf/nan instead of
# raising, so a diverging rollout is reported as a blow-up by the integrator
_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log}


class ExpressionError(ValueError):
    """Raised when an expression string does not match the grammar."""


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    text = text.rstrip()  # the token pattern cannot match a whitespace tail
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character at position {pos}: {text[pos:]!r}")
        if m.lastgroup is not None:
            tokens.append((m.lastgroup, m.group(m.lastgroup)))
        pos = m.end()
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, tokens, state_dim: int, control_dim: int):
        self.tokens = tokens
        self.i = 0
        self.state_dim = state_dim
        self.control_dim = control_dim

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r}, got {val!r}")

    def parse(self) -> str:
        out = self.expr()
        if self.peek()[0] != "end":
            raise ExpressionError(f"trailing input: {self.peek()[1]!r}")
        return out

    def expr(self) -> str:
        out = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            out = f"({out} {op} {self.term()})"
        return out

    def term(self) -> str:
        out = self.factor()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.take()
            out = f"({out} {op} {self.factor()})"
        return out

    def factor(self) -> str:
        if self.peek() == ("op", "-"):
            self.take()
            return f"(-{self.factor()})"
        return self.power()

    def power(self) -> str:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            return f"({base} ** {self.factor()})"
        return base

    def atom(self) -> str:
        kind, val = self.take()
        if kind == "num":
            return repr(float(val))
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        if kind == "name":
            if val in _FUNCTIONS:
                self.expect_op("(")
                inner = self.expr()
                self.expect_op(")")
                return f"{val}({inner})"
            m = re.fullmatch(r"([yu])([0-9]+)", val)
            if m is None:
                raise ExpressionError(f"unknown name {val!r}")
            idx = int(m.group(2))
            dim = self.state_dim if m.group(1) == "y" else self.control_dim
            if not 1 <= idx <= dim:
                raise ExpressionError(f"variable {val!r} out of range (dim {dim})")
            return f"{m.group(1)}[{idx - 1}]"
        raise ExpressionError(f"unexpected token {val!r}")


def compile_expression(text: str, state_dim: int, control_dim: int):
    """Compile ``text`` to a callable ``(y, u) -> float``.

    Raises :class:`ExpressionError` on any token, name, or index outside the
    grammar.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a non-empty string")
    source = _Parser(_tokenize(text), state_dim, control_dim).parse()
    namespace = {"__builtins__": {}, **_FUNCTIONS}
    evaluate = eval(compile(f"lambda y, u: ({source})", "<expression>", "eval"), namespace)
    evaluate.source = source
    return evaluate
