"""Tiny arithmetic-expression parser shared by the polynomial and LHS text forms.

Supports ``+ - * / ^ **``, parentheses, function calls, integer/decimal
literals, and implicit multiplication by juxtaposition (``2n``, ``(n+1)(n+3)``).
Parsing yields a nested-tuple AST that callers fold with their own semantics.
"""
from __future__ import annotations

import re

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?|\.\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^(),]))")
_NORMALISE = str.maketrans({"−": "-", "·": "*", "×": "*", "⋅": "*"})

# only these names take arguments; "n(n+1)" is juxtaposition
FUNCTIONS = frozenset({"sqrt", "log", "ln", "exp", "acosh", "zeta"})


class ExpressionError(ValueError):
    pass


def tokenize(text: str) -> list[tuple[str, str]]:
    text = text.translate(_NORMALISE)
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        if text[pos:].isspace():
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExpressionError(f"unexpected character {text[pos:pos + 10]!r} in {text!r}")
        number, name, op = m.groups()
        if number is not None:
            tokens.append(("num", number))
        elif name is not None:
            tokens.append(("name", name))
        else:
            tokens.append(("op", "^" if op == "**" else op))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", "")

    def take(self, kind=None, value=None):
        tok = self.peek()
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            raise ExpressionError(f"expected {value or kind} in {self.text!r}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        if not self.tokens:
            raise ExpressionError("empty expression")
        node = self.expr()
        if self.peek()[0] != "end":
            raise ExpressionError(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            node = ("add" if op == "+" else "sub", node, self.term())
        return node

    def term(self):
        node = self.unary()
        while True:
            tok = self.peek()
            if tok in (("op", "*"), ("op", "/")):
                self.take()
                node = ("mul" if tok[1] == "*" else "div", node, self.unary())
            elif tok[0] in ("name", "num") or tok == ("op", "("):
                node = ("mul", node, self.power())
            else:
                return node

    def unary(self):
        tok = self.peek()
        if tok == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        if tok == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            return ("pow", base, self.unary())
        return base

    def atom(self):
        kind, value = self.peek()
        if kind == "num":
            self.take()
            return ("num", value)
        if kind == "name":
            self.take()
            if value in FUNCTIONS and self.peek() == ("op", "("):
                self.take()
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.take("op", ")")
                return ("call", value, args)
            return ("name", value)
        if (kind, value) == ("op", "("):
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        raise ExpressionError(f"unexpected {value or 'end of input'!r} in {self.text!r}")


def parse(text: str):
    return _Parser(text).parse()


def fold(node, sem):
    """Evaluate an AST with a semantics object providing num/name/call/add/... ."""
    kind = node[0]
    if kind == "num":
        return sem.num(node[1])
    if kind == "name":
        return sem.name(node[1])
    if kind == "call":
        return sem.call(node[1], [fold(arg, sem) for arg in node[2]])
    if kind == "neg":
        return sem.neg(fold(node[1], sem))
    if kind == "pow":
        return sem.pow(fold(node[1], sem), fold(node[2], sem))
    left, right = fold(node[1], sem), fold(node[2], sem)
    return getattr(sem, kind)(left, right)


def names(node) -> set[str]:
    kind = node[0]
    if kind == "name":
        return {node[1]}
    if kind == "num":
        return set()
    if kind == "call":
        out: set[str] = set()
        for arg in node[2]:
            out |= names(arg)
        return out
    out = set()
    for child in node[1:]:
        out |= names(child)
    return out


_OPS = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


def unparse(node, replace: dict | None = None) -> str:
    """Fully parenthesised text; names found in ``replace`` are substituted."""
    replace = replace or {}
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "name":
        return replace.get(node[1], node[1])
    if kind == "call":
        return f"{node[1]}(" + ", ".join(unparse(a, replace) for a in node[2]) + ")"
    if kind == "neg":
        return f"(-{unparse(node[1], replace)})"
    return f"({unparse(node[1], replace)} {_OPS[kind]} {unparse(node[2], replace)})"
