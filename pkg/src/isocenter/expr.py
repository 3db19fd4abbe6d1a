"""Arithmetic expressions in the single variable ``x``.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' factor)?
    base   := number | 'x' | '(' expr ')' | func '(' expr ')'
    func   := 'sin' | 'cos' | 'sqrt' | 'exp' | 'log'

``^`` is right-associative and binds tighter than unary minus, so ``-x^2``
means ``-(x^2)`` and ``2^-1`` is allowed.  Compiled expressions evaluate
elementwise on numpy arrays, complex input included.
"""
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ExpressionError

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
}

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def tokenize(source):
    """Return a list of ``(kind, text, position)`` ending with an ``end`` token."""
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None:
            start = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExpressionError(f"unexpected character {source[start]!r}", start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source):
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text):
        kind, value, pos = self.tok
        if value != text or kind == "end":
            found = "end of input" if kind == "end" else repr(value)
            raise ExpressionError(f"expected {text!r}, found {found}", pos)
        self.advance()

    def parse(self):
        node = self.expr()
        kind, value, pos = self.tok
        if kind != "end":
            raise ExpressionError(f"expected operator or end of input, found {value!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.tok[1] in ("+", "-") and self.tok[0] == "op":
            op = self.advance()[1]
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.tok[1] in ("*", "/") and self.tok[0] == "op":
            op = self.advance()[1]
            node = ("bin", op, node, self.factor())
        return node

    def factor(self):
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.advance()
            return ("neg", self.factor())
        node = self.base()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.advance()
            node = ("bin", "^", node, self.factor())
        return node

    def base(self):
        kind, value, pos = self.tok
        if kind == "number":
            self.advance()
            return ("num", float(value))
        if kind == "name":
            if value == "x":
                self.advance()
                return ("x",)
            if value in FUNCTIONS:
                self.advance()
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", value, arg)
            raise ExpressionError(
                f"unknown name {value!r}; expected 'x' or one of {sorted(FUNCTIONS)}", pos
            )
        if kind == "op" and value == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ExpressionError(f"expected number, 'x', function or '(', found {found}", pos)


def parse(source):
    """Parse ``source`` into a nested-tuple syntax tree."""
    return _Parser(source).parse()


_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


def _compile(node):
    tag = node[0]
    if tag == "num":
        value = node[1]
        return lambda x: value + 0.0 * x
    if tag == "x":
        return lambda x: x
    if tag == "neg":
        inner = _compile(node[1])
        return lambda x: -inner(x)
    if tag == "call":
        fn = FUNCTIONS[node[1]]
        inner = _compile(node[2])
        return lambda x: fn(inner(x))
    op = _BINARY[node[1]]
    left, right = _compile(node[2]), _compile(node[3])
    return lambda x: op(left(x), right(x))


@dataclass(frozen=True)
class Expression:
    source: str
    tree: tuple
    fn: Callable

    def __call__(self, x):
        with np.errstate(all="ignore"):
            x = np.asarray(x) if np.iscomplexobj(x) else np.asarray(x, dtype=float)
            return self.fn(x)


def compile_expression(source):
    tree = parse(source)
    return Expression(source, tree, _compile(tree))
