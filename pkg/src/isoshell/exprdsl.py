"""Tiny arithmetic expression language for periodic profiles.

Expressions are built from numeric literals, the variables ``u`` and ``v``,
the constant ``pi``, the binary operators ``+ - * / ^``, unary negation and
the functions ``sin``, ``cos`` and ``exp``.  Evaluation is vectorized over
numpy arrays so the same tree serves for pointwise queries and for grid
sampling.

Grammar (``^`` binds tighter than unary minus and is right associative)::

    expr   = term , { ("+" | "-") , term } ;
    term   = unary , { ("*" | "/") , unary } ;
    unary  = "-" , unary | power ;
    power  = atom , [ "^" , unary ] ;
    atom   = number | "u" | "v" | "pi" | func , "(" , expr , ")" | "(" , expr , ")" ;
    func   = "sin" | "cos" | "exp" ;
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
VARIABLES = ("u", "v")
CONSTANTS = {"pi": np.pi}


class ExpressionError(ValueError):
    pass


class ParseError(ExpressionError):
    """Syntax error at a byte offset of the UTF-8 encoded source."""

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        exp = ", ".join(repr(e) for e in sorted(self.expected))
        detail = f" (expected {exp})" if exp else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownIdentifierError(ParseError):
    def __init__(self, name, offset):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset)


class DomainError(ExpressionError):
    """Raised when evaluation leaves the real domain (e.g. division by zero)."""


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Num, Var, Neg, BinOp, Call]


# --------------------------------------------------------------------------
# Tokenizer / parser
# --------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


@dataclass
class _Tok:
    kind: str  # 'num', 'name', 'op', 'end'
    text: str
    offset: int  # byte offset


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(source)

    def boff(i):
        return len(source[:i].encode("utf-8"))

    while True:
        while pos < n and source[pos].isspace():
            pos += 1
        if pos >= n:
            toks.append(_Tok("end", "", boff(n)))
            return toks
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {source[pos]!r}", boff(pos))
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), boff(start)))
        pos = m.end()


class _Parser:
    def __init__(self, source):
        self.toks = _tokenize(source)
        self.i = 0

    @property
    def cur(self):
        return self.toks[self.i]

    def _advance(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def _expect(self, text):
        if self.cur.kind == "op" and self.cur.text == text:
            return self._advance()
        raise ParseError(self._describe(), self.cur.offset, {text})

    def _describe(self):
        if self.cur.kind == "end":
            return "unexpected end of input"
        return f"unexpected token {self.cur.text!r}"

    def parse(self):
        node = self.expr()
        if self.cur.kind != "end":
            raise ParseError(self._describe(), self.cur.offset, {"+", "-", "*", "/", "^", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self.cur.kind == "op" and self.cur.text in "+-":
            op = self._advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.cur.kind == "op" and self.cur.text in "*/":
            op = self._advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.cur.kind == "op" and self.cur.text == "-":
            self._advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.cur.kind == "op" and self.cur.text == "^":
            self._advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.cur
        if tok.kind == "num":
            self._advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self._advance()
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text])
            if tok.text in FUNCTIONS:
                self._expect("(")
                arg = self.expr()
                self._expect(")")
                return Call(tok.text, arg)
            raise UnknownIdentifierError(tok.text, tok.offset)
        if tok.kind == "op" and tok.text == "(":
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        raise ParseError(self._describe(), tok.offset, {"number", "u", "v", "pi", "(", "-", *FUNCTIONS})


def parse(source: str) -> Expression:
    """Parse ``source`` into an expression tree.

    Raises
    ------
    ParseError
        On a syntax error; ``offset`` is the byte offset of the offending
        token and ``expected`` the set of acceptable tokens.
    UnknownIdentifierError
        When a name other than ``u``, ``v``, ``pi`` or a known function is used.
    """
    return _Parser(source).parse()


# --------------------------------------------------------------------------
# Evaluation and printing
# --------------------------------------------------------------------------

def evaluate(expr: Expression, u, v):
    """Evaluate ``expr`` at ``(u, v)``; arrays broadcast elementwise."""
    with np.errstate(all="ignore"):
        out = _eval(expr, np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    out = np.broadcast_to(out, np.broadcast(np.asarray(u), np.asarray(v)).shape)
    if out.ndim == 0:
        return float(out)
    return np.array(out)


def _eval(node, u, v):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        return u if node.name == "u" else v
    if isinstance(node, Neg):
        return -_eval(node.operand, u, v)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, u, v))
    a = _eval(node.left, u, v)
    b = _eval(node.right, u, v)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if np.any(b == 0):
            raise DomainError("division by zero")
        return a / b
    # power
    if np.any((a == 0) & (b < 0)):
        raise DomainError("zero raised to a negative power")
    out = np.power(a, b)
    if np.any(np.isnan(out) & ~np.isnan(a) & ~np.isnan(b)):
        raise DomainError("negative base with non-integer exponent")
    return out


def to_source(expr: Expression) -> str:
    """Print ``expr`` back to source; ``parse(to_source(e))`` evaluates like ``e``."""
    if isinstance(expr, Num):
        text = repr(float(expr.value))
        return f"({text})" if expr.value < 0 or text[0] == "-" else text
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        return f"(-{to_source(expr.operand)})"
    if isinstance(expr, Call):
        return f"{expr.func}({to_source(expr.arg)})"
    return f"({to_source(expr.left)} {expr.op} {to_source(expr.right)})"


def free_variables(expr: Expression) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Num):
        return set()
    if isinstance(expr, Neg):
        return free_variables(expr.operand)
    if isinstance(expr, Call):
        return free_variables(expr.arg)
    return free_variables(expr.left) | free_variables(expr.right)
