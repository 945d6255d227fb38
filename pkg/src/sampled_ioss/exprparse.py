"""Parser for the small system-definition language.

A source is a list of assignments separated by newlines or ``;``::

    x1' = 0.5*x1 + w1
    y1  = x1

Expressions use ``+ - * / ^``, parentheses, numeric literals, the state symbols
``x1..xn``, the input symbols ``w1..wq`` and the functions ``sin cos exp abs
sqrt`` (one argument) and ``min max`` (two or more).  Precedence, high to low:
``^`` (right associative), unary minus, ``* /``, ``+ -``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line, self.col = line, col


class UnknownSymbolError(ParseError):
    pass


class DimensionError(ValueError):
    pass


_FUNCS1 = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs, "sqrt": np.sqrt}
_FUNCSN = {"min": np.minimum, "max": np.maximum}

_TOKEN = re.compile(
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),=';])"
    r"|(?P<nl>\n)"
    r"|(?P<ws>[ \t\r]+)"
    r"|(?P<comment>\#[^\n]*)"
)


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Tok]:
    toks, pos, line, lstart = [], 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - lstart + 1)
        kind = m.lastgroup
        col = pos - lstart + 1
        if kind == "nl":
            toks.append(Tok("sep", "\n", line, col))
            line, lstart = line + 1, m.end()
        elif kind == "op" and m.group() == ";":
            toks.append(Tok("sep", ";", line, col))
        elif kind not in ("ws", "comment"):
            toks.append(Tok(kind, m.group(), line, col))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - lstart + 1))
    return toks


# AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "w"
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Assign:
    kind: str  # "x" (next state) or "y" (output)
    index: int
    expr: object
    line: int


_VAR = re.compile(r"^([xw])([1-9][0-9]*)$")
_LHS = re.compile(r"^([xy])([1-9][0-9]*)$")


class _Parser:
    def __init__(self, toks):
        self.toks, self.i = toks, 0

    @property
    def cur(self) -> Tok:
        return self.toks[self.i]

    def take(self) -> Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> Tok:
        tok = self.cur
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return self.take()

    def program(self) -> list[Assign]:
        out = []
        while self.cur.kind != "eof":
            if self.cur.kind == "sep":
                self.take()
                continue
            out.append(self.statement())
            if self.cur.kind not in ("sep", "eof"):
                tok = self.cur
                raise ParseError(f"unexpected {tok.text!r} after expression", tok.line, tok.col)
        return out

    def statement(self) -> Assign:
        tok = self.take()
        m = _LHS.match(tok.text) if tok.kind == "name" else None
        if not m:
            raise ParseError(f"expected an assignment to xK' or yK, found {tok.text!r}", tok.line, tok.col)
        kind, idx = m.group(1), int(m.group(2))
        if kind == "x":
            self.expect("'")
        elif self.cur.text == "'":
            raise ParseError("outputs are written yK = ..., without a prime", self.cur.line, self.cur.col)
        self.expect("=")
        return Assign(kind, idx, self.expr(), tok.line)

    # precedence climbing
    def expr(self):
        node = self.term()
        while self.cur.text in ("+", "-"):
            op = self.take()
            node = Bin(op.text, node, self.term(after=op))
        return node

    def term(self, after=None):
        node = self.unary(after)
        while self.cur.text in ("*", "/"):
            op = self.take()
            node = Bin(op.text, node, self.unary(op))
        return node

    def unary(self, after=None):
        if self.cur.text == "-":
            op = self.take()
            return Neg(self.unary(op))
        if self.cur.text == "+":
            op = self.take()
            return self.unary(op)
        return self.power(after)

    def power(self, after=None):
        base = self.primary(after)
        if self.cur.text == "^":
            op = self.take()
            return Bin("^", base, self.unary(op))
        return base

    def primary(self, after=None):
        tok = self.cur
        if tok.kind == "num":
            self.take()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.take()
            if self.cur.text == "(":
                return self.call(tok)
            m = _VAR.match(tok.text)
            if not m:
                raise UnknownSymbolError(f"unknown symbol {tok.text!r}", tok.line, tok.col)
            return Var(m.group(1), int(m.group(2)))
        if tok.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if after is not None:
            raise ParseError(f"dangling operator {after.text!r}", after.line, after.col)
        raise ParseError(f"expected an expression, found {tok.text or 'end of input'!r}", tok.line, tok.col)

    def call(self, name_tok):
        name = name_tok.text
        if name not in _FUNCS1 and name not in _FUNCSN:
            raise UnknownSymbolError(f"unknown function {name!r}", name_tok.line, name_tok.col)
        self.expect("(")
        args = [self.expr()]
        while self.cur.text == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if name in _FUNCS1 and len(args) != 1:
            raise ParseError(f"{name} takes one argument", name_tok.line, name_tok.col)
        if name in _FUNCSN and len(args) < 2:
            raise ParseError(f"{name} takes at least two arguments", name_tok.line, name_tok.col)
        return Call(name, tuple(args))


def parse_program(src: str) -> list[Assign]:
    return _Parser(tokenize(src)).program()


def variables(node) -> set:
    if isinstance(node, Var):
        return {(node.kind, node.index)}
    if isinstance(node, Neg):
        return variables(node.arg)
    if isinstance(node, Bin):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        out = set()
        for a in node.args:
            out |= variables(a)
        return out
    return set()


def compile_expr(node):
    """Turn an AST into ``fn(x, w)`` acting on arrays shaped ``(..., n)`` and ``(..., q)``."""
    if isinstance(node, Num):
        v = node.value
        return lambda x, w: v
    if isinstance(node, Var):
        j = node.index - 1
        if node.kind == "x":
            return lambda x, w: x[..., j]
        return lambda x, w: w[..., j]
    if isinstance(node, Neg):
        a = compile_expr(node.arg)
        return lambda x, w: -a(x, w)
    if isinstance(node, Bin):
        l, r = compile_expr(node.left), compile_expr(node.right)
        op = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}[node.op]
        return lambda x, w: op(l(x, w), r(x, w))
    if isinstance(node, Call):
        fs = [compile_expr(a) for a in node.args]
        if node.name in _FUNCS1:
            fn, a = _FUNCS1[node.name], fs[0]
            return lambda x, w: fn(a(x, w))
        red = _FUNCSN[node.name]

        def call(x, w):
            out = fs[0](x, w)
            for g in fs[1:]:
                out = red(out, g(x, w))
            return out

        return call
    raise TypeError(node)


def to_text(node) -> str:
    """Fully parenthesized source text for an expression."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Bin):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    raise TypeError(node)


def program_to_text(assigns) -> str:
    lines = []
    for a in assigns:
        lhs = f"x{a.index}'" if a.kind == "x" else f"y{a.index}"
        lines.append(f"{lhs} = {to_text(a.expr)}")
    return "\n".join(lines)


def infer_dimensions(assigns):
    """Return ``(n, q, p, state_exprs, output_exprs)`` ordered by index."""
    states, outputs = {}, {}
    for a in assigns:
        table = states if a.kind == "x" else outputs
        if a.index in table:
            raise DimensionError(f"{a.kind}{a.index} defined twice (line {a.line})")
        table[a.index] = a
    if not states:
        raise DimensionError("no state update (x1' = ...) given")
    if not outputs:
        raise DimensionError("no output (y1 = ...) given")
    n, p = max(states), max(outputs)
    for kind, table, size in (("x", states, n), ("y", outputs, p)):
        missing = [k for k in range(1, size + 1) if k not in table]
        if missing:
            raise DimensionError(f"{kind}{size} defined but {kind}{missing[0]} missing")
    q = 0
    for a in assigns:
        for kind, idx in variables(a.expr):
            if kind == "x" and idx > n:
                raise UnknownSymbolError(f"x{idx} used but the state has dimension {n}", a.line, 1)
            if kind == "w":
                if a.kind == "y":
                    raise DimensionError(f"output y{a.index} uses input w{idx}; outputs depend on x only")
                q = max(q, idx)
    return n, q, p, [states[k].expr for k in range(1, n + 1)], [outputs[k].expr for k in range(1, p + 1)]
