"""A small expression language for user-defined Hamiltonians ``H(x, p, u)``.

Grammar, with right-associative ``^``::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := unary ('^' factor)?
    unary   := '-' unary | primary
    primary := number | ident | ident '(' args ')' | '(' expr ')'

Variables are ``x1..x<dim>``, ``p1..p<dim>`` and ``u``; ``pi`` is the only
named constant.  Evaluation is vectorised over numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

FUNCTIONS = {
    "sin": 1,
    "cos": 1,
    "atan": 1,
    "abs": 1,
    "sqrt": 1,
    "exp": 1,
    "min": 2,
    "max": 2,
    "pow": 2,
}
CONSTANTS = {"pi": math.pi}
MAX_DEPTH = 200


@dataclass(frozen=True)
class ParseDiagnostic:
    offset: int
    expected: str
    found: str

    def render(self, source: str) -> str:
        prefix = source.encode("utf-8")[: self.offset].decode("utf-8", errors="replace")
        caret = " " * len(prefix) + "^"
        return f"parse error at byte {self.offset}: expected {self.expected}, found {self.found}\n  {source}\n  {caret}"


class ParseError(ValueError):
    def __init__(self, diagnostic: ParseDiagnostic):
        super().__init__(f"at byte {diagnostic.offset}: expected {diagnostic.expected}, found {diagnostic.found}")
        self.diagnostic = diagnostic


class EvalError(ArithmeticError):
    """Domain error raised during evaluation; ``offset`` points at the offending node."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = 0


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = 0


@dataclass(frozen=True)
class Const:
    name: str
    offset: int = 0


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    offset: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    offset: int = 0


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    offset: int = 0


Node = Union[Num, Var, Const, Neg, BinOp, Call]


@dataclass(frozen=True)
class ExprAst:
    root: Node
    dim: int
    source: str

    def __call__(self, x, p, u):
        return evaluate(self, x, p, u)

    def pretty(self) -> str:
        return pretty(self.root)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int  # byte offset


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    byte_pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(ParseDiagnostic(byte_pos, "a token", repr(source[pos])))
        text = m.group()
        if m.lastgroup != "ws":
            kind = m.lastgroup if m.lastgroup != "op" else text
            tokens.append(_Token(kind, text, byte_pos))
        pos = m.end()
        byte_pos += len(text.encode("utf-8"))
    tokens.append(_Token("eof", "", byte_pos))
    return tokens


def _describe(tok: _Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


class _Parser:
    def __init__(self, source: str, dim: int):
        self.source = source
        self.dim = dim
        self.tokens = _tokenize(source)
        self.i = 0
        self.depth = 0
        self.variables = {f"x{k + 1}" for k in range(dim)} | {f"p{k + 1}" for k in range(dim)} | {"u"}

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def fail(self, expected: str):
        raise ParseError(ParseDiagnostic(self.tok.offset, expected, _describe(self.tok)))

    def expect(self, kind: str):
        if self.tok.kind != kind:
            self.fail(repr(kind))
        self.i += 1

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "eof":
            self.fail("operator or end of input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind in ("+", "-"):
            op = self.tok
            self.i += 1
            node = BinOp(op.text, node, self.term(), op.offset)
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.tok.kind in ("*", "/"):
            op = self.tok
            self.i += 1
            node = BinOp(op.text, node, self.factor(), op.offset)
        return node

    def factor(self) -> Node:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            self.fail(f"nesting depth at most {MAX_DEPTH}")
        try:
            base = self.unary()
            if self.tok.kind == "^":
                op = self.tok
                self.i += 1
                return BinOp("^", base, self.factor(), op.offset)
            return base
        finally:
            self.depth -= 1

    def unary(self) -> Node:
        if self.tok.kind == "-":
            op = self.tok
            self.i += 1
            self.depth += 1
            if self.depth > MAX_DEPTH:
                self.fail(f"nesting depth at most {MAX_DEPTH}")
            try:
                return Neg(self.unary(), op.offset)
            finally:
                self.depth -= 1
        return self.primary()

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "number":
            value = float(tok.text)
            if not math.isfinite(value):
                self.fail("a finite number")
            self.i += 1
            return Num(value, tok.offset)
        if tok.kind == "ident":
            self.i += 1
            if self.tok.kind == "(":
                if tok.text not in FUNCTIONS:
                    self.i -= 1
                    self.fail("a known function " + ", ".join(sorted(FUNCTIONS)))
                self.i += 1
                args = [self.expr()]
                while self.tok.kind == ",":
                    self.i += 1
                    args.append(self.expr())
                arity = FUNCTIONS[tok.text]
                if len(args) != arity:
                    raise ParseError(
                        ParseDiagnostic(tok.offset, f"{arity} argument(s) to {tok.text}", f"{len(args)} argument(s)")
                    )
                self.expect(")")
                return Call(tok.text, tuple(args), tok.offset)
            if tok.text in CONSTANTS:
                return Const(tok.text, tok.offset)
            if tok.text in self.variables:
                return Var(tok.text, tok.offset)
            self.i -= 1
            allowed = ", ".join(sorted(self.variables | set(CONSTANTS)))
            self.fail(f"a variable or constant ({allowed})")
        if tok.kind == "(":
            self.i += 1
            self.depth += 1
            if self.depth > MAX_DEPTH:
                self.fail(f"nesting depth at most {MAX_DEPTH}")
            try:
                node = self.expr()
            finally:
                self.depth -= 1
            self.expect(")")
            return node
        self.fail("a number, identifier or '('")


def parse(source: str | bytes, dim: int = 1) -> ExprAst:
    """Parse ``source`` into an :class:`ExprAst`; raises :class:`ParseError`.

    Bytes are decoded as UTF-8; undecodable input is a diagnostic, not a crash.
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(ParseDiagnostic(exc.start, "valid UTF-8", repr(bytes(source[exc.start:exc.start + 1])))) from None
    if not source.strip():
        raise ParseError(ParseDiagnostic(len(source.encode("utf-8")), "an expression", "end of input"))
    return ExprAst(_Parser(source, dim).parse(), dim, source)


def _fmt_number(value: float) -> str:
    return repr(float(value))


def pretty(node: Node) -> str:
    """Fully parenthesised source text that re-parses to the same tree."""
    if isinstance(node, Num):
        return _fmt_number(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{pretty(node.operand)})"
    if isinstance(node, BinOp):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(pretty(a) for a in node.args)})"
    raise TypeError(node)


def strip_offsets(node: Node) -> Node:
    """Copy of the tree with all offsets zeroed, for structural comparison."""
    if isinstance(node, Num):
        return Num(node.value)
    if isinstance(node, Var):
        return Var(node.name)
    if isinstance(node, Const):
        return Const(node.name)
    if isinstance(node, Neg):
        return Neg(strip_offsets(node.operand))
    if isinstance(node, BinOp):
        return BinOp(node.op, strip_offsets(node.left), strip_offsets(node.right))
    return Call(node.func, tuple(strip_offsets(a) for a in node.args))


def _check(value, node: Node, what: str):
    if not np.all(np.isfinite(value)):
        raise EvalError(what, node.offset)
    return value


def _eval(node: Node, env: dict):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = a * b
        elif node.op == "/":
            if np.any(np.asarray(b) == 0):
                raise EvalError("division by zero", node.offset)
            out = a / b
        else:
            out = _power(a, b, node)
        return _check(out, node, "non-finite result")
    if isinstance(node, Call):
        args = [_eval(a, env) for a in node.args]
        f = node.func
        if f == "sqrt":
            if np.any(np.asarray(args[0]) < 0):
                raise EvalError("sqrt of negative", node.offset)
            return np.sqrt(args[0])
        if f == "pow":
            return _check(_power(args[0], args[1], node), node, "non-finite result")
        if f == "min":
            return np.minimum(args[0], args[1])
        if f == "max":
            return np.maximum(args[0], args[1])
        func = {"sin": np.sin, "cos": np.cos, "atan": np.arctan, "abs": np.abs, "exp": np.exp}[f]
        return _check(func(args[0]), node, f"non-finite result of {f}")
    raise TypeError(node)


def _power(a, b, node: Node):
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any((a_arr < 0) & (b_arr != np.round(b_arr))):
        raise EvalError("negative base with non-integer exponent", node.offset)
    if np.any((a_arr == 0) & (b_arr < 0)):
        raise EvalError("zero to a negative power", node.offset)
    with np.errstate(over="ignore"):
        return np.power(a_arr, b_arr) if (a_arr.ndim or b_arr.ndim) else float(a_arr**b_arr)


def evaluate(ast: ExprAst, x, p, u):
    """Evaluate at ``x``/``p`` with trailing axis ``dim`` and ``u`` broadcastable to the rest."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if x.shape[-1:] != (ast.dim,) or p.shape[-1:] != (ast.dim,):
        raise ValueError(f"x and p need a trailing axis of length {ast.dim}")
    env = {"u": np.asarray(u, dtype=float)}
    for k in range(ast.dim):
        env[f"x{k + 1}"] = x[..., k]
        env[f"p{k + 1}"] = p[..., k]
    with np.errstate(all="ignore"):
        out = _eval(ast.root, env)
    shape = np.broadcast_shapes(x.shape[:-1], p.shape[:-1], env["u"].shape)
    out = np.broadcast_to(np.asarray(out, dtype=float), shape)
    if not np.all(np.isfinite(out)):
        raise EvalError("non-finite result", ast.root.offset)
    return out if shape else float(out)
