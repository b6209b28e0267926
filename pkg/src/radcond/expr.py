"""A small arithmetic language for analytic data in configuration files.

Grammar (whitespace is insignificant)::

    expr     ::= term (("+" | "-") term)*
    term     ::= unary (("*" | "/") unary)*
    unary    ::= ("+" | "-") unary | power
    power    ::= atom ("^" unary)?            exponent binds to the right
    atom     ::= NUMBER | VARIABLE | CONSTANT
               | FUNCTION "(" expr ("," expr)* ")"
               | "(" expr ")"
    NUMBER   ::= digits ["." digits] [("e" | "E") ["+" | "-"] digits]
    VARIABLE ::= "t" | "x1" | "x2" | "x3" | "b1" | "b2" | "b3"
    CONSTANT ::= "pi"
    FUNCTION ::= "exp" | "cos" | "sin" | "sqrt" | "pow"

``x1..x3`` are the spatial coordinates, ``b1..b3`` the components of the
direction (meaningful only for inflow intensities). ``pow`` takes two
arguments, the others one.

Parsing yields an immutable tree; ``to_source`` prints it back in a canonical
form that parses to an equal tree.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

VARIABLES = ("t", "x1", "x2", "x3", "b1", "b2", "b3")
FUNCTIONS = {"exp": (1, np.exp), "cos": (1, np.cos), "sin": (1, np.sin), "sqrt": (1, np.sqrt), "pow": (2, np.power)}
BINARY = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}
PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


class ExpressionError(ValueError):
    def __init__(self, message: str, source: str = "", position: Optional[int] = None):
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where} in {source!r}" if source else message)
        self.position = position


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Node = Union[Num, Var, Neg, BinOp, Call]


def _tokenize(src: str) -> list:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise ExpressionError(f"unexpected character {src[pos:].lstrip()[:1]!r}", src, pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise ExpressionError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", self.src, tok[2])
        self.i += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError(f"unexpected {tok[1]!r}", self.src, tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("+", "-"):
            self.take()
            operand = self.unary()
            return Neg(operand) if tok[1] == "-" else operand
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.peek()
        if kind == "num":
            self.take()
            return Num(float(text))
        if kind == "name":
            self.take()
            if text == "pi":
                return Var("pi")
            if text in VARIABLES:
                return Var(text)
            if text in FUNCTIONS:
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                arity = FUNCTIONS[text][0]
                if len(args) != arity:
                    raise ExpressionError(f"{text} takes {arity} argument(s), got {len(args)}", self.src, pos)
                return Call(text, tuple(args))
            raise ExpressionError(f"unknown name {text!r}", self.src, pos)
        if text == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        raise ExpressionError(f"unexpected {text or 'end of input'!r}", self.src, pos)


def _to_source(node: Node, parent: int = 0) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        s = "-" + _to_source(node.operand, 3)
        return f"({s})" if parent >= 2 else s
    if isinstance(node, Call):
        return f"{node.func}({', '.join(_to_source(a) for a in node.args)})"
    prec = PRECEDENCE[node.op]
    if node.op == "^":
        left = _to_source(node.left, prec + 1)
        right = _to_source(node.right, 3)  # a unary-level operand re-parses as the exponent
    else:
        left = _to_source(node.left, prec)
        right = _to_source(node.right, prec + 1)
    s = f"{left} {node.op} {right}"
    return f"({s})" if prec < parent else s


def _variables(node: Node, acc: set) -> set:
    if isinstance(node, Var) and node.name != "pi":
        acc.add(node.name)
    elif isinstance(node, Neg):
        _variables(node.operand, acc)
    elif isinstance(node, BinOp):
        _variables(node.left, acc)
        _variables(node.right, acc)
    elif isinstance(node, Call):
        for a in node.args:
            _variables(a, acc)
    return acc


class Expression:
    """A parsed expression; call with ``(t, coords)`` or ``(t, coords, beta)``."""

    def __init__(self, source: Union[str, float, int]):
        if isinstance(source, (int, float)) and not isinstance(source, bool):
            if not math.isfinite(source):
                raise ExpressionError(f"non-finite constant {source}")
            # negative literals are negations in the grammar, keep the tree canonical
            self.tree = Num(float(source)) if source >= 0 else Neg(Num(-float(source)))
        elif isinstance(source, str):
            if not source.strip():
                raise ExpressionError("empty expression")
            self.tree = _Parser(source).parse()
        else:
            raise ExpressionError(f"expression must be a string or number, got {type(source).__name__}")
        self.variables = frozenset(_variables(self.tree, set()))

    def __eq__(self, other):
        return isinstance(other, Expression) and self.tree == other.tree

    def __hash__(self):
        return hash(self.tree)

    def __repr__(self):
        return f"Expression({self.to_source()!r})"

    def to_source(self) -> str:
        return _to_source(self.tree)

    @property
    def is_constant(self) -> bool:
        return not self.variables

    @property
    def uses_direction(self) -> bool:
        return any(v.startswith("b") for v in self.variables)

    def constant_value(self) -> float:
        if not self.is_constant:
            raise ExpressionError("expression is not constant")
        return float(self._eval(self.tree, {}))

    def check_dimension(self, dim: int, allow_direction: bool = False):
        for v in self.variables:
            if v[0] in "xb" and int(v[1]) > dim:
                raise ExpressionError(f"{v} used in a {dim}-D problem", self.to_source())
            if v[0] == "b" and not allow_direction:
                raise ExpressionError(f"direction variable {v} not allowed here", self.to_source())

    def __call__(self, t, coords, beta=None):
        env = {"t": t}
        for a, c in enumerate(coords):
            env[f"x{a + 1}"] = c
        if beta is not None:
            for a, c in enumerate(beta):
                env[f"b{a + 1}"] = float(c)
        shape = np.shape(coords[0]) if coords else ()
        with np.errstate(all="ignore"):
            val = self._eval(self.tree, env)
        return np.broadcast_to(np.asarray(val, dtype=float), shape)

    def _eval(self, node, env):
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Var):
            if node.name == "pi":
                return math.pi
            try:
                return env[node.name]
            except KeyError:
                raise ExpressionError(f"variable {node.name} is not available here", self.to_source()) from None
        if isinstance(node, Neg):
            return -self._eval(node.operand, env)
        if isinstance(node, BinOp):
            return BINARY[node.op](self._eval(node.left, env), self._eval(node.right, env))
        fn = FUNCTIONS[node.func][1]
        return fn(*(self._eval(a, env) for a in node.args))


def parse_expression(source) -> Expression:
    return Expression(source)
