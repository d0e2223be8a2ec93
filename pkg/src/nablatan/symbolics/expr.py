"""A small expression language for coordinate formulas.

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = ("-" | "+") , unary | power ;
    power   = atom , [ "^" , unary ] ;          (* right associative *)
    atom    = number | name | func , "(" , expr , ")" | "(" , expr , ")" ;
    func    = "sin" | "cos" | "tan" | "exp" | "log" | "sqrt" | "tanh" | "abs" ;
    name    = letter , { letter | digit | "_" } ;  (* a declared variable, or pi *)
    number  = ( digits , [ "." , [ digits ] ] | "." , digits ) , [ ( "e" | "E" ) , [ "+" | "-" ] , digits ] ;

``pi`` is accepted as a constant unless it is declared as a variable.
Because ``^`` binds tighter than unary minus, ``-t^2`` means ``-(t^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from ..errors import DomainError, ExprSyntaxError, UnknownVariable
from . import jets
from .jets import JetScalar

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "FUNCTIONS",
    "parse_expr",
    "to_source",
    "eval_scalar",
    "to_polynomial",
    "eval_jet",
    "eval_array",
    "free_variables",
    "is_zero",
    "num",
    "add",
    "mul",
]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "abs")

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    pos = 0
    tokens = []
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None:
            bad = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", source, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, variables: Sequence[str]):
        self.source = source
        self.variables = tuple(variables)
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(message, self.source, tok[2])

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] != "op":
            raise self.error(f"expected {value!r}", tok)

    def parse(self) -> Expr:
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise self.error(f"function {text!r} needs an argument list")
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in self.variables:
                return Var(text)
            if text == "pi":
                return Num(math.pi)
            raise UnknownVariable(text, self.variables)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise self.error("unexpected end of expression", tok)
        raise self.error(f"unexpected token {text!r}", tok)


def parse_expr(source: str, variables: Sequence[str]) -> Expr:
    """Parse ``source`` into an expression tree over the declared variables."""
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", "", 0)
    return _Parser(source, variables).parse()


# --- printing -------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    if isinstance(node, Num) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return _PREC["neg"]
    return 5


def _num_source(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"cannot print non-finite literal {value}")
    mag = abs(value)
    text = str(int(mag)) if mag.is_integer() and mag < 1e15 else repr(mag)
    if value < 0 or math.copysign(1.0, value) < 0:
        # a bare negative literal only arises from constructed trees
        return f"(-{text})" if text != "0.0" else "(-0.0)"
    return text


def to_source(node: Expr) -> str:
    """Print ``node`` so that parsing the result gives back the same tree."""
    if isinstance(node, Num):
        return _num_source(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        # the operand of unary minus is parsed at unary level
        if _prec(node.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left = to_source(node.left)
        right = to_source(node.right)
        if node.op == "^":
            if _prec(node.left) <= p:
                left = f"({left})"
            if _prec(node.right) < _PREC["neg"]:
                right = f"({right})"
        else:
            if _prec(node.left) < p:
                left = f"({left})"
            if _prec(node.right) <= p:
                right = f"({right})"
        return f"{left} {node.op} {right}" if p == 1 else f"{left}{node.op}{right}"
    raise TypeError(f"not an expression node: {node!r}")


# --- tree utilities ---------------------------------------------------------------


def free_variables(node: Expr) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, Num):
        return frozenset()
    if isinstance(node, Neg):
        return free_variables(node.operand)
    if isinstance(node, Call):
        return free_variables(node.arg)
    return free_variables(node.left) | free_variables(node.right)


def is_zero(node: Expr) -> bool:
    """Literal zero (no evaluation, no simplification)."""
    return isinstance(node, Num) and node.value == 0.0


def num(value: float) -> Num:
    return Num(float(value))


def add(a: Expr, b: Expr) -> Expr:
    return BinOp("+", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    return BinOp("*", a, b)


# --- scalar evaluation ----------------------------------------------------------------

_SCALAR_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "tanh": np.tanh,
    "abs": np.abs,
}


def _scalar(node: Expr, env: Mapping[str, float]) -> np.float64:
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        try:
            return np.float64(env[node.name])
        except KeyError:
            raise UnknownVariable(node.name, tuple(env)) from None
    if isinstance(node, Neg):
        return -_scalar(node.operand, env)
    if isinstance(node, Call):
        x = _scalar(node.arg, env)
        if node.func == "log":
            if x <= 0.0:
                raise DomainError(f"log of non-positive value {float(x)}")
            return np.log(x)
        if node.func == "sqrt":
            if x < 0.0:
                raise DomainError(f"sqrt of negative value {float(x)}")
            return np.sqrt(x)
        return _SCALAR_FUNCS[node.func](x)
    a = _scalar(node.left, env)
    b = _scalar(node.right, env)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0.0:
            raise DomainError("division by zero")
        return a / b
    if a == 0.0 and b < 0.0:
        raise DomainError("zero raised to a negative power")
    if a < 0.0 and not float(b).is_integer():
        raise DomainError("negative base with non-integer exponent")
    return np.power(a, b)


def eval_scalar(node: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate in IEEE double precision."""
    with np.errstate(all="ignore"):
        return float(_scalar(node, bindings))


def _poly_add(p, q, sign=1.0):
    out = dict(p)
    for k, v in q.items():
        out[k] = out.get(k, 0.0) + sign * v
    return out


def _poly_mul(p, q):
    out: dict = {}
    for ka, va in p.items():
        for kb, vb in q.items():
            k = tuple(i + j for i, j in zip(ka, kb))
            out[k] = out.get(k, 0.0) + va * vb
    return out


def to_polynomial(node: Expr, variables: Sequence[str]) -> dict | None:
    """Expand into ``{exponent tuple: coefficient}``, or None if not a polynomial.

    Accepts sums, products, negation, division by constants and constant
    non-negative integer powers.
    """
    names = list(variables)
    zero = (0,) * len(names)

    def walk(n):
        if isinstance(n, Num):
            return {zero: n.value}
        if isinstance(n, Var):
            if n.name not in names:
                return None
            e = [0] * len(names)
            e[names.index(n.name)] = 1
            return {tuple(e): 1.0}
        if isinstance(n, Neg):
            p = walk(n.operand)
            return None if p is None else {k: -v for k, v in p.items()}
        if isinstance(n, Call):
            return None
        a = walk(n.left)
        if a is None:
            return None
        if n.op in "^/":
            if free_variables(n.right):
                return None
            c = _scalar(n.right, {})
            if n.op == "/":
                return None if c == 0 or not np.isfinite(c) else {k: v / c for k, v in a.items()}
            if c != int(c) or c < 0 or c > 64:
                return None
            out = {zero: 1.0}
            for _ in range(int(c)):
                out = _poly_mul(out, a)
            return out
        b = walk(n.right)
        if b is None:
            return None
        if n.op == "+":
            return _poly_add(a, b)
        if n.op == "-":
            return _poly_add(a, b, -1.0)
        return _poly_mul(a, b)

    with np.errstate(all="ignore"):
        p = walk(node)
    if p is None:
        return None
    return {k: v for k, v in p.items() if v != 0.0}


# --- jet evaluation -------------------------------------------------------------------

_JET_FUNCS = {
    "sin": jets.sin,
    "cos": jets.cos,
    "tan": jets.tan,
    "exp": jets.exp,
    "log": jets.log,
    "sqrt": jets.sqrt,
    "tanh": jets.tanh,
    "abs": jets.absolute,
}


def _array(node: Expr, env: Mapping[str, np.ndarray], order: int, cache: dict | None):
    if cache is not None:
        hit = cache.get(id(node))
        if hit is not None:
            return hit[1]
    if isinstance(node, Num):
        out = jets.constant(node.value, order)
    elif isinstance(node, Var):
        try:
            out = env[node.name]
        except KeyError:
            raise UnknownVariable(node.name, tuple(env)) from None
    elif isinstance(node, Neg):
        out = -_array(node.operand, env, order, cache)
    elif isinstance(node, Call):
        out = _JET_FUNCS[node.func](_array(node.arg, env, order, cache))
    else:
        op = node.op
        if op == "^" and not free_variables(node.right):
            out = jets.power(_array(node.left, env, order, cache), eval_scalar(node.right, {}))
        else:
            a = _array(node.left, env, order, cache)
            b = _array(node.right, env, order, cache)
            if op == "+":
                out = a + b
            elif op == "-":
                out = a - b
            elif op == "*":
                out = jets.mul(a, b)
            elif op == "/":
                out = jets.div(a, b)
            else:
                out = jets.exp(jets.mul(b, jets.log(a)))
                out[..., 0] = np.power(a[..., 0], b[..., 0])
    if cache is not None:
        cache[id(node)] = (node, out)  # keep node alive so its id stays unique
    return out


def eval_array(node: Expr, env: Mapping[str, np.ndarray], order: int, cache: dict | None = None) -> np.ndarray:
    """Evaluate over raw coefficient arrays (last axis = jet coefficients).

    ``cache`` may be shared between calls that use the same ``env`` so that
    common subexpressions are computed once.
    """
    with np.errstate(all="ignore"):
        return _array(node, env, order, cache)


def eval_jet(node: Expr, bindings: Mapping[str, JetScalar], order: int) -> JetScalar:
    """Order-``order`` jet of the composite function."""
    env = {}
    t0 = None
    for name, jet in bindings.items():
        if jet.order != order:
            raise ValueError(f"binding {name!r} has order {jet.order}, expected {order}")
        if t0 is not None and jet.t0 != t0:
            raise ValueError("bindings must share a base point")
        t0 = jet.t0
        env[name] = jet.coeffs
    out = eval_array(node, env, order)
    out = np.broadcast_to(out, (order + 1,))
    return JetScalar(out, 0.0 if t0 is None else t0)
