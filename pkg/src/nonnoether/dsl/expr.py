"""Arithmetic expressions over phase-space coordinates.

Grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative, binds tighter than '-'
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Functions: sin cos exp ln sqrt. Built-in constant: pi.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ..errors import NumericalDomainError

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt")
BUILTIN_CONSTANTS = {"pi": math.pi}


class ExprSyntaxError(ValueError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownIdentifier(ValueError):
    def __init__(self, name, offset=None):
        self.name = name
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"unknown identifier {name!r}{where}")


class DomainError(NumericalDomainError):
    """Evaluation left a function's domain; ``source`` is the failing subexpression."""

    def __init__(self, message, source=None, offset=None):
        self.source = source
        self.offset = offset
        super().__init__(f"{message} in {source!r}" + (f" (offset {offset})" if offset is not None else ""))


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: object
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: object
    pos: int = field(default=0, compare=False)


Expression = (Num, Var, Neg, BinOp, Call)


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))")
_ATOM_START = ("number", "identifier", "'('", "'-'")


def _tokenize(src):
    tokens = []
    i = 0
    while True:
        m = _TOKEN.match(src, i)
        if m is None:
            rest = src[i:]
            if rest.strip() == "":
                break
            off = i + len(rest) - len(rest.lstrip())
            raise ExprSyntaxError(f"unexpected character {src[off]!r}", off, _ATOM_START + ("operator",))
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        i = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, names):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.names = None if names is None else set(names) | set(BUILTIN_CONSTANTS)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text, expected):
        tok = self.peek()
        if tok[1] != text or tok[0] != "op":
            self.fail(tok, expected)
        return self.take()

    def fail(self, tok, expected):
        what = "end of input" if tok[0] == "end" else repr(tok[1])
        raise ExprSyntaxError(f"unexpected {what}", tok[2], expected)

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.fail(tok, ("operator", "end of input"))
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            _, op, pos = self.take()
            node = BinOp(op, node, self.term(), pos)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            _, op, pos = self.take()
            node = BinOp(op, node, self.unary(), pos)
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary(), tok[2])
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            return BinOp("^", base, self.unary(), tok[2])
        return base

    def atom(self):
        kind, text, pos = tok = self.take()
        if kind == "num":
            return Num(float(text), pos)
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifier(text, pos)
                self.take()
                arg = self.expr()
                self.expect(")", ("')'", "operator"))
                return Call(text, arg, pos)
            if text in FUNCTIONS:
                self.fail(self.peek(), ("'('",))
            if self.names is not None and text not in self.names:
                raise UnknownIdentifier(text, pos)
            return Var(text, pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")", ("')'", "operator"))
            return node
        self.i -= 1
        self.fail(tok, _ATOM_START)


def parse_expression(src: str, names: Optional[Sequence[str]] = None):
    """Parse ``src``; with ``names`` given, any other identifier raises :class:`UnknownIdentifier`."""
    return _Parser(src, names).parse()


# --------------------------------------------------------------------------
# printing

_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _level(node):
    if isinstance(node, BinOp):
        return _LEVEL[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def to_source(node) -> str:
    """Minimal-parenthesis text that reparses to an equal AST."""
    if isinstance(node, Num):
        v = node.value
        text = str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
        return f"({text})" if v < 0 or text in ("inf", "nan") else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        return "-" + (f"({inner})" if _level(node.operand) < 3 else inner)
    lv = _LEVEL[node.op]
    left, right = to_source(node.left), to_source(node.right)
    if node.op == "^":
        if _level(node.left) < 5:
            left = f"({left})"
        if _level(node.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _level(node.left) < lv:
        left = f"({left})"
    if _level(node.right) <= lv:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def identifiers(node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, (Neg, Call)):
        return identifiers(node.operand if isinstance(node, Neg) else node.arg)
    if isinstance(node, BinOp):
        return identifiers(node.left) | identifiers(node.right)
    return set()


def is_constant(node) -> bool:
    return not (identifiers(node) - set(BUILTIN_CONSTANTS))


# --------------------------------------------------------------------------
# evaluation


def _domain(msg, node):
    return DomainError(msg, to_source(node), node.pos)


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return float(env[node.name])
        except KeyError:
            raise UnknownIdentifier(node.name, node.pos) from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        a = _eval(node.arg, env)
        if node.func == "ln" and a <= 0:
            raise _domain(f"ln of non-positive value {a!r}", node)
        if node.func == "sqrt" and a < 0:
            raise _domain(f"sqrt of negative value {a!r}", node)
        try:
            out = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "ln": math.log, "sqrt": math.sqrt}[node.func](a)
        except (OverflowError, ValueError) as exc:
            raise _domain(str(exc), node) from None
        return out
    a, b = _eval(node.left, env), _eval(node.right, env)
    if node.op == "+":
        out = a + b
    elif node.op == "-":
        out = a - b
    elif node.op == "*":
        out = a * b
    elif node.op == "/":
        if b == 0:
            raise _domain("division by zero", node)
        out = a / b
    else:
        try:
            out = math.pow(a, b)
        except (OverflowError, ValueError, ZeroDivisionError) as exc:
            raise _domain(f"power {a!r}^{b!r} undefined ({exc})", node) from None
    if not math.isfinite(out) and math.isfinite(a) and math.isfinite(b):
        raise _domain("overflow", node)
    return out


def eval_expression(expr, x=(), coords: Sequence[str] = (), constants: Optional[Mapping[str, float]] = None) -> float:
    """Evaluate ``expr`` (an AST or source text) with ``coords[i]`` bound to ``x[i]`` plus named constants."""
    if isinstance(expr, str):
        expr = parse_expression(expr)
    env = dict(BUILTIN_CONSTANTS)
    env.update(constants or {})
    env.update(zip(coords, (float(v) for v in x)))
    return _eval(expr, env)


# --------------------------------------------------------------------------
# compilation to fast callables


def _pow_scalar(a, b):
    return math.pow(a, b)


def _pow_array(a, b):
    return np.power(a, b)


_SCALAR_NS = {"_sin": math.sin, "_cos": math.cos, "_exp": math.exp, "_ln": math.log,
              "_sqrt": math.sqrt, "_pow": _pow_scalar}
_ARRAY_NS = {"_sin": np.sin, "_cos": np.cos, "_exp": np.exp, "_ln": np.log,
             "_sqrt": np.sqrt, "_pow": _pow_array}


def _codegen(node, index, constants):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        if node.name in index:
            return f"x[{index[node.name]}]"
        return repr(float(constants[node.name]))
    if isinstance(node, Neg):
        return f"(-{_codegen(node.operand, index, constants)})"
    if isinstance(node, Call):
        return f"_{node.func}({_codegen(node.arg, index, constants)})"
    a, b = _codegen(node.left, index, constants), _codegen(node.right, index, constants)
    if node.op == "^":
        return f"_pow({a}, {b})"
    return f"({a} {node.op} {b})"


class CompiledExpressions:
    """A tuple of expressions compiled into one scalar path and one batched numpy path.

    Calling with a point returns a float (one expression) or an array. Any
    failure or non-finite value is re-evaluated by the interpreter so that the
    raised :class:`DomainError` names the offending subexpression.
    """

    def __init__(self, exprs, coords, constants=None, shape=None):
        self.exprs = tuple(exprs)
        self.coords = tuple(coords)
        self.constants = dict(BUILTIN_CONSTANTS)
        self.constants.update(constants or {})
        self.shape = shape
        index = {name: i for i, name in enumerate(self.coords)}
        for e in self.exprs:
            missing = identifiers(e) - set(index) - set(self.constants)
            if missing:
                raise UnknownIdentifier(sorted(missing)[0])
        body = ", ".join(_codegen(e, index, self.constants) for e in self.exprs)
        code = compile(f"lambda x: ({body},)", "<expression>", "eval")
        self._scalar = eval(code, dict(_SCALAR_NS))
        self._array = eval(code, dict(_ARRAY_NS))

    def _diagnose(self, x):
        for e in self.exprs:
            out = eval_expression(e, x, self.coords, self.constants)
            if not math.isfinite(out):
                raise DomainError("non-finite value", to_source(e))
        raise NumericalDomainError(f"expression evaluation failed at {list(x)}")

    def values(self, x):
        xs = x.tolist() if isinstance(x, np.ndarray) else [float(v) for v in x]
        try:
            out = self._scalar(xs)
        except (ValueError, ZeroDivisionError, OverflowError, TypeError):
            self._diagnose(xs)
        if not all(map(math.isfinite, out)):
            self._diagnose(xs)
        return out

    def __call__(self, x):
        out = self.values(x)
        if self.shape is None and len(out) == 1:
            return out[0]
        arr = np.array(out, dtype=float)
        return arr.reshape(self.shape) if self.shape is not None else arr

    def batch(self, points):
        """Evaluate at each row of ``points``; returns shape ``(k,)`` or ``(k,) + shape``."""
        pts = np.asarray(points, dtype=float)
        with np.errstate(all="ignore"):
            cols = self._array(pts.T)
        out = np.empty((pts.shape[0], len(self.exprs)))
        for j, c in enumerate(cols):
            out[:, j] = c
        if not np.all(np.isfinite(out)):
            bad = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
            self._diagnose(pts[bad].tolist())
        if self.shape is None and len(self.exprs) == 1:
            return out[:, 0]
        return out.reshape((pts.shape[0],) + (self.shape or (len(self.exprs),)))
