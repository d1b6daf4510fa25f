"""Arithmetic expressions for right-hand sides and envelope functions.

Grammar (loosest binding first)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are ``t``, ``x``, ``x1`` .. ``xn`` and the constant ``pi``; functions
are ``sin cos exp ln sqrt abs``. ``-2^2`` is ``-(2^2)`` and ``2^3^2`` is
``2^(3^2)``.

Evaluation is real-valued. A domain violation (``ln`` of a non-positive
number, division by zero, a negative base under a non-integer power, an
overflow) raises :class:`ExprEvalError` naming the offending subexpression
instead of producing a non-finite value. Scalar bindings are evaluated with
:mod:`math`; array bindings with numpy.
"""
from __future__ import annotations

import math
import sys
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import HKFDEError

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "ExprEvalError",
    "parse",
    "evaluate",
    "to_text",
    "compile_rhs",
    "compile_function",
]

MAX_DEPTH = 256


class ExprSyntaxError(HKFDEError, ValueError):
    def __init__(self, message, pos, expected=()):
        self.pos = pos
        self.expected = tuple(sorted(expected))
        exp = f"; expected one of {', '.join(self.expected)}" if self.expected else ""
        super().__init__(f"{message} at position {pos}{exp}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ExprEvalError(HKFDEError, ArithmeticError):
    def __init__(self, message, subexpr=None):
        self.subexpr = subexpr
        where = f" in '{to_text(subexpr)}'" if subexpr is not None else ""
        super().__init__(message + where)


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

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt", "abs")
CONSTANTS = {"pi": math.pi}
_VAR_RE = re.compile(r"^(t|x|x[1-9][0-9]*)$")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str):
    pos = 0
    tokens = []
    n = len(src)
    while pos < n:
        if src[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(
                f"unexpected character {src[pos]!r}", pos, ("number", "name", "operator")
            )
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src: str, variables):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.depth = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.peek()
        if text != value or kind == "end":
            raise ExprSyntaxError(f"unexpected {_describe(self.peek())}", pos, (repr(value),))
        self.i += 1

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", self.peek()[2])

    def expr(self):
        self.enter()
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        self.depth -= 1
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            self.enter()
            node = Neg(self.unary())
            self.depth -= 1
            return node
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            self.enter()
            exponent = self.unary()
            self.depth -= 1
            return BinOp("^", base, exponent)
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in CONSTANTS:
                return Var(text)
            if self.variables is None:
                if _VAR_RE.match(text):
                    return Var(text)
            elif text in self.variables:
                return Var(text)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(
            f"unexpected {_describe((kind, text, pos))}", pos, ("number", "name", "'('", "'-'")
        )


def _describe(tok):
    kind, text, _ = tok
    return "end of input" if kind == "end" else repr(text)


def parse(src: str, variables: Sequence[str] | None = None) -> Expr:
    """Parse ``src`` into an immutable syntax tree.

    ``variables`` restricts the admissible names; by default ``t``, ``x`` and
    ``x1``, ``x2``, ... are accepted.
    """
    if isinstance(src, bytes):
        try:
            src = src.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ExprSyntaxError("source is not valid UTF-8", exc.start) from None
    p = _Parser(src, None if variables is None else frozenset(variables))
    # each nesting level costs about five parser frames
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 6 * MAX_DEPTH + 200))
    try:
        node = p.expr()
    finally:
        sys.setrecursionlimit(limit)
    kind, text, pos = p.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected {_describe(p.peek())}", pos, ("operator", "end of input"))
    if _tree_depth(node) > MAX_DEPTH:
        # long operator chains nest without parentheses
        raise ExprSyntaxError("expression nested too deeply", len(src))
    return node


def _tree_depth(node) -> int:
    best, stack = 0, [(node, 1)]
    while stack:
        n, d = stack.pop()
        best = max(best, d)
        if isinstance(n, BinOp):
            stack += [(n.left, d + 1), (n.right, d + 1)]
        elif isinstance(n, (Neg, Call)):
            stack.append((n.arg if isinstance(n, Call) else n.operand, d + 1))
    return best


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(e: Expr) -> str:
    """Canonical, fully parenthesised text; ``parse(to_text(e)) == e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return set() if e.name in CONSTANTS else {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    return free_variables(e.arg)


# -- scalar evaluation -----------------------------------------------------

def _eval_scalar(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.name in CONSTANTS:
            return CONSTANTS[e.name]
        try:
            return env[e.name]
        except KeyError:
            raise ExprEvalError(f"unbound variable {e.name!r}", e) from None
    if isinstance(e, Neg):
        return -_eval_scalar(e.operand, env)
    if isinstance(e, BinOp):
        a = _eval_scalar(e.left, env)
        b = _eval_scalar(e.right, env)
        op = e.op
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            if b == 0.0:
                raise ExprEvalError("division by zero", e)
            r = a / b
        else:
            if a < 0.0 and b != math.floor(b):
                raise ExprEvalError("negative base with non-integer exponent", e)
            if a == 0.0 and b < 0.0:
                raise ExprEvalError("zero raised to a negative power", e)
            try:
                r = a**b
            except OverflowError:
                raise ExprEvalError("overflow", e) from None
        if not math.isfinite(r):
            raise ExprEvalError("non-finite result", e)
        return r
    a = _eval_scalar(e.arg, env)
    f = e.func
    try:
        if f == "sin":
            return math.sin(a)
        if f == "cos":
            return math.cos(a)
        if f == "exp":
            return math.exp(a)
        if f == "abs":
            return abs(a)
        if f == "ln":
            if a <= 0.0:
                raise ExprEvalError("logarithm of a non-positive number", e)
            return math.log(a)
        if a < 0.0:
            raise ExprEvalError("square root of a negative number", e)
        return math.sqrt(a)
    except OverflowError:
        raise ExprEvalError("overflow", e) from None


# -- array evaluation ------------------------------------------------------

_NP_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs, "ln": np.log, "sqrt": np.sqrt}


def _eval_array(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.name in CONSTANTS:
            return CONSTANTS[e.name]
        try:
            return env[e.name]
        except KeyError:
            raise ExprEvalError(f"unbound variable {e.name!r}", e) from None
    if isinstance(e, Neg):
        return -_eval_array(e.operand, env)
    if isinstance(e, BinOp):
        a = _eval_array(e.left, env)
        b = _eval_array(e.right, env)
        op = e.op
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            if np.any(b == 0.0):
                raise ExprEvalError("division by zero", e)
            r = a / b
        else:
            if np.any((np.asarray(a) < 0.0) & (np.asarray(b) != np.floor(b))):
                raise ExprEvalError("negative base with non-integer exponent", e)
            if np.any((np.asarray(a) == 0.0) & (np.asarray(b) < 0.0)):
                raise ExprEvalError("zero raised to a negative power", e)
            r = np.power(a, b)
        if not np.all(np.isfinite(r)):
            raise ExprEvalError("non-finite result", e)
        return r
    a = _eval_array(e.arg, env)
    if e.func == "ln" and np.any(np.asarray(a) <= 0.0):
        raise ExprEvalError("logarithm of a non-positive number", e)
    if e.func == "sqrt" and np.any(np.asarray(a) < 0.0):
        raise ExprEvalError("square root of a negative number", e)
    r = _NP_FUNCS[e.func](a)
    if not np.all(np.isfinite(r)):
        raise ExprEvalError("non-finite result", e)
    return r


def evaluate(e: Expr, bindings: Mapping[str, object]):
    """Value of ``e`` under ``bindings`` (floats or numpy arrays)."""
    if all(isinstance(v, (int, float)) for v in bindings.values()):
        env = {k: float(v) for k, v in bindings.items()}
        return _eval_scalar(e, env)
    env = {k: np.asarray(v, dtype=float) for k, v in bindings.items()}
    with np.errstate(all="ignore"):
        return np.asarray(_eval_array(e, env), dtype=float)


def compile_function(src: str, variables=("t",)):
    """Callable of the named variables, e.g. an envelope ``g(t)``."""
    e = parse(src, variables=tuple(variables) + tuple(CONSTANTS))

    def f(*args):
        out = evaluate(e, dict(zip(variables, args)))
        shape = np.broadcast(*[np.asarray(a) for a in args]).shape
        return np.broadcast_to(out, shape).astype(float) if shape else out

    f.expr = e
    f.source = src
    return f


def compile_rhs(src: str | Sequence[str]):
    """Vectorised right-hand side ``rhs(t, x)`` from one or more expressions.

    A single expression may use ``x`` (or ``x1``); a list of ``n`` expressions
    defines a system over ``x1 .. xn``, with ``x`` as an alias for ``x1``.
    """
    if isinstance(src, str):
        e = parse(src, variables=("t", "x", "x1") + tuple(CONSTANTS))

        def rhs(t, x):
            t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
            return np.broadcast_to(evaluate(e, {"t": t, "x": x, "x1": x}), t.shape)

        rhs.exprs = (e,)
        return rhs

    srcs = list(src)
    n = len(srcs)
    names = ("t", "x") + tuple(f"x{i + 1}" for i in range(n)) + tuple(CONSTANTS)
    exprs = tuple(parse(s, variables=names) for s in srcs)

    def rhs(t, x):
        x = np.asarray(x, float)
        t = np.broadcast_to(np.asarray(t, float), x.shape[1:])
        env = {"t": t, "x": x[0]}
        env.update({f"x{i + 1}": x[i] for i in range(n)})
        return np.stack([np.broadcast_to(evaluate(e, env), t.shape) for e in exprs])

    rhs.exprs = exprs
    return rhs
