"""Small expression language for the forcing term f(t, x, y).

Grammar (highest precedence last)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('-' | '+') unary | power
    power := atom ('^' ['-' | '+'] INTEGER)?
    atom  := NUMBER | 'pi' | 't' | 'x' | 'y' | FUNC '(' expr ')' | '(' expr ')'
    FUNC  := 'sin' | 'cos' | 'exp' | 'tanh'

Expressions are parsed into immutable dataclass trees that can be evaluated,
printed back to source, differentiated in t, and compiled to kernel callables.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from ._jit import PERTURBATION_SIG, as_kernel_callable, jit_inline
from .errors import EvalError, ParseError

FUNCTIONS = ("sin", "cos", "exp", "tanh")
VARIABLES = ("t", "x", "y")


class Expr:
    __slots__ = ()

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Const(Expr):
    name: str  # only "pi"


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


ZERO = Num(0.0)
ONE = Num(1.0)

# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)
_ATOM_START = frozenset({"number", "(", "-", "+", "pi", *VARIABLES, *FUNCTIONS})


@dataclass
class _Tok:
    kind: str  # "num", "id", "op", "end"
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        m = _TOKEN.match(src, pos)
        if m is None:
            rest = src[pos:]
            stripped = rest.lstrip()
            if not stripped:
                toks.append(_Tok("end", "", _byte_offset(src, len(src))))
                return toks
            bad = len(src) - len(stripped)
            raise ParseError(f"unexpected character {stripped[0]!r}", _byte_offset(src, bad))
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), _byte_offset(src, m.start(kind))))
        pos = m.end()


def _byte_offset(src: str, index: int) -> int:
    return len(src[:index].encode("utf-8"))


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _is_op(self, *ops) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def _expect_op(self, op: str) -> None:
        if not self._is_op(op):
            raise ParseError(f"expected {op!r}", self.tok.offset, {op})
        self.i += 1

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.offset,
                             {"+", "-", "*", "/", "^", "end of input"})
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self._is_op("+", "-"):
            op = self.tok.text
            self.i += 1
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self._is_op("*", "/"):
            op = self.tok.text
            self.i += 1
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> Expr:
        if self._is_op("-"):
            self.i += 1
            return Neg(self.unary())
        if self._is_op("+"):
            self.i += 1
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if not self._is_op("^"):
            return base
        self.i += 1
        sign = 1
        if self._is_op("-", "+"):
            sign = -1 if self.tok.text == "-" else 1
            self.i += 1
        tok = self.tok
        if tok.kind != "num" or not tok.text.isdigit():
            raise ParseError("exponent must be an integer literal", tok.offset, {"integer"})
        self.i += 1
        return Pow(base, sign * int(tok.text))

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            value = float(tok.text)
            if not math.isfinite(value):
                raise ParseError(f"number {tok.text!r} overflows", tok.offset)
            self.i += 1
            return Num(value)
        if tok.kind == "id":
            self.i += 1
            if tok.text == "pi":
                return Const("pi")
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                self._expect_op("(")
                arg = self.expr()
                self._expect_op(")")
                return Call(tok.text, arg)
            raise ParseError(f"unknown name {tok.text!r}", tok.offset, _ATOM_START)
        if self._is_op("("):
            self.i += 1
            node = self.expr()
            self._expect_op(")")
            return node
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ParseError(f"unexpected {what}", tok.offset, _ATOM_START)


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(node: Expr) -> int:
    if isinstance(node, Num) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return 3
    return _PREC.get(type(node), 5)


def to_source(node: Expr) -> str:
    """Source text that parses back to an equivalent tree."""
    match node:
        case Num(value):
            text = repr(float(value))
            return f"({text})" if text.startswith("-") else text
        case Const(name):
            return name
        case Var(name):
            return name
        case Neg(arg):
            inner = to_source(arg)
            return f"-({inner})" if _prec(arg) < 3 else f"-{inner}"
        case Pow(base, n):
            inner = to_source(base)
            if _prec(base) <= 4:
                inner = f"({inner})"
            return f"{inner}^{n}" if n >= 0 else f"{inner}^-{-n}"
        case Call(func, arg):
            return f"{func}({to_source(arg)})"
        case Add() | Sub() | Mul() | Div():
            p = _PREC[type(node)]
            sym = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)]
            left = to_source(node.left)
            right = to_source(node.right)
            if _prec(node.left) < p:
                left = f"({left})"
            if _prec(node.right) <= p:
                right = f"({right})"
            sep = " " if p == 1 else ""
            return f"{left}{sep}{sym}{sep}{right}"
    raise TypeError(f"not an expression node: {node!r}")


def to_python(node: Expr) -> str:
    """Fully parenthesised Python/numba source for the expression."""
    match node:
        case Num(value):
            return repr(float(value))
        case Const():
            return repr(math.pi)
        case Var(name):
            return name
        case Neg(arg):
            return f"(-{to_python(arg)})"
        case Pow(base, n):
            return f"({to_python(base)} ** {n})"
        case Call(func, arg):
            return f"math.{func}({to_python(arg)})"
        case Add(l, r):
            return f"({to_python(l)} + {to_python(r)})"
        case Sub(l, r):
            return f"({to_python(l)} - {to_python(r)})"
        case Mul(l, r):
            return f"({to_python(l)} * {to_python(r)})"
        case Div(l, r):
            return f"({to_python(l)} / {to_python(r)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

_MATH = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "tanh": math.tanh}


def _ev(node: Expr, env: dict) -> float:
    try:
        match node:
            case Num(value):
                out = value
            case Const():
                out = math.pi
            case Var(name):
                out = env[name]
            case Neg(arg):
                out = -_ev(arg, env)
            case Add(l, r):
                out = _ev(l, env) + _ev(r, env)
            case Sub(l, r):
                out = _ev(l, env) - _ev(r, env)
            case Mul(l, r):
                out = _ev(l, env) * _ev(r, env)
            case Div(l, r):
                out = _ev(l, env) / _ev(r, env)
            case Pow(base, n):
                out = _ev(base, env) ** n
            case Call(func, arg):
                out = _MATH[func](_ev(arg, env))
            case _:
                raise TypeError(f"not an expression node: {node!r}")
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise EvalError(f"{type(exc).__name__} evaluating", to_source(node)) from None
    if not math.isfinite(out):
        raise EvalError("non-finite value", to_source(node))
    return float(out)


def evaluate(expr: "PerturbationExpr | Expr", t: float, x: float, y: float) -> float:
    node = expr.ast if isinstance(expr, PerturbationExpr) else expr
    return _ev(node, {"t": float(t), "x": float(x), "y": float(y)})


# ---------------------------------------------------------------------------
# differentiation in t
# ---------------------------------------------------------------------------

def _add(a, b):
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Add(a, b)


def _sub(a, b):
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return Sub(a, b)


def _mul(a, b):
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Mul(a, b)


def _div(a, b):
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return Div(a, b)


def _neg(a):
    if isinstance(a, Num):
        return Num(0.0 - a.value)  # never produce -0.0
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _pow(base, n):
    if n == 0:
        return ONE
    if n == 1:
        return base
    return Pow(base, n)


def _d(node: Expr) -> Expr:
    match node:
        case Num() | Const():
            return ZERO
        case Var(name):
            return ONE if name == "t" else ZERO
        case Neg(arg):
            return _neg(_d(arg))
        case Add(l, r):
            return _add(_d(l), _d(r))
        case Sub(l, r):
            return _sub(_d(l), _d(r))
        case Mul(l, r):
            return _add(_mul(_d(l), r), _mul(l, _d(r)))
        case Div(l, r):
            return _div(_sub(_mul(_d(l), r), _mul(l, _d(r))), _pow(r, 2))
        case Pow(base, n):
            return _mul(_mul(Num(float(n)), _pow(base, n - 1)), _d(base))
        case Call(func, arg):
            du = _d(arg)
            if du == ZERO:
                return ZERO
            outer = {
                "sin": lambda u: Call("cos", u),
                "cos": lambda u: _neg(Call("sin", u)),
                "exp": lambda u: Call("exp", u),
                "tanh": lambda u: _sub(ONE, _pow(Call("tanh", u), 2)),
            }[func](arg)
            return _mul(outer, du)
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# public wrapper
# ---------------------------------------------------------------------------

@lru_cache(maxsize=256)
def _compile(body: str):
    src = f"def _f(t, x, y):\n    return {body}\n"
    ns = {"math": math}
    exec(compile(src, "<perturbation>", "exec"), ns)
    return ns["_f"]


@dataclass(frozen=True)
class PerturbationExpr:
    ast: Expr
    source: str

    def __str__(self):
        return self.source

    def eval(self, t: float, x: float, y: float) -> float:
        return evaluate(self, t, x, y)

    def diff_t(self) -> "PerturbationExpr":
        return diff_t(self)

    @property
    def depends_on_t(self) -> bool:
        return _d(self.ast) != ZERO

    @cached_property
    def python_body(self) -> str:
        return to_python(self.ast)

    @cached_property
    def py_fn(self):
        """Plain Python callable f(t, x, y) (no finiteness checks)."""
        return _compile(self.python_body)

    @cached_property
    def inline_fn(self):
        """f compiled for inlining into other generated kernels."""
        return _inline(self.python_body)

    @cached_property
    def kernel_fn(self):
        """f in the form the integration kernels accept."""
        return _kernel(self.python_body)


@lru_cache(maxsize=256)
def _inline(body: str):
    return jit_inline(_compile(body))


@lru_cache(maxsize=256)
def _kernel(body: str):
    return as_kernel_callable(_compile(body), PERTURBATION_SIG)


def parse(src: str) -> PerturbationExpr:
    if not src or not src.strip():
        raise ParseError("empty expression", 0, _ATOM_START)
    return PerturbationExpr(_Parser(src).parse(), src)


def diff_t(expr: PerturbationExpr) -> PerturbationExpr:
    node = _d(expr.ast)
    return PerturbationExpr(node, to_source(node))


def check_periodicity(expr: PerturbationExpr, sigma: float, n_samples: int = 64,
                      seed: int = 20240917) -> bool:
    """Sampled test that f(t + sigma, x, y) == f(t, x, y) on [0, sigma) x [-2, 2]^2.

    Advisory only: samples where f cannot be evaluated are skipped.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if n_samples < 8:
        raise ValueError("need at least 8 samples")
    rng = np.random.default_rng(seed)
    ts = rng.uniform(0.0, sigma, n_samples)
    xs = rng.uniform(-2.0, 2.0, n_samples)
    ys = rng.uniform(-2.0, 2.0, n_samples)
    for t, x, y in zip(ts, xs, ys):
        try:
            a = expr.eval(t, x, y)
            b = expr.eval(t + sigma, x, y)
        except EvalError:
            continue
        if abs(b - a) > 1e-9 * (1.0 + abs(a)):
            return False
    return True


ZERO_PERTURBATION = parse("0")
