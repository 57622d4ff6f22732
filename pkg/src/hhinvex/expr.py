"""Small arithmetic expression language: parse, evaluate, differentiate.

Grammar::

    expr   := term (("+"|"-") term)* ;
    term   := factor (("*"|"/") factor)* ;
    factor := unary ("^" factor)? ;
    unary  := "-" unary | atom ;
    atom   := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")" ;

Note that unary minus binds tighter than ``^``, so ``-x^2`` is ``(-x)^2``.

Two evaluators share one AST: :func:`evaluate` walks the tree with the
``math`` module on scalars, and :meth:`Expression.vectorized` compiles the
tree into numpy closures for grid sampling and quadrature.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Const", "Var", "Neg", "BinOp", "Call", "Node", "Expression",
    "ExprError", "ExprSyntaxError", "DomainError", "NonDifferentiableError",
    "parse", "evaluate", "differentiate", "render", "FUNCTIONS",
]


class ExprError(ValueError):
    """Base class for expression-language errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class DomainError(ExprError, ArithmeticError):
    """Raised when an operation's precondition fails during evaluation.

    ``index`` is the flat index of the first offending element when the
    error comes from a vectorized evaluation; ``point`` is filled in by
    callers that know the coordinates.
    """

    def __init__(self, message: str, index: int | None = None, point=None):
        super().__init__(message)
        self.index = index
        self.point = point


class NonDifferentiableError(ExprError):
    pass


# name -> arity; ``sign`` is produced by differentiating ``abs``
FUNCTIONS = {
    "exp": 1, "log": 1, "sin": 1, "cos": 1, "abs": 1, "sqrt": 1,
    "min": 2, "max": 2, "sign": 1,
}


# ---------------------------------------------------------------- AST nodes

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Const, Var, Neg, BinOp, Call]


# ------------------------------------------------------------------ parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}",
                                  _byte_offset(source, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), _byte_offset(source, pos)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(source, len(source))))
    return tokens


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, variables: Sequence[str]):
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = set(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, value, offset = self.take()
        if value != text or kind == "end":
            what = "end of input" if kind == "end" else repr(value)
            raise ExprSyntaxError(f"expected {text!r}, found {what}", offset)

    def parse(self) -> Node:
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {value!r}", offset)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        base = self.unary()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def unary(self) -> Node:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Node:
        kind, value, offset = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "ident":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if value not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {value!r}", offset)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[value]:
                    raise ExprSyntaxError(
                        f"{value} takes {FUNCTIONS[value]} argument(s), "
                        f"got {len(args)}", offset)
                return Call(value, tuple(args))
            if value in FUNCTIONS:
                raise ExprSyntaxError(f"function {value!r} needs arguments", offset)
            if value not in self.variables:
                raise ExprSyntaxError(f"unknown identifier {value!r}", offset)
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"unexpected {what}", offset)


def parse(source: str, variables: Sequence[str]) -> "Expression":
    """Parse ``source`` into an :class:`Expression` over ``variables``."""
    variables = tuple(variables)
    if not variables:
        raise ValueError("at least one variable must be declared")
    if len(set(variables)) != len(variables):
        raise ValueError(f"duplicate variable names in {variables}")
    for name in variables:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name) or name in FUNCTIONS:
            raise ValueError(f"invalid variable name {name!r}")
    root = _Parser(source, variables).parse()
    return Expression(root, variables)


# ---------------------------------------------------------------- rendering

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 4
    if isinstance(node, Const) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return 0
    return 5


def _wrap(node: Node, min_prec: int) -> str:
    text = render(node)
    return f"({text})" if _prec(node) < min_prec else text


def render(node: Union[Node, "Expression"]) -> str:
    """Render an AST back to source text that re-parses to the same tree."""
    if isinstance(node, Expression):
        node = node.root
    if isinstance(node, Const):
        v = node.value
        if v.is_integer() and abs(v) < 1e15 and not (v == 0 and math.copysign(1.0, v) < 0):
            return str(int(v))
        return repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.arg, 4)
    if isinstance(node, BinOp):
        if node.op == "^":
            return f"{_wrap(node.left, 4)}^{_wrap(node.right, 3)}"
        lp = _PREC[node.op]
        return f"{_wrap(node.left, lp)}{node.op}{_wrap(node.right, lp + 1)}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(render(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------- scalar evaluation

def _int_power(x, n: int):
    # exponentiation by repeated squaring; n >= 0
    result = 1.0 if not isinstance(x, np.ndarray) else np.ones_like(x)
    base = x
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


_MAX_INT_EXPONENT = 1 << 20


def _scalar_pow(x: float, y: float) -> float:
    if float(y).is_integer() and abs(y) <= _MAX_INT_EXPONENT:
        n = int(y)
        if n < 0:
            if x == 0.0:
                raise DomainError("0 raised to a negative power")
            return 1.0 / _int_power(x, -n)
        return _int_power(x, n)
    if not x > 0.0:
        raise DomainError(f"non-integer power of non-positive base {x!r}")
    return math.pow(x, y)


def _scalar_eval(node: Node, env: Mapping[str, float]) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_scalar_eval(node.arg, env)
    if isinstance(node, BinOp):
        a = _scalar_eval(node.left, env)
        b = _scalar_eval(node.right, env)
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
        return _scalar_pow(a, b)
    if isinstance(node, Call):
        args = [_scalar_eval(a, env) for a in node.args]
        name = node.name
        x = args[0]
        if name == "exp":
            try:
                return math.exp(x)
            except OverflowError:
                raise DomainError(f"exp overflow at {x!r}") from None
        if name == "log":
            if not x > 0.0:
                raise DomainError(f"log of non-positive value {x!r}")
            return math.log(x)
        if name == "sqrt":
            if x < 0.0:
                raise DomainError(f"sqrt of negative value {x!r}")
            return math.sqrt(x)
        if name == "sin":
            return math.sin(x)
        if name == "cos":
            return math.cos(x)
        if name == "abs":
            return abs(x)
        if name == "sign":
            return float((x > 0) - (x < 0))
        if name == "min":
            return min(args[0], args[1])
        if name == "max":
            return max(args[0], args[1])
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(e: "Expression", point: Mapping[str, float]) -> float:
    """Evaluate ``e`` at ``point`` in double precision.

    Raises :class:`DomainError` when log/sqrt/division/power preconditions
    fail or the result is not finite, and ``KeyError`` for unbound variables.
    """
    env = {}
    for name in e.variables:
        if name not in point:
            raise KeyError(f"unbound variable {name!r}")
        env[name] = float(point[name])
    try:
        value = _scalar_eval(e.root, env)
    except OverflowError:
        raise DomainError("floating point overflow") from None
    if not math.isfinite(value):
        raise DomainError(f"non-finite result {value!r}")
    return value


# ------------------------------------------------------ vectorized compiling

def _first_index(mask) -> int:
    return int(np.argmax(np.ravel(mask)))


def _vec_pow(a, b):
    if np.ndim(b) == 0:
        y = float(b)
        if y.is_integer() and abs(y) <= _MAX_INT_EXPONENT:
            n = int(y)
            if n < 0:
                if np.any(a == 0.0):
                    raise DomainError("0 raised to a negative power", _first_index(a == 0.0))
                return 1.0 / _int_power(a, -n)
            return _int_power(np.asarray(a, dtype=float), n)
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    integral = (np.floor(b) == b) & (np.abs(b) <= _MAX_INT_EXPONENT)
    bad = (~integral & ~(a > 0.0)) | (integral & (b < 0) & (a == 0.0))
    if np.any(bad):
        raise DomainError("invalid power", _first_index(bad))
    return np.power(a, b)


def _compile(node: Node, index: Mapping[str, int]) -> Callable:
    if isinstance(node, Const):
        v = node.value
        return lambda args: v
    if isinstance(node, Var):
        k = index[node.name]
        return lambda args: args[k]
    if isinstance(node, Neg):
        f = _compile(node.arg, index)
        return lambda args: -f(args)
    if isinstance(node, BinOp):
        f = _compile(node.left, index)
        g = _compile(node.right, index)
        op = node.op
        if op == "+":
            return lambda args: f(args) + g(args)
        if op == "-":
            return lambda args: f(args) - g(args)
        if op == "*":
            return lambda args: f(args) * g(args)
        if op == "/":
            def div(args):
                den = g(args)
                zero = den == 0.0
                if np.any(zero):
                    raise DomainError("division by zero", _first_index(zero))
                return f(args) / den
            return div
        return lambda args: _vec_pow(f(args), g(args))
    if isinstance(node, Call):
        fs = [_compile(a, index) for a in node.args]
        f = fs[0]
        name = node.name
        if name == "log":
            def log(args):
                x = f(args)
                bad = ~(np.asarray(x) > 0.0)
                if np.any(bad):
                    raise DomainError("log of non-positive value", _first_index(bad))
                return np.log(x)
            return log
        if name == "sqrt":
            def sqrt(args):
                x = f(args)
                bad = np.asarray(x) < 0.0
                if np.any(bad):
                    raise DomainError("sqrt of negative value", _first_index(bad))
                return np.sqrt(x)
            return sqrt
        if name in ("min", "max"):
            g = fs[1]
            fn = np.minimum if name == "min" else np.maximum
            return lambda args: fn(f(args), g(args))
        fn = {"exp": np.exp, "sin": np.sin, "cos": np.cos,
              "abs": np.abs, "sign": np.sign}[name]
        return lambda args: fn(f(args))
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------- Expression

@dataclass(frozen=True)
class Expression:
    root: Node
    variables: tuple

    def __post_init__(self):
        unknown = _free_names(self.root) - set(self.variables)
        if unknown:
            raise ExprError(f"undeclared variables {sorted(unknown)}")

    def __str__(self) -> str:
        return render(self.root)

    def evaluate(self, point: Mapping[str, float]) -> float:
        return evaluate(self, point)

    def differentiate(self, wrt: str) -> "Expression":
        return differentiate(self, wrt)

    def depends_on(self, name: str) -> bool:
        return name in _free_names(self.root)

    @cached_property
    def _compiled(self):
        return _compile(self.root, {n: i for i, n in enumerate(self.variables)})

    def vectorized(self, *arrays):
        """Evaluate elementwise on numpy arrays given in declared-variable order.

        The result has the broadcast shape of the inputs. Domain failures
        raise :class:`DomainError` carrying the flat index of the first bad
        element; overflow to a non-finite value is treated the same way.
        """
        if len(arrays) != len(self.variables):
            raise TypeError(f"expected {len(self.variables)} arrays, got {len(arrays)}")
        args = [np.asarray(a, dtype=float) for a in arrays]
        if all(a.ndim == 0 for a in args):
            with np.errstate(all="ignore"):
                out = np.float64(self._compiled(args))
            if not math.isfinite(out):
                raise DomainError("non-finite value", 0)
            return out
        shape = np.broadcast_shapes(*(a.shape for a in args))
        with np.errstate(all="ignore"):
            out = self._compiled(args)
        out = np.broadcast_to(np.asarray(out, dtype=float), shape)
        bad = ~np.isfinite(out)
        if np.any(bad):
            raise DomainError("non-finite value", _first_index(bad))
        return out


def _free_names(node: Node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Const):
        return set()
    if isinstance(node, Neg):
        return _free_names(node.arg)
    if isinstance(node, BinOp):
        return _free_names(node.left) | _free_names(node.right)
    return set().union(*(_free_names(a) for a in node.args))


# ---------------------------------------------------------- differentiation
# smart constructors fold constants and drop neutral elements only

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is_const(node, value=None) -> bool:
    return isinstance(node, Const) and (value is None or node.value == value)


def _add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a, b):
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return BinOp("*", a, b)


def _div(a, b):
    if _is_const(a, 0.0):
        return _ZERO
    if _is_const(b, 1.0):
        return a
    return BinOp("/", a, b)


def _neg(a):
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _d(node: Node, wrt: str) -> Node:
    if isinstance(node, Const):
        return _ZERO
    if isinstance(node, Var):
        return _ONE if node.name == wrt else _ZERO
    if wrt not in _free_names(node):
        return _ZERO
    if isinstance(node, Neg):
        return _neg(_d(node.arg, wrt))
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        du, dv = _d(u, wrt), _d(v, wrt)
        if node.op == "+":
            return _add(du, dv)
        if node.op == "-":
            return _sub(du, dv)
        if node.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        if node.op == "/":
            return _div(_sub(_mul(du, v), _mul(u, dv)), BinOp("^", v, Const(2.0)))
        # power
        if wrt not in _free_names(v):
            exponent = Const(v.value - 1.0) if _is_const(v) else _sub(v, _ONE)
            return _mul(_mul(v, BinOp("^", u, exponent)), du)
        # general case u^v = exp(v log u)
        inner = _add(_mul(dv, Call("log", (u,))), _div(_mul(v, du), u))
        return _mul(node, inner)
    if isinstance(node, Call):
        name = node.name
        if name in ("min", "max"):
            raise NonDifferentiableError(f"{name} is not differentiable")
        u = node.args[0]
        du = _d(u, wrt)
        if name == "exp":
            return _mul(node, du)
        if name == "log":
            return _div(du, u)
        if name == "sin":
            return _mul(Call("cos", (u,)), du)
        if name == "cos":
            return _mul(_neg(Call("sin", (u,))), du)
        if name == "sqrt":
            return _div(du, _mul(Const(2.0), node))
        if name == "abs":
            return _mul(Call("sign", (u,)), du)
        if name == "sign":
            return _ZERO
    raise TypeError(f"not an expression node: {node!r}")


def differentiate(e: Expression, wrt: str) -> Expression:
    """Symbolic derivative of ``e`` with respect to ``wrt``.

    ``abs`` differentiates to ``sign(inner) * inner'`` with sign(0) = 0;
    ``min``/``max`` depending on ``wrt`` raise :class:`NonDifferentiableError`.
    """
    if wrt not in e.variables:
        raise ExprError(f"{wrt!r} is not a declared variable")
    return Expression(_d(e.root, wrt), e.variables)
