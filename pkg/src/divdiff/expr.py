"""A small expression language and its lifted value/delta interpreter.

The grammar covers just the operations that have cancellation-free
difference rules:

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'

Identifiers are the input variables ``x0`` .. ``x9`` and the functions
``exp``, ``log``, ``sqrt``, ``sq``, ``recip`` and ``penalty``.  There is
deliberately no ``if`` or comparison form: data-dependent branching breaks
difference propagation in general, and the only safe branch constructs are
exposed as named functions or as the dedicated spline/solve routines.

:func:`eval_plain` gives the ordinary real semantics of a tree and
:func:`eval_delta` interprets the same tree over :class:`~divdiff.core.DeltaScalar`,
producing ``f(x)`` and the finite difference ``f(x+s) - f(x)`` in one pass.
"""

import math
import re
from dataclasses import dataclass, field

from . import core
from .branching import penalty_delta
from .errors import (DivDiffError, DomainError, ComputeOverflowError,
                     InvalidInputError, ParseError, UnsupportedFunctionError)

FUNCTIONS = ("exp", "log", "sqrt", "sq", "recip", "penalty")

MAX_ARITY = 10


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Literal(Expr):
    value: float
    pos: int = field(default=-1, compare=False, kw_only=True)


@dataclass(frozen=True)
class Var(Expr):
    index: int
    pos: int = field(default=-1, compare=False, kw_only=True)


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    pos: int = field(default=-1, compare=False, kw_only=True)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr
    pos: int = field(default=-1, compare=False, kw_only=True)


@dataclass(frozen=True)
class Call(Expr):
    func: str  # member of FUNCTIONS
    arg: Expr
    pos: int = field(default=-1, compare=False, kw_only=True)


_TOKEN_RE = re.compile(r"""
    (?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
""", re.VERBOSE)


def _tokenize(src):
    tokens = []
    i = 0
    n = len(src)
    while i < n:
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ParseError(f"unexpected character {src[i]!r}", offset=i)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(m.lastgroup), i))
        i = m.end()
    tokens.append(("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, arity):
        self.tokens = tokens
        self.k = 0
        self.arity = arity

    def peek(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect_op(self, op):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}, found {text or 'end of input'!r}",
                             offset=pos)
        return self.advance()

    def parse_expr(self):
        node = self.parse_term()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                rhs = self.parse_term()
                node = BinOp(text, node, rhs, pos=pos)
            else:
                return node

    def parse_term(self):
        node = self.parse_factor()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                rhs = self.parse_factor()
                node = BinOp(text, node, rhs, pos=pos)
            else:
                return node

    def parse_factor(self):
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.parse_factor(), pos=pos)
        return self.parse_power()

    def parse_power(self):
        node = self.parse_atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            exponent = self.parse_factor()  # right-associative
            node = BinOp("^", node, exponent, pos=pos)
        return node

    def parse_atom(self):
        kind, text, pos = self.advance()
        if kind == "number":
            return Literal(float(text), pos=pos)
        if kind == "ident":
            return self.parse_ident(text, pos)
        if kind == "op" and text == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ParseError(f"expected a value, found {text or 'end of input'!r}",
                         offset=pos)

    def parse_ident(self, name, pos):
        m = re.fullmatch(r"x(\d)", name)
        if m is not None:
            index = int(m.group(1))
            if index >= self.arity:
                raise ParseError(
                    f"variable {name} exceeds the declared arity {self.arity}",
                    offset=pos)
            return Var(index, pos=pos)
        kind, text, _ = self.peek()
        if not (kind == "op" and text == "("):
            raise ParseError(f"unknown identifier {name!r}", offset=pos)
        if name == "abs":
            raise UnsupportedFunctionError(
                "unsupported: 'abs' has a nondifferentiable branch at 0, "
                "so its difference cannot be evaluated reliably", offset=pos)
        if name not in FUNCTIONS:
            raise UnsupportedFunctionError(
                f"unknown function {name!r} (supported: {', '.join(FUNCTIONS)})",
                offset=pos)
        self.advance()
        arg = self.parse_expr()
        self.expect_op(")")
        return Call(name, arg, pos=pos)


def parse(src, arity):
    """Parse ``src`` into an expression tree over ``arity`` variables."""
    if not isinstance(src, str) or not src.strip():
        raise ParseError("empty expression", offset=0)
    if not 0 <= arity <= MAX_ARITY:
        raise InvalidInputError(f"arity must be in 0..{MAX_ARITY}, got {arity}")
    parser = _Parser(_tokenize(src), arity)
    node = parser.parse_expr()
    kind, text, pos = parser.peek()
    if kind != "eof":
        raise ParseError(f"unexpected trailing input {text!r}", offset=pos)
    return node


def format_expr(e):
    """Render a tree as source text; reparsing gives a structurally equal tree."""
    if isinstance(e, Literal):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Neg):
        return f"(-{format_expr(e.operand)})"
    if isinstance(e, BinOp):
        return f"({format_expr(e.left)} {e.op} {format_expr(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({format_expr(e.arg)})"
    raise InvalidInputError(f"not an expression node: {e!r}")


def arity_of(e):
    """Smallest arity that covers every variable in the tree."""
    if isinstance(e, Var):
        return e.index + 1
    if isinstance(e, Neg):
        return arity_of(e.operand)
    if isinstance(e, BinOp):
        return max(arity_of(e.left), arity_of(e.right))
    if isinstance(e, Call):
        return arity_of(e.arg)
    return 0


def is_constant(e):
    """True when the tree contains no input variable."""
    if isinstance(e, Var):
        return False
    if isinstance(e, Neg):
        return is_constant(e.operand)
    if isinstance(e, BinOp):
        return is_constant(e.left) and is_constant(e.right)
    if isinstance(e, Call):
        return is_constant(e.arg)
    return True


def constant_exponent(e):
    """Value of a variable-free exponent subtree, or None."""
    if not is_constant(e):
        return None
    return eval_plain(e, ())


def _locate(exc, pos):
    """Attach the failing node's source offset to a propagated error once."""
    if getattr(exc, "located", False) or pos < 0:
        raise exc
    wrapped = type(exc)(f"{exc} (at source offset {pos})")
    wrapped.located = True
    raise wrapped from exc


def eval_plain(e, x):
    """Ordinary working-precision evaluation of the tree at point ``x``."""
    if isinstance(e, Literal):
        return e.value
    if isinstance(e, Var):
        return float(x[e.index])
    if isinstance(e, Neg):
        return -eval_plain(e.operand, x)
    try:
        if isinstance(e, BinOp):
            if e.op == "^":
                return _plain_pow(e, x)
            a = eval_plain(e.left, x)
            b = eval_plain(e.right, x)
            if e.op == "+":
                v = a + b
            elif e.op == "-":
                v = a - b
            elif e.op == "*":
                v = a * b
            else:
                if b == 0.0:
                    raise DomainError("division by zero")
                v = a / b
            if not math.isfinite(v):
                raise ComputeOverflowError(f"result overflows: {a!r} {e.op} {b!r}")
            return v
        if isinstance(e, Call):
            return _plain_call(e.func, eval_plain(e.arg, x))
    except DivDiffError as exc:
        _locate(exc, e.pos)
    raise InvalidInputError(f"not an expression node: {e!r}")


def _plain_pow(e, x):
    u = eval_plain(e.left, x)
    c = constant_exponent(e.right)
    if c == 2.0:
        v = u * u
    elif c == 0.5:
        if u < 0.0:
            raise DomainError(f"sqrt of a negative value {u!r}")
        v = math.sqrt(u)
    elif c == -1.0:
        if u == 0.0:
            raise DomainError("reciprocal of zero")
        v = 1.0 / u
    else:
        b = eval_plain(e.right, x)
        if u <= 0.0:
            raise DomainError(f"pow base must be positive, got {u!r}")
        try:
            v = math.pow(u, b)
        except OverflowError:
            raise ComputeOverflowError(f"pow({u!r}, {b!r}) overflows") from None
    if not math.isfinite(v):
        raise ComputeOverflowError(f"pow result overflows at base {u!r}")
    return v


def _plain_call(func, u):
    if func == "exp":
        try:
            return math.exp(u)
        except OverflowError:
            raise ComputeOverflowError(f"exp({u!r}) overflows") from None
    if func == "log":
        if u <= 0.0:
            raise DomainError(f"log of a nonpositive value {u!r}")
        return math.log(u)
    if func == "sqrt":
        if u < 0.0:
            raise DomainError(f"sqrt of a negative value {u!r}")
        return math.sqrt(u)
    if func == "sq":
        v = u * u
        if not math.isfinite(v):
            raise ComputeOverflowError(f"sq({u!r}) overflows")
        return v
    if func == "recip":
        if u == 0.0:
            raise DomainError("reciprocal of zero")
        return 1.0 / u
    if func == "penalty":
        v = max(0.0, u)
        return v * v
    raise InvalidInputError(f"unknown function {func!r}")


_DELTA_CALLS = {
    "exp": core.exp,
    "log": core.log,
    "sqrt": core.sqrt,
    "sq": core.square,
    "recip": core.reciprocal,
    "penalty": penalty_delta,
}

_DELTA_BINOPS = {
    "+": core.add,
    "-": core.sub,
    "*": core.mul,
    "/": core.div,
    "^": core.power,
}


def eval_delta(e, x, s):
    """Evaluate ``(f(x), f(x+s) - f(x))`` in one lifted pass over the tree.

    ``x`` and ``s`` are same-length sequences; variable ``xi`` is seeded as
    ``(x[i], s[i])`` and literals enter as parameters.  Errors raised by the
    difference rules propagate with the offending node's source offset.
    """
    if len(x) != len(s):
        raise InvalidInputError(
            f"point and step lengths differ: {len(x)} vs {len(s)}")
    seeds = tuple(core.seed_input(xi, si) for xi, si in zip(x, s))
    out = _delta_node(e, seeds)
    return out.value, out.delta


def _delta_node(e, seeds):
    if isinstance(e, Literal):
        return core.lift_parameter(e.value)
    if isinstance(e, Var):
        return seeds[e.index]
    try:
        if isinstance(e, Neg):
            return core.negate(_delta_node(e.operand, seeds))
        if isinstance(e, BinOp):
            a = _delta_node(e.left, seeds)
            b = _delta_node(e.right, seeds)
            return _DELTA_BINOPS[e.op](a, b)
        if isinstance(e, Call):
            return _DELTA_CALLS[e.func](_delta_node(e.arg, seeds))
    except DivDiffError as exc:
        _locate(exc, e.pos)
    raise InvalidInputError(f"not an expression node: {e!r}")
