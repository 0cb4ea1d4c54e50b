"""Value/delta scalar arithmetic with cancellation-free difference rules.

A :class:`DeltaScalar` carries a quantity ``u`` together with ``du``, the
exactly-tracked finite difference of that quantity between two implicit
program executions (one at the base input ``x``, one at the stepped input
``x + s``).  Every arithmetic rule here rewrites the difference of the
results so that terms common to both executions never enter a floating
point subtraction.  The payoff is that ``du`` stays accurate to roughly
``|s| * eps`` even when ``s`` is far below the rounding granularity of the
values, where forming the difference by direct subtraction returns 0.

All operations are pure functions over immutable values and are safe to
use concurrently.
"""

import math
from dataclasses import dataclass

from .errors import ComputeOverflowError, DomainError, InvalidInputError

#: Unit roundoff of IEEE double precision (half the 1.0 -> nextafter gap).
UNIT_ROUNDOFF = 2.0 ** -53

#: Number of Taylor terms kept by the exp kernel (enough for full double
#: precision on |d| <= 1).
EXPM1_TAYLOR_TERMS = 17

# Reciprocal factorials 1/3! .. 1/17!; the k=1,2 terms are handled exactly
# in expm1_taylor to keep the worst case within 2 ulps.
_EXPM1_TAIL = tuple(1.0 / math.factorial(k) for k in range(3, EXPM1_TAYLOR_TERMS + 1))


@dataclass(frozen=True, slots=True)
class AccuracyBudget:
    """Accuracy bookkeeping used by the test suites.

    ``eps_mach`` is the unit roundoff of the working precision and
    ``c_factor`` the dimensionless slack constant multiplied onto the
    theoretical ``|s| * eps`` error level.
    """

    eps_mach: float = UNIT_ROUNDOFF
    c_factor: float = 100.0

    def __post_init__(self):
        if not (self.eps_mach > 0.0):
            raise InvalidInputError("eps_mach must be positive")
        if not (self.c_factor >= 1.0):
            raise InvalidInputError("c_factor must be at least 1")

    def small_step_bound(self, step, reference):
        """Tolerance ``c * eps * max(|step|, |reference|)``.

        ``reference`` is the independently computed difference; the
        ``max`` keeps the bound meaningful both when the difference is
        smaller than the step (flat functions) and when it is much larger
        (steep functions).
        """
        return self.c_factor * self.eps_mach * max(abs(step), abs(reference))


#: Budget used by the acceptance suite: IEEE double with slack constant 100.
DEFAULT_BUDGET = AccuracyBudget()


class DeltaScalar:
    """A pair ``(value, delta)``: a quantity and its finite difference.

    Instances are immutable.  Arithmetic operators apply the rewriting
    rules; bare ``int``/``float`` operands are lifted as parameters
    (``delta = 0``).
    """

    __slots__ = ("value", "delta")

    def __init__(self, value, delta):
        value = float(value)
        delta = float(delta)
        if not (math.isfinite(value) and math.isfinite(delta)):
            raise InvalidInputError(
                f"DeltaScalar fields must be finite, got ({value!r}, {delta!r})")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "delta", delta)

    def __setattr__(self, name, _value):
        raise AttributeError(f"DeltaScalar is immutable, cannot set {name!r}")

    def __repr__(self):
        return f"DeltaScalar({self.value!r}, {self.delta!r})"

    def __eq__(self, other):
        if not isinstance(other, DeltaScalar):
            return NotImplemented
        return self.value == other.value and self.delta == other.delta

    def __hash__(self):
        return hash((self.value, self.delta))

    @property
    def stepped(self):
        """The value at the stepped input, ``value + delta`` (one rounding)."""
        return self.value + self.delta

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, other):
        return power(self, _coerce(other))

    def __rpow__(self, other):
        return power(_coerce(other), self)

    def __neg__(self):
        return negate(self)


def _coerce(x):
    if isinstance(x, DeltaScalar):
        return x
    if isinstance(x, (int, float)):
        return lift_parameter(x)
    raise InvalidInputError(f"cannot mix DeltaScalar with {type(x).__name__}")


def _result(value, delta):
    """Package an operation result, rejecting non-finite output.

    ``delta + 0.0`` folds a -0.0 delta to +0.0 so that zero steps stay
    bitwise zero through every rule.
    """
    if not (math.isfinite(value) and math.isfinite(delta)):
        raise ComputeOverflowError(
            f"operation left the finite range: ({value!r}, {delta!r})")
    return DeltaScalar(value, delta + 0.0)


def lift_parameter(p):
    """Wrap a quantity that does not depend on the input: delta is zero."""
    p = float(p)
    if not math.isfinite(p):
        raise InvalidInputError(f"parameter must be finite, got {p!r}")
    return DeltaScalar(p, 0.0)


def seed_input(x, s):
    """Wrap an input variable ``x`` carrying the step ``s``."""
    x = float(x)
    s = float(s)
    if not (math.isfinite(x) and math.isfinite(s)):
        raise InvalidInputError(f"seed must be finite, got ({x!r}, {s!r})")
    return DeltaScalar(x, s)


def add(a, b):
    """Sum rule: differencing is linear."""
    return _result(a.value + b.value, a.delta + b.delta)


def sub(a, b):
    """Difference rule: differencing is linear."""
    return _result(a.value - b.value, a.delta - b.delta)


def negate(a):
    return _result(-a.value, -a.delta)


def mul(a, b):
    """Product rule with the common term removed before any subtraction.

    (u+du)(v+dv) - uv = u*dv + v*du + du*dv; the uv term appears in both
    executions and is dropped algebraically instead of being cancelled in
    floating point.
    """
    u, du = a.value, a.delta
    v, dv = b.value, b.delta
    return _result(u * v, u * dv + v * du + du * dv)


def square(a):
    """Squaring rule: delta = 2*u*du + du^2."""
    u, du = a.value, a.delta
    return _result(u * u, (2.0 * u) * du + du * du)


def reciprocal(a):
    """Reciprocal rule: delta = -du / (u * (u + du)).

    Both endpoints must be nonzero and on the same side of the pole at 0.
    """
    u, du = a.value, a.delta
    u1 = u + du
    if u == 0.0 or u1 == 0.0:
        raise DomainError("reciprocal of zero at an endpoint")
    if (u < 0.0) != (u1 < 0.0):
        raise DomainError(
            "reciprocal endpoints straddle the pole at zero "
            f"(u={u!r}, u+du={u1!r})")
    return _result(1.0 / u, -du / (u * u1))


def div(a, b):
    """Quotient, as reciprocation followed by multiplication."""
    return mul(a, reciprocal(b))


def sqrt(a):
    """Square-root rule: delta = du / (sqrt(u+du) + sqrt(u))."""
    u, du = a.value, a.delta
    u1 = u + du
    if u < 0.0 or u1 < 0.0:
        raise DomainError(
            f"sqrt of a negative endpoint (u={u!r}, u+du={u1!r})")
    if du == 0.0:
        return _result(math.sqrt(u), 0.0)
    return _result(math.sqrt(u), du / (math.sqrt(u1) + math.sqrt(u)))


def expm1_taylor(d):
    """exp(d) - 1 for |d| <= 1 by the 17-term Taylor series, leading 1 dropped.

    The first two terms d + d^2/2 are combined with one rounding each and
    the remaining 15 terms are a Horner tail, which keeps the worst case
    within 2 ulps of the true value over the whole interval.
    """
    d = float(d)
    if not math.isfinite(d) or abs(d) > 1.0:
        raise InvalidInputError(f"expm1_taylor requires |d| <= 1, got {d!r}")
    acc = _EXPM1_TAIL[-1]
    for c in reversed(_EXPM1_TAIL[:-1]):
        acc = acc * d + c
    dd = d * d
    return (d + 0.5 * dd) + (dd * d) * acc


def exp(a):
    """Exponential rule: delta = exp(u) * (exp(du) - 1).

    The parenthesised factor is the Taylor kernel for |du| <= 1 and the
    expression as written otherwise (no cancellation risk there).
    """
    u, du = a.value, a.delta
    try:
        v = math.exp(u)
    except OverflowError:
        raise ComputeOverflowError(f"exp({u!r}) overflows") from None
    if abs(du) <= 1.0:
        growth = expm1_taylor(du)
    else:
        try:
            growth = math.exp(du) - 1.0
        except OverflowError:
            raise ComputeOverflowError(f"exp step {du!r} overflows") from None
    return _result(v, v * growth)


def log(a):
    """Logarithm rule: delta = log1p(du / u).

    Both endpoints must be strictly positive.
    """
    u, du = a.value, a.delta
    u1 = u + du
    if u <= 0.0 or u1 <= 0.0:
        raise DomainError(
            f"log of a nonpositive endpoint (u={u!r}, u+du={u1!r})")
    try:
        d = math.log1p(du / u)
    except ValueError:
        # du/u rounded to -1 although u+du > 0: the step cancels the
        # argument below working-precision resolution.
        raise DomainError(
            f"log step cancels the argument at working precision "
            f"(u={u!r}, du={du!r})") from None
    return _result(math.log(u), d)


def power(a, b):
    """General power u**v as exp(v * log(u)), with exact special cases.

    A parameter exponent (delta 0) equal to 2, 1/2 or -1 dispatches to the
    squaring, square-root or reciprocal rule, which keeps the natural
    domain of those operations (the exp/log route needs u > 0).
    """
    if b.delta == 0.0:
        if b.value == 2.0:
            return square(a)
        if b.value == 0.5:
            return sqrt(a)
        if b.value == -1.0:
            return reciprocal(a)
    composed = exp(mul(b, log(a)))
    try:
        v = math.pow(a.value, b.value)
    except (OverflowError, ValueError):  # pragma: no cover - log guards first
        raise ComputeOverflowError(
            f"pow({a.value!r}, {b.value!r}) overflows") from None
    return _result(v, composed.delta)
