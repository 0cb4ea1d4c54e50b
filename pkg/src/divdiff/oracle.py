"""Extended-precision reference differences for the accuracy tests.

The oracle evaluates ``f(x+s)`` and ``f(x)`` in 160-bit software floating
point, subtracts there, and rounds once to double.  At that precision the
subtraction's cancellation is harmless: the result carries an error around
``2^-150`` of the operand scale, orders of magnitude below every tolerance
asserted against it.  The oracle follows the same branch conventions as
the production evaluators (interval selection, penalty cases, power
special-casing) so a disagreement reflects accuracy, not a different
branch.
"""

import math

from mpmath import mp, mpf

from .branching import CubicSpline
from .errors import DomainError, InvalidInputError, SplineValidationError
from .expr import BinOp, Call, Expr, Literal, Neg, Var, constant_exponent

#: Working precision of the oracle in bits; at least twice the 53-bit
#: double significand so double-precision cancellation cannot surface.
ORACLE_PRECISION_BITS = 160


def oracle_delta(e, x, s):
    """Reference value of ``f(x+s) - f(x)`` for an expression tree."""
    if len(x) != len(s):
        raise InvalidInputError(
            f"point and step lengths differ: {len(x)} vs {len(s)}")
    with mp.workprec(ORACLE_PRECISION_BITS):
        base = [mpf(float(v)) for v in x]
        stepped = [b + mpf(float(sv)) for b, sv in zip(base, s)]
        return float(_wide_eval(e, stepped) - _wide_eval(e, base))


def oracle_value(e, x):
    """Reference value of ``f(x)`` rounded once to double."""
    with mp.workprec(ORACLE_PRECISION_BITS):
        return float(_wide_eval(e, [mpf(float(v)) for v in x]))


def _wide_eval(e, x):
    if isinstance(e, Literal):
        return mpf(e.value)
    if isinstance(e, Var):
        return x[e.index]
    if isinstance(e, Neg):
        return -_wide_eval(e.operand, x)
    if isinstance(e, BinOp):
        if e.op == "^":
            return _wide_pow(e, x)
        a = _wide_eval(e.left, x)
        b = _wide_eval(e.right, x)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0:
            raise DomainError("division by zero")
        return a / b
    if isinstance(e, Call):
        u = _wide_eval(e.arg, x)
        if e.func == "exp":
            return mp.exp(u)
        if e.func == "log":
            if u <= 0:
                raise DomainError(f"log of a nonpositive value {u!r}")
            return mp.log(u)
        if e.func == "sqrt":
            if u < 0:
                raise DomainError(f"sqrt of a negative value {u!r}")
            return mp.sqrt(u)
        if e.func == "sq":
            return u * u
        if e.func == "recip":
            if u == 0:
                raise DomainError("reciprocal of zero")
            return 1 / u
        if e.func == "penalty":
            v = u if u > 0 else mpf(0)
            return v * v
    raise InvalidInputError(f"not an expression node: {e!r}")


def _wide_pow(e, x):
    u = _wide_eval(e.left, x)
    c = constant_exponent(e.right)
    if c == 2.0:
        return u * u
    if c == 0.5:
        if u < 0:
            raise DomainError(f"sqrt of a negative value {u!r}")
        return mp.sqrt(u)
    if c == -1.0:
        if u == 0:
            raise DomainError("reciprocal of zero")
        return 1 / u
    if u <= 0:
        raise DomainError(f"pow base must be positive, got {u!r}")
    return mp.exp(_wide_eval(e.right, x) * mp.log(u))


def oracle_spline_delta(sp, x, dx):
    """Reference spline difference, mirroring the production conventions.

    Sign normalisation, region selection on the double-rounded endpoint
    and the choice of anchored representation near each endpoint all match
    :func:`divdiff.branching.spline_eval_delta`; only the arithmetic runs
    in extended precision, with offsets targeting the exact endpoint
    ``x + dx``.
    """
    if not isinstance(sp, CubicSpline):
        raise SplineValidationError(f"not a CubicSpline: {sp!r}")
    x = float(x)
    dx = float(dx)
    if not (math.isfinite(x) and math.isfinite(dx)):
        raise InvalidInputError(f"need finite x, dx; got ({x!r}, {dx!r})")
    if dx == 0.0:
        return 0.0
    if dx < 0.0:
        return -oracle_spline_delta(sp, x + dx, -dx)
    i = sp.region_of(x)
    j = sp.region_of(x + dx)
    with mp.workprec(ORACLE_PRECISION_BITS):
        wx = mpf(x)
        wdx = mpf(dx)
        if i == j:
            coeffs, anchor = sp.piece(i)
            t = wx - mpf(float(anchor))
            return float(_wide_cubic(coeffs, t + wdx) - _wide_cubic(coeffs, t))
        lo_t = wx - mpf(float(sp.knots[i]))
        hi_t = (wx - mpf(float(sp.knots[j - 1]))) + wdx
        hi = _wide_cubic(sp.left_coeffs[j - 1], hi_t)
        lo = _wide_cubic(sp.right_coeffs[i], lo_t)
        return float(hi - lo)


def _wide_cubic(coeffs, t):
    a, b, c, d = (mpf(float(v)) for v in coeffs)
    return ((a * t + b) * t + c) * t + d


def oracle_expm1(d):
    """Reference exp(d) - 1 rounded once to double."""
    with mp.workprec(ORACLE_PRECISION_BITS):
        return float(mp.expm1(mpf(float(d))))


def oracle_gradient(e, x):
    """Gradient by central differences in extended precision.

    With 160-bit arithmetic and step 2^-40 the truncation and rounding
    errors are both far below double resolution, so the result is good to
    the last double bit for the comparisons made here.
    """
    h = mpf(2) ** -40
    out = []
    with mp.workprec(ORACLE_PRECISION_BITS):
        base = [mpf(float(v)) for v in x]
        for k in range(len(base)):
            up = list(base)
            down = list(base)
            up[k] = up[k] + h
            down[k] = down[k] - h
            out.append(float((_wide_eval(e, up) - _wide_eval(e, down)) / (2 * h)))
    return out


def oracle_solve_delta(a_values, a_deltas, b_values, b_deltas):
    """Reference solve difference by two extended-precision solves.

    Returns the double rounding of ``(A+dA)^-1 (b+db) - A^-1 b``; the
    matrices enter as the exact doubles the production path sees.
    """
    import numpy as np

    a_values = np.asarray(a_values, dtype=float)
    a_deltas = np.asarray(a_deltas, dtype=float)
    b_values = np.asarray(b_values, dtype=float)
    b_deltas = np.asarray(b_deltas, dtype=float)
    n = a_values.shape[0]
    with mp.workprec(ORACLE_PRECISION_BITS):
        base = mp.matrix([[mpf(a_values[r, c]) for c in range(n)]
                          for r in range(n)])
        stepped = mp.matrix([[mpf(a_values[r, c]) + mpf(a_deltas[r, c])
                              for c in range(n)] for r in range(n)])
        rhs = mp.matrix([mpf(v) for v in b_values])
        rhs_stepped = mp.matrix([mpf(v) + mpf(d)
                                 for v, d in zip(b_values, b_deltas)])
        x0 = mp.lu_solve(base, rhs)
        x1 = mp.lu_solve(stepped, rhs_stepped)
        return np.array([float(x1[k] - x0[k]) for k in range(n)])
