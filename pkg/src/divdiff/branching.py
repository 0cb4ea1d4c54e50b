"""Branch-bearing constructs that still admit accurate differences.

Data-dependent branching normally defeats value/delta propagation: the two
implicit executions may take different paths.  Three well-behaved cases are
handled here.

* ``penalty_delta`` - the squared hinge max(0, x)^2.  When both endpoints
  are on the smooth side the squaring rule applies; otherwise one of the
  two direct terms is zero, so direct subtraction has nothing to cancel.
* ``spline_eval_delta`` - piecewise cubics.  A step that crosses knots is
  split into knot-to-knot segments whose constant terms drop out exactly
  (each piece stores its value at the anchoring knot as the constant
  coefficient).
* ``bounded_loop`` - iteration with a fixed trip count, so both implicit
  executions follow the same path regardless of any convergence measure.

All functions are pure; :class:`CubicSpline` is immutable once validated.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import DeltaScalar, square
from .errors import (ComputeOverflowError, DivDiffError, FileFormatError,
                     InvalidInputError, SplineValidationError)

#: Relative tolerance for the agreement of the two per-interval cubic
#: representations at interval midpoints.  Honest double-precision
#: constructions agree far more tightly; inconsistent inputs do not.
DUAL_FORM_RTOL = 1e-12


def penalty_delta(x):
    """Value and difference of the squared hinge p = max(0, x)^2.

    For ``x >= 0`` and ``x + dx >= 0`` this is plain squaring.  In every
    other sign combination at least one of ``max(0, x+dx)^2`` and
    ``max(0, x)^2`` is zero, so their direct subtraction is exact.
    """
    u, du = x.value, x.delta
    if u >= 0.0 and u + du >= 0.0:
        return square(x)
    lo = max(0.0, u)
    hi = max(0.0, u + du)
    value = lo * lo
    delta = hi * hi - lo * lo
    if not (math.isfinite(value) and math.isfinite(delta)):
        raise ComputeOverflowError(f"penalty overflow at ({u!r}, {du!r})")
    return DeltaScalar(value, delta + 0.0)


@dataclass(frozen=True)
class CubicSpline:
    """Piecewise cubic with dual anchored representations per interval.

    ``knots`` are strictly increasing breakpoints ``k_1 < ... < k_n``.  The
    real line splits into regions 0..n: region 0 is everything below
    ``k_1``, region i (1 <= i < n) is ``[k_i, k_{i+1})`` and region n is
    ``[k_n, inf)``.  A point equal to a knot belongs to the region on its
    right.

    ``left_coeffs[i-1]`` holds ``(a, b, c, d)`` for regions i = 1..n, the
    cubic ``a*t^3 + b*t^2 + c*t + d`` in ``t = x - k_i`` (anchored at the
    region's left knot).  ``right_coeffs[i]`` holds ``(m, n, o, p)`` for
    regions i = 0..n-1, anchored at the region's right knot ``k_{i+1}``.
    Region 0 only has the right-anchored form and region n only the
    left-anchored one; interior regions have both.

    Validation requires the constant coefficients to link exactly across
    every knot (``p`` of region i equals ``d`` of region i+1, i.e. both
    forms store the spline value at the shared knot bit for bit) and the
    two forms of each interior region to agree at the midpoint to
    :data:`DUAL_FORM_RTOL` relative.
    """

    knots: np.ndarray
    left_coeffs: np.ndarray
    right_coeffs: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        left = np.asarray(self.left_coeffs, dtype=float)
        right = np.asarray(self.right_coeffs, dtype=float)
        object.__setattr__(self, "knots", _readonly(knots))
        object.__setattr__(self, "left_coeffs", _readonly(left))
        object.__setattr__(self, "right_coeffs", _readonly(right))
        n = knots.size
        if knots.ndim != 1 or n < 1:
            raise SplineValidationError("need at least one knot")
        if not np.all(np.isfinite(knots)):
            raise SplineValidationError("knots must be finite")
        if n > 1 and not np.all(np.diff(knots) > 0.0):
            raise SplineValidationError("knots must be strictly increasing")
        if left.shape != (n, 4) or right.shape != (n, 4):
            raise SplineValidationError(
                f"expected {n}x4 coefficient blocks, got "
                f"{left.shape} and {right.shape}")
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
            raise SplineValidationError("coefficients must be finite")
        for i in range(n):
            p_i = right[i, 3]
            d_next = left[i, 3]
            if p_i != d_next:
                raise SplineValidationError(
                    f"constant terms disagree across knot {i + 1}: "
                    f"{p_i!r} != {d_next!r}")
        for i in range(1, n):
            mid = 0.5 * (knots[i - 1] + knots[i])
            lv = _cubic(left[i - 1], mid - knots[i - 1])
            rv = _cubic(right[i], mid - knots[i])
            if abs(lv - rv) > DUAL_FORM_RTOL * max(abs(lv), abs(rv)):
                raise SplineValidationError(
                    f"dual forms of interval {i} disagree at midpoint "
                    f"{mid!r}: {lv!r} vs {rv!r}")

    @property
    def n_knots(self):
        return self.knots.size

    def region_of(self, x):
        """Index of the region containing ``x`` (knots belong to the right)."""
        return int(np.searchsorted(self.knots, x, side="right"))

    def piece(self, region):
        """Canonical ``(coeffs, anchor)`` of a region.

        Region 0 uses its right-anchored form, all others the
        left-anchored one.
        """
        if region == 0:
            return self.right_coeffs[0], self.knots[0]
        return self.left_coeffs[region - 1], self.knots[region - 1]

    def value(self, x):
        """Spline value at ``x`` from the region's canonical piece."""
        coeffs, anchor = self.piece(self.region_of(x))
        return _cubic(coeffs, x - anchor)

    def __call__(self, x):
        return self.value(x)


def _readonly(a):
    a = a.copy()
    a.flags.writeable = False
    return a


def _cubic(coeffs, t):
    a, b, c, d = coeffs
    return ((a * t + b) * t + c) * t + d


def _cubic_step(coeffs, t, dx):
    """P(t + dx) - P(t) for one cubic piece, constant term precancelled.

    Binomial expansion of each power: the difference is
    dx * (a*(3t^2 + 3t*dx + dx^2) + b*(2t + dx) + c), exact in real
    arithmetic with no appearance of the constant d.
    """
    a, b, c, _ = coeffs
    return dx * (a * (3.0 * t * t + 3.0 * t * dx + dx * dx)
                 + b * (2.0 * t + dx) + c)


def _tail_from(coeffs, t):
    """P(anchor + t) - P(anchor) = a*t^3 + b*t^2 + c*t (d precancelled)."""
    a, b, c, _ = coeffs
    return ((a * t + b) * t + c) * t


def spline_eval_delta(sp, x):
    """Value and difference of a piecewise cubic at a value/delta point.

    The step is sign-normalised to be nonnegative (swapping endpoints and
    negating the result otherwise).  Within one region the cubic
    finite-difference formula applies; across regions the difference
    telescopes into a head piece up to the first crossed knot, exact
    constant-coefficient differences between consecutive knots, and a tail
    piece from the last crossed knot, so no term mixes the two endpoints.
    """
    if not isinstance(sp, CubicSpline):
        raise SplineValidationError(f"not a CubicSpline: {sp!r}")
    u, du = x.value, x.delta
    value = sp.value(u)
    if du == 0.0:
        return DeltaScalar(value, 0.0)
    if du < 0.0:
        swapped = spline_eval_delta(sp, DeltaScalar(u + du, -du))
        return DeltaScalar(value, -swapped.delta + 0.0)

    hi = u + du
    i = sp.region_of(u)
    j = sp.region_of(hi)
    if i == j:
        coeffs, anchor = sp.piece(i)
        delta = _cubic_step(coeffs, u - anchor, du)
    else:
        knots = sp.knots
        # Head: up to the first crossed knot, right-anchored form of
        # region i (the offset u - knots[i] is at most du in magnitude).
        parts = [-_tail_from(sp.right_coeffs[i], u - knots[i])]
        # Middle: whole regions inside the step contribute the difference
        # of their stored knot values, linked exactly by validation.
        for l in range(i + 1, j):
            parts.append(sp.right_coeffs[l][3] - sp.left_coeffs[l - 1][3])
        # Tail: from the last crossed knot, left-anchored form of region j;
        # (u - knot) + du targets the exact endpoint u + du without the
        # rounding of forming it first.
        tail_t = (u - knots[j - 1]) + du
        parts.append(_tail_from(sp.left_coeffs[j - 1], tail_t))
        delta = math.fsum(parts)
    if not (math.isfinite(value) and math.isfinite(delta)):
        raise ComputeOverflowError(
            f"spline evaluation overflow at ({u!r}, {du!r})")
    return DeltaScalar(value, delta + 0.0)


def bounded_loop(body, state, max_iters):
    """Apply ``body`` to ``state`` exactly ``max_iters`` times.

    Replaces tolerance-terminated loops: a fixed trip count guarantees the
    implicit executions at ``x`` and ``x + s`` follow the identical path.
    The caller is responsible for choosing a count that covers its whole
    input region.  Errors from the loop body are re-raised with the
    iteration index attached.
    """
    if not isinstance(max_iters, int) or max_iters < 1:
        raise InvalidInputError(f"max_iters must be a positive int, got {max_iters!r}")
    for i in range(max_iters):
        try:
            state = body(state)
        except DivDiffError as exc:
            wrapped = type(exc)(f"{exc} (at loop iteration {i})")
            wrapped.located = True
            raise wrapped from exc
    return state


# -- spline text format ------------------------------------------------------
#
# Line 1:              "knots: n"
# Line 2:              the n knots, ascending, whitespace separated
# Lines 3 .. 3+n:      n+1 region pieces in region order: the below-range
#                      piece (right-anchored m0 n0 o0 p0) then the n
#                      left-anchored rows "a b c d" for regions 1..n
# Final n lines:       all right-anchored rows "m n o p" for regions
#                      0..n-1; the first repeats the below-range piece and
#                      must match it exactly
#
# Decimal values round-trip exactly: the writer emits shortest re-reading
# representations and the reader parses to nearest.


def save_spline(sp, stream):
    """Write the text form of a spline to an open text stream."""
    n = sp.n_knots
    stream.write(f"knots: {n}\n")
    stream.write(" ".join(repr(k) for k in sp.knots.tolist()) + "\n")
    stream.write(_coeff_line(sp.right_coeffs[0]))
    for row in sp.left_coeffs:
        stream.write(_coeff_line(row))
    for row in sp.right_coeffs:
        stream.write(_coeff_line(row))


def _coeff_line(row):
    return " ".join(repr(float(v)) for v in row) + "\n"


def load_spline(stream):
    """Parse the text form of a spline; validation runs on construction."""
    lines = [ln.strip() for ln in stream.read().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("knots:"):
        raise FileFormatError("spline file must start with 'knots: <count>'")
    try:
        n = int(lines[0].split(":", 1)[1])
    except ValueError:
        raise FileFormatError(f"bad knot count in {lines[0]!r}") from None
    if n < 1:
        raise FileFormatError(f"knot count must be positive, got {n}")
    expected = 2 + (n + 1) + n
    if len(lines) != expected:
        raise FileFormatError(
            f"expected {expected} lines for {n} knots, found {len(lines)}")
    knots = _parse_row(lines[1], n, "knot line")
    region_rows = [_parse_row(lines[2 + i], 4, f"region line {i}")
                   for i in range(n + 1)]
    right_rows = [_parse_row(lines[3 + n + i], 4, f"right-form line {i}")
                  for i in range(n)]
    if region_rows[0] != right_rows[0]:
        raise FileFormatError(
            "below-range piece appears twice and the copies disagree")
    return CubicSpline(knots=np.array(knots),
                       left_coeffs=np.array(region_rows[1:]),
                       right_coeffs=np.array(right_rows))


def _parse_row(line, count, what):
    parts = line.split()
    if len(parts) != count:
        raise FileFormatError(f"{what}: expected {count} values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise FileFormatError(f"{what}: {exc}") from None


def spline_from_left_pieces(knots, pieces):
    """Test/demo utility: build a valid spline from left-anchored cubics.

    ``pieces[i]`` is the ``(a, b, c, d)`` cubic of region i+1 anchored at
    ``knots[i]``; the below-range piece extends region 1's cubic downward.
    Right-anchored forms are derived by re-anchoring at the interval's
    right knot, and each region's constant is then overwritten with the
    stored knot value of the region below so the continuity linkage holds
    bit for bit.  Only continuity is enforced, not smoothness; the shape
    of each piece apart from its constant is taken as given.
    """
    knots = np.asarray(knots, dtype=float)
    pieces = np.asarray(pieces, dtype=float)
    n = knots.size
    if pieces.shape != (n, 4):
        raise InvalidInputError(
            f"need one left piece per knot: expected {(n, 4)}, got {pieces.shape}")
    left = pieces.astype(float).copy()
    right = np.empty_like(left)
    # Region 0 extends region 1's cubic, which is already anchored at the
    # shared knot, so the below-range right form is that cubic verbatim.
    right[0] = left[0]
    for i in range(1, n):
        right[i] = _shift_anchor(left[i - 1], knots[i], knots[i - 1])
        left[i, 3] = right[i, 3]
    return CubicSpline(knots=knots, left_coeffs=left, right_coeffs=right)


def _shift_anchor(coeffs, new_anchor, old_anchor):
    """Re-anchor a*t^3+b*t^2+c*t+d from old to new anchor (t in x - anchor)."""
    a, b, c, d = (float(v) for v in coeffs)
    w = new_anchor - old_anchor
    return np.array([
        a,
        b + 3.0 * a * w,
        c + 2.0 * b * w + 3.0 * a * w * w,
        d + c * w + b * w * w + a * w * w * w,
    ])
