"""Optimization decision tests fed by accurate differences.

The point of computing ``f(x+s) - f(x)`` without cancellation is that
acceptance tests keep working when the step is tiny: the Armijo condition
compares the actual decrease against a linear prediction, and the
trust-region ratio divides the actual decrease by a model decrease.  Both
collapse to 0/0 noise under naive subtraction near a minimizer.

A :class:`DeltaObjective` packages the accurate evaluator together with an
analytic gradient; :class:`QuadraticObjective` is the closed-form quadratic
used by the stagnation experiments, whose difference has the exact
expansion ``(Mx + d)' dx + dx' M dx / 2``.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DeltaScalar
from .errors import (ComputeOverflowError, DegenerateModelError,
                     InvalidInputError, ShapeError)
from .linalg import DeltaVector

#: Relative tolerance for accepting a quadratic matrix as symmetric.
SYMMETRY_RTOL = 1e-14


@dataclass(frozen=True)
class DeltaObjective:
    """An objective with an accurate difference evaluator.

    ``evaluator(x, s)`` returns ``(f(x), f(x+s) - f(x))`` with the
    difference meeting the small-step accuracy contract; ``gradient(x)``
    is the analytic gradient.  Both must be pure.
    """

    arity: int
    evaluator: Callable[[np.ndarray, np.ndarray], tuple]
    gradient: Callable[[np.ndarray], np.ndarray]

    def delta(self, x, s):
        return self.evaluator(np.asarray(x, dtype=float),
                              np.asarray(s, dtype=float))[1]


def armijo_accepts(obj, x, p, alpha, sigma):
    """Sufficient-decrease test ``f(x+a p) - f(x) <= sigma a grad'p``.

    The left side is the propagated difference, never a subtraction of two
    objective values, so the test stays meaningful for steps far below the
    objective's rounding granularity.
    """
    if not alpha > 0.0:
        raise InvalidInputError(f"alpha must be positive, got {alpha!r}")
    if not 0.0 < sigma < 1.0:
        raise InvalidInputError(f"sigma must be in (0, 1), got {sigma!r}")
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    decrease = obj.evaluator(x, alpha * p)[1]
    predicted = float(np.dot(obj.gradient(x), p))
    return decrease <= sigma * alpha * predicted


def trust_region_rho(obj, model_delta, x, s):
    """Ratio of actual objective decrease to model decrease."""
    if model_delta == 0.0:
        raise DegenerateModelError("model predicts zero change over the step")
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    return obj.evaluator(x, s)[1] / model_delta


@dataclass(frozen=True)
class QuadraticObjective:
    """f(x) = x'Mx/2 + d'x with M symmetric positive definite."""

    M: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        m = np.array(self.M, dtype=float)
        d = np.array(self.d, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or d.shape != (m.shape[0],):
            raise ShapeError(f"need an n x n matrix and length-n vector, got "
                             f"{m.shape} and {d.shape}")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(d))):
            raise InvalidInputError("quadratic data must be finite")
        scale = np.max(np.abs(m))
        if scale > 0 and np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * scale:
            raise InvalidInputError("matrix is not symmetric")
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise InvalidInputError("matrix is not positive definite") from None
        m.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "M", m)
        object.__setattr__(self, "d", d)

    @property
    def dim(self):
        return self.d.size

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * (x @ (self.M @ x)) + self.d @ x)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self.M @ x + self.d

    def minimizer(self):
        """The unique minimum -M^-1 d by direct solve."""
        return np.linalg.solve(self.M, -self.d)

    def delta_objective(self):
        """Package as a DeltaObjective backed by quadratic_delta."""
        def evaluator(x, s):
            out = quadratic_delta(self, DeltaVector(x, s))
            return out.value, out.delta
        return DeltaObjective(arity=self.dim, evaluator=evaluator,
                              gradient=self.gradient)


def quadratic_delta(q, x):
    """Exact quadratic difference: (Mx + d)'dx + dx'M dx / 2.

    The expansion has no term shared between the two endpoints, so nothing
    cancels; products with M are assumed forward-accurate (true for
    diagonal or well-conditioned M).
    """
    if len(x) != q.dim:
        raise ShapeError(f"dimension mismatch: {q.dim} vs {len(x)}")
    v, dv = x.values, x.deltas
    value = 0.5 * float(v @ (q.M @ v)) + float(q.d @ v)
    grad = q.M @ v + q.d
    delta = float(grad @ dv) + 0.5 * float(dv @ (q.M @ dv))
    if not (math.isfinite(value) and math.isfinite(delta)):
        raise ComputeOverflowError("quadratic evaluation overflowed")
    return DeltaScalar(value, delta + 0.0)
