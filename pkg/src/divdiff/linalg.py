"""Componentwise value/delta propagation for vectors, matrices and solves.

The vector and matrix types carry a value array and a delta array of the
same shape.  Dot products and matrix-vector products apply the scalar
product rule componentwise.  ``solve_delta`` propagates a difference
through Gaussian elimination: although pivoting branches internally, the
solution map itself is smooth, and the difference of ``A^-1 b`` under
perturbations ``(dA, db)`` has the closed form

    dx = A^-1 ([(I + dA A^-1)^-1 - I] b + (I + dA A^-1)^-1 db)

The bracketed factor is evaluated by its Neumann series with the identity
dropped algebraically (-B + B^2 - B^3 + ... for B = dA A^-1) whenever
``norm_inf(B) <= 1/2``, and by direct subtraction otherwise, where the
subtraction is harmless.
"""

from dataclasses import dataclass

import numpy as np

from .core import UNIT_ROUNDOFF, DeltaScalar
from .errors import (ConvergenceError, FileFormatError, InvalidInputError,
                     ShapeError, SingularMatrixError)

#: Hard cap on Neumann series terms; unreachable when the norm gate holds
#: (each term shrinks by at least 1/2) and a safety net otherwise.
NEUMANN_MAX_TERMS = 200

#: Largest supported dense dimension.
MAX_DIM = 512


def _finite_array(a, what, dtype=float):
    out = np.array(a, dtype=dtype)
    if not np.all(np.isfinite(out)):
        raise InvalidInputError(f"{what} must be finite")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class DeltaVector:
    """Per-component (value, delta) pairs of a real vector."""

    values: np.ndarray
    deltas: np.ndarray

    def __post_init__(self):
        values = _finite_array(self.values, "vector values")
        deltas = _finite_array(self.deltas, "vector deltas")
        if values.ndim != 1 or values.shape != deltas.shape:
            raise ShapeError(
                f"values and deltas must be equal-length vectors, got "
                f"{values.shape} and {deltas.shape}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "deltas", deltas)

    def __len__(self):
        return self.values.size

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class DeltaMatrix:
    """Per-entry (value, delta) pairs of a square real matrix."""

    values: np.ndarray
    deltas: np.ndarray

    def __post_init__(self):
        values = _finite_array(self.values, "matrix values")
        deltas = _finite_array(self.deltas, "matrix deltas")
        if (values.ndim != 2 or values.shape[0] != values.shape[1]
                or values.shape != deltas.shape):
            raise ShapeError(
                f"need matching square arrays, got {values.shape} and "
                f"{deltas.shape}")
        if values.shape[0] > MAX_DIM:
            raise ShapeError(
                f"dense solves support n <= {MAX_DIM}, got {values.shape[0]}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "deltas", deltas)

    @property
    def n(self):
        return self.values.shape[0]


def dot_delta(a, b):
    """Inner product with the product rule applied per component."""
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")
    u, du = a.values, a.deltas
    v, dv = b.values, b.deltas
    value = float(u @ v)
    delta = float(u @ dv + v @ du + du @ dv)
    return DeltaScalar(value, delta + 0.0)


def matvec_delta(a, x):
    """Matrix-vector product, rowwise dot_delta."""
    if a.n != len(x):
        raise ShapeError(f"shape mismatch: {a.n}x{a.n} times {len(x)}")
    u, du = a.values, a.deltas
    v, dv = x.values, x.deltas
    return DeltaVector(u @ v, u @ dv + du @ v + du @ dv)


@dataclass
class SolveCounters:
    """Diagnostic tally of which difference branch solve_delta took."""

    series: int = 0
    direct: int = 0


def _solve(matrix, rhs, what):
    try:
        return np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(f"singular matrix in {what}") from None


def solve_delta(a, b, counters=None):
    """Value and difference of the linear-system solution ``A^-1 b``.

    ``a`` bundles ``(A, dA)`` and ``b`` bundles ``(b, db)``.  The value is
    the partial-pivoting solve of ``A x = b``; the difference follows the
    closed form in the module docstring.  Passing a :class:`SolveCounters`
    records which branch evaluated the bracketed factor.
    """
    if a.n != len(b):
        raise ShapeError(f"shape mismatch: {a.n}x{a.n} system, rhs {len(b)}")
    values = _solve(a.values, b.values, "the base system")

    # B = dA A^-1, via A^T Y^T = dA^T.
    bmat = _solve(a.values.T, a.deltas.T, "the base system").T
    eye = np.eye(a.n)
    norm_b = float(np.linalg.norm(bmat, np.inf)) if a.n else 0.0
    if norm_b <= 0.5:
        shrink = _neumann_minus_identity(bmat)
        if counters is not None:
            counters.series += 1
    else:
        shrink = _solve(eye + bmat, eye, "the stepped system") - eye
        if counters is not None:
            counters.direct += 1
    carried = _solve(eye + bmat, b.deltas, "the stepped system")
    deltas = _solve(a.values, shrink @ b.values + carried, "the base system")
    return DeltaVector(values, deltas)


def _neumann_minus_identity(bmat):
    """(I+B)^-1 - I as the series -B + B^2 - B^3 + ..., identity dropped.

    Terms accumulate until the next term's infinity norm falls below
    ``UNIT_ROUNDOFF`` times the accumulated norm; a zero perturbation
    yields the empty sum immediately.
    """
    total = np.zeros_like(bmat)
    term = -bmat
    for _ in range(NEUMANN_MAX_TERMS):
        term_norm = np.linalg.norm(term, np.inf)
        if term_norm <= UNIT_ROUNDOFF * np.linalg.norm(total, np.inf):
            return total
        total = total + term
        term = -term @ bmat
    raise ConvergenceError(
        f"difference series did not settle in {NEUMANN_MAX_TERMS} terms")


def load_matrix(stream):
    """Read the text matrix format: first line n, then n whitespace rows."""
    lines = [ln.strip() for ln in stream.read().splitlines() if ln.strip()]
    if not lines:
        raise FileFormatError("empty matrix file")
    try:
        n = int(lines[0])
    except ValueError:
        raise FileFormatError(f"first line must be the dimension, got "
                              f"{lines[0]!r}") from None
    if n < 1 or n > MAX_DIM:
        raise FileFormatError(f"dimension must be in 1..{MAX_DIM}, got {n}")
    if len(lines) != n + 1:
        raise FileFormatError(f"expected {n} rows after the dimension, "
                              f"found {len(lines) - 1}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != n:
            raise FileFormatError(f"expected {n} entries per row, got "
                                  f"{len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise FileFormatError(str(exc)) from None
    out = np.array(rows)
    if not np.all(np.isfinite(out)):
        raise FileFormatError("matrix entries must be finite")
    return out
