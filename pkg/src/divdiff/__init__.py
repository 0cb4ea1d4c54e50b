"""divdiff: accurate finite differences f(x+s) - f(x) for arbitrarily small s.

Subtracting two nearby objective values cancels catastrophically; this
package instead propagates (value, delta) pairs through arithmetic with
rewriting rules whose subtractions are always benign, so the difference
comes out accurate to roughly ``|s| * eps`` at any step size.  On top of
the scalar rules sit a small expression language, piecewise-cubic and
linear-solve propagation, optimization acceptance tests, and a stagnation
detector that notices when an optimizer has exhausted representable
progress.
"""

from .core import (AccuracyBudget, DEFAULT_BUDGET, DeltaScalar,
                   EXPM1_TAYLOR_TERMS, UNIT_ROUNDOFF, add, div, exp,
                   expm1_taylor, lift_parameter, log, mul, negate, power,
                   reciprocal, seed_input, sqrt, square, sub)
from .branching import (CubicSpline, bounded_loop, load_spline, penalty_delta,
                        save_spline, spline_eval_delta, spline_from_left_pieces)
from .errors import (ComputeOverflowError, ConvergenceError,
                     DegenerateModelError, DivDiffError, DomainError,
                     FileFormatError, InvalidInputError, ParseError,
                     ShapeError, SingularMatrixError, SplineValidationError,
                     UnsupportedFunctionError, WindowStateError)
from .expr import Expr, arity_of, eval_delta, eval_plain, format_expr, parse
from .linalg import (DeltaMatrix, DeltaVector, SolveCounters, dot_delta,
                     load_matrix, matvec_delta, solve_delta)
from .optim import (DeltaObjective, QuadraticObjective, armijo_accepts,
                    quadratic_delta, trust_region_rho)
from .oracle import (oracle_delta, oracle_expm1, oracle_gradient,
                     oracle_solve_delta, oracle_spline_delta, oracle_value)
from .stagnation import (ExperimentReport, RunResult, StagnationWindow,
                         is_stagnant, push, run_quadratic_experiment)

__version__ = "0.1.0"

__all__ = [
    "AccuracyBudget", "DEFAULT_BUDGET", "DeltaScalar", "EXPM1_TAYLOR_TERMS",
    "UNIT_ROUNDOFF", "add", "div", "exp", "expm1_taylor", "lift_parameter",
    "log", "mul", "negate", "power", "reciprocal", "seed_input", "sqrt",
    "square", "sub",
    "CubicSpline", "bounded_loop", "load_spline", "penalty_delta",
    "save_spline", "spline_eval_delta", "spline_from_left_pieces",
    "ComputeOverflowError", "ConvergenceError", "DegenerateModelError",
    "DivDiffError", "DomainError", "FileFormatError", "InvalidInputError",
    "ParseError", "ShapeError", "SingularMatrixError",
    "SplineValidationError", "UnsupportedFunctionError", "WindowStateError",
    "Expr", "arity_of", "eval_delta", "eval_plain", "format_expr", "parse",
    "DeltaMatrix", "DeltaVector", "SolveCounters", "dot_delta",
    "load_matrix", "matvec_delta", "solve_delta",
    "DeltaObjective", "QuadraticObjective", "armijo_accepts",
    "quadratic_delta", "trust_region_rho",
    "oracle_delta", "oracle_expm1", "oracle_gradient", "oracle_solve_delta",
    "oracle_spline_delta", "oracle_value",
    "ExperimentReport", "RunResult", "StagnationWindow", "is_stagnant",
    "push", "run_quadratic_experiment",
]
