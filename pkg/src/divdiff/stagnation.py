"""Stagnation detection from telescoped differences, plus the experiment.

For successive iterates the end-to-end difference equals the sum of the
stepwise differences exactly in real arithmetic:

    f(oldest) - f(newest) = sum over steps of f(x_i) - f(x_i+1)

With an accurate difference evaluator both sides agree to roundoff while
the optimizer still makes representable progress.  Once the iterates sink
into the evaluator's noise floor the identity breaks down; the window
flags stagnation when the end-to-end difference drops below the telescoped
sum by the trigger factor while the sum still reports descent.

``run_quadratic_experiment`` races this detector against the usual
objective-value plateau rule on a quadratic, where the two rules stop at
provably different error levels (about sqrt(eps) versus eps relative).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InvalidInputError, ShapeError, WindowStateError

#: Objective-value plateau rule: no relative decrease above this for
#: ``VALUE_PATIENCE`` consecutive iterations.
VALUE_DECREASE_TOL = 1e-15
VALUE_PATIENCE = 3

#: Consecutive bitwise-identical iterates after which a run stops; a frozen
#: iterate can make every stored stepwise difference exactly zero, which
#: the descent guard reports as not-stagnant forever.
FROZEN_PATIENCE = 3


@dataclass(frozen=True)
class StagnationWindow:
    """Sliding record of recent iterates and their stepwise differences.

    ``pair_deltas[k]`` is the difference evaluated at the newer iterate
    pointing back to the older one, i.e. ``f(x_k) - f(x_k+1)``, which is
    positive while the method descends.
    """

    capacity: int = 3
    trigger_factor: float = 2.0
    iterates: tuple = ()
    pair_deltas: tuple = ()

    def __post_init__(self):
        if not isinstance(self.capacity, int) or self.capacity < 3:
            raise InvalidInputError(
                f"capacity must be an int >= 3, got {self.capacity!r}")
        if not self.trigger_factor > 1.0:
            raise InvalidInputError(
                f"trigger factor must exceed 1, got {self.trigger_factor!r}")

    def __len__(self):
        return len(self.iterates)


def push(window, obj, x_new):
    """Append an iterate, recording the difference back to its predecessor.

    Returns a new window; the oldest entries fall off beyond capacity.
    """
    x_new = np.asarray(x_new, dtype=float)
    if x_new.shape != (obj.arity,):
        raise ShapeError(f"iterate must have shape ({obj.arity},), got "
                         f"{x_new.shape}")
    if not np.all(np.isfinite(x_new)):
        raise InvalidInputError("iterate must be finite")
    x_new = x_new.copy()
    x_new.flags.writeable = False
    iterates = window.iterates + (x_new,)
    pair_deltas = window.pair_deltas
    if len(iterates) > 1:
        prev = iterates[-2]
        pair_deltas = pair_deltas + (obj.evaluator(x_new, prev - x_new)[1],)
    if len(iterates) > window.capacity:
        iterates = iterates[-window.capacity:]
        pair_deltas = pair_deltas[-(window.capacity - 1):]
    return StagnationWindow(capacity=window.capacity,
                            trigger_factor=window.trigger_factor,
                            iterates=iterates, pair_deltas=pair_deltas)


def is_stagnant(window, obj):
    """Whether representable progress is exhausted over the window.

    Evaluates the end-to-end difference L from the newest iterate back to
    the oldest and compares it against the telescoped sum R of the stored
    stepwise differences (equal in exact arithmetic).  Stagnation is
    ``|L| < R / trigger_factor`` with ``R > 0``; a window whose sum does
    not report descent returns False rather than raising, so driver loops
    stay simple.
    """
    if len(window) < 3:
        raise WindowStateError(
            f"need at least 3 iterates, window holds {len(window)}")
    newest = window.iterates[-1]
    oldest = window.iterates[0]
    end_to_end = obj.evaluator(newest, oldest - newest)[1]
    telescoped = math.fsum(window.pair_deltas)
    if not telescoped > 0.0:
        return False
    return abs(end_to_end) < telescoped / window.trigger_factor


@dataclass(frozen=True)
class RunResult:
    """Outcome of one termination rule on the experiment problem."""

    rule: str
    iterations: int
    final_error: float
    stop_reason: str


@dataclass(frozen=True)
class ExperimentReport:
    objective_run: RunResult
    difference_run: RunResult
    error_ratio: float  # objective-rule error over difference-rule error


def run_quadratic_experiment(q, x0, max_iters, method="sd",
                             window_capacity=3, trigger_factor=2.0):
    """Race the two stagnation rules on a quadratic from the same start.

    Runs exact-line-search steepest descent (``method="sd"``) or Newton
    (``method="newton"``) twice: once stopping when the objective value
    shows no relative decrease above ``VALUE_DECREASE_TOL`` for
    ``VALUE_PATIENCE`` iterations, once stopping on the window test fed by
    the exact quadratic difference.  Reports each run's final relative
    error against the directly solved minimizer and the ratio of the two
    errors.  Raises ConvergenceError if an iterate drifts to 10 times the
    starting error.
    """
    if method not in ("sd", "newton"):
        raise InvalidInputError(f"method must be 'sd' or 'newton', got {method!r}")
    if not isinstance(max_iters, int) or max_iters < 0:
        raise InvalidInputError(f"max_iters must be a nonnegative int, got "
                                f"{max_iters!r}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (q.dim,):
        raise ShapeError(f"start must have shape ({q.dim},), got {x0.shape}")
    x_star = q.minimizer()
    star_norm = float(np.linalg.norm(x_star))
    start_err = float(np.linalg.norm(x0 - x_star))

    def rel_error(x):
        err = float(np.linalg.norm(x - x_star))
        return err / star_norm if star_norm > 0.0 else err

    def step(x):
        g = q.M @ x + q.d
        if method == "newton":
            return x - np.linalg.solve(q.M, g)
        curvature = float(g @ (q.M @ g))
        if curvature <= 0.0:  # g == 0: already at the exact minimizer
            return x
        alpha = float(g @ g) / curvature
        return x - alpha * g

    def check_divergence(x):
        if start_err > 0.0 and np.linalg.norm(x - x_star) > 10.0 * start_err:
            raise ConvergenceError(
                "iteration diverged: error grew 10x from the start")

    # Objective-value plateau rule.
    x = x0
    f_prev = q.value(x)
    flat = 0
    obj_iters = 0
    obj_reason = "max_iters"
    for _ in range(max_iters):
        x = step(x)
        obj_iters += 1
        check_divergence(x)
        f_new = q.value(x)
        decrease = f_prev - f_new
        scale = abs(f_prev) if f_prev != 0.0 else 1.0
        flat = flat + 1 if decrease <= VALUE_DECREASE_TOL * scale else 0
        f_prev = f_new
        if flat >= VALUE_PATIENCE:
            obj_reason = "objective_plateau"
            break
    objective_run = RunResult("objective", obj_iters, rel_error(x), obj_reason)

    # Divided-difference window rule.
    obj = q.delta_objective()
    window = push(StagnationWindow(capacity=window_capacity,
                                   trigger_factor=trigger_factor), obj, x0)
    x = x0
    frozen = 0
    diff_iters = 0
    diff_reason = "max_iters"
    for _ in range(max_iters):
        x_new = step(x)
        diff_iters += 1
        check_divergence(x_new)
        window = push(window, obj, x_new)
        frozen = frozen + 1 if np.array_equal(x_new, x) else 0
        x = x_new
        if frozen >= FROZEN_PATIENCE:
            diff_reason = "frozen_iterate"
            break
        if len(window) >= 3 and is_stagnant(window, obj):
            diff_reason = "stagnation"
            break
    difference_run = RunResult("divided-difference", diff_iters, rel_error(x),
                               diff_reason)

    obj_err = objective_run.final_error
    diff_err = difference_run.final_error
    if obj_err == diff_err:
        ratio = 1.0
    elif diff_err == 0.0:
        ratio = math.inf
    else:
        ratio = obj_err / diff_err
    return ExperimentReport(objective_run, difference_run, ratio)
