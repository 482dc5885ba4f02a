"""Gradient-descent runner and the matching average-gap bound calculators.

Runs plain (sub)gradient descent with a constant or 1/sqrt(t) step schedule,
projecting iterates onto the target's interval, and records the value
trajectory. The two bound calculators give the worst-case average optimality
gap for L-Lipschitz convex objectives whose domain lies within distance B of
a minimizer; lowering L tightens both, which is what makes the smoother
residual objective converge in fewer iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ArgError, DivergedError
from .funcspace import Interval, ScalarTarget

_FD_STEP = 1e-6
_FSTAR_GRID = 100_001


@dataclass(frozen=True)
class GDConfig:
    """Settings for one descent run.

    schedule "constant" uses step eta every iteration; "diminishing" uses
    eta_t = 1/sqrt(t). stop_on "value_gap" stops once f(x_t) - f_star <= tol,
    "iterate_step" once |x_t - x_{t-1}| <= tol.
    """

    x0: float = 0.0
    schedule: str = "constant"
    eta: float = 0.1
    max_iters: int = 1000
    tol: float = 1e-3
    stop_on: str = "value_gap"

    def __post_init__(self):
        if self.schedule not in ("constant", "diminishing"):
            raise ArgError(f"schedule must be 'constant' or 'diminishing', got {self.schedule!r}")
        if self.schedule == "constant" and self.eta <= 0:
            raise ArgError(f"eta must be > 0, got {self.eta}")
        if self.max_iters < 1:
            raise ArgError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol <= 0:
            raise ArgError(f"tol must be > 0, got {self.tol}")
        if self.stop_on not in ("value_gap", "iterate_step"):
            raise ArgError(f"stop_on must be 'value_gap' or 'iterate_step', got {self.stop_on!r}")


@dataclass(frozen=True)
class GDTrace:
    """Post-update iterates x_1..x_K and their values; x0 lives in the config.

    f_star is the best known objective value, B the domain-radius bound
    max_x |x - x_star|. iterations_to_tol is the first t at which the stop
    criterion held, or None if it never did within max_iters.
    """

    iterates: np.ndarray
    values: np.ndarray
    iterations_to_tol: Optional[int]
    f_star: float
    B: float


def _grid_optimum(objective: ScalarTarget) -> tuple[float, float]:
    xs = objective.interval.grid(_FSTAR_GRID)
    ys = objective.eval_array(xs)
    i = int(np.argmin(ys))
    return float(xs[i]), float(ys[i])


def run_gd(
    objective: ScalarTarget,
    config: GDConfig,
    f_star: Optional[float] = None,
    x_star: Optional[float] = None,
) -> GDTrace:
    """Projected (sub)gradient descent on `objective` over its interval.

    Uses the target's closed-form derivative when present, otherwise a
    central difference with step 1e-6. When f_star/x_star are not supplied
    they are estimated on a dense grid (f_star is needed for the value_gap
    stop rule; x_star only for the reported domain radius B).
    """
    a, b = objective.interval.a, objective.interval.b
    if not a <= config.x0 <= b:
        raise ArgError(f"x0={config.x0} outside [{a}, {b}]")
    if f_star is None or x_star is None:
        gx, gf = _grid_optimum(objective)
        x_star = gx if x_star is None else x_star
        f_star = gf if f_star is None else f_star
    B = max(abs(a - x_star), abs(b - x_star))

    if objective.derivative is not None:
        grad = objective.derivative
    else:
        fn = objective.fn
        grad = lambda x: (fn(x + _FD_STEP) - fn(x - _FD_STEP)) / (2.0 * _FD_STEP)

    xs: list[float] = []
    fs: list[float] = []
    hit: Optional[int] = None
    x = float(config.x0)
    for t in range(1, config.max_iters + 1):
        g = float(grad(x))
        if not math.isfinite(g):
            raise DivergedError(f"non-finite gradient at x={x} (iteration {t})")
        eta_t = config.eta if config.schedule == "constant" else 1.0 / math.sqrt(t)
        x_new = min(max(x - eta_t * g, a), b)
        f_new = float(objective.fn(x_new))
        if not math.isfinite(f_new):
            raise DivergedError(f"non-finite value at x={x_new} (iteration {t})")
        xs.append(x_new)
        fs.append(f_new)
        if config.stop_on == "value_gap":
            stop = f_new - f_star <= config.tol
        else:
            stop = abs(x_new - x) <= config.tol
        x = x_new
        if stop:
            hit = t
            break
    return GDTrace(np.array(xs), np.array(fs), hit, float(f_star), float(B))


def avg_gap(trace: GDTrace) -> float:
    """Mean optimality gap (1/T) sum_t (f(x_t) - f_star) over the recorded run."""
    if len(trace.values) == 0:
        raise ArgError("empty trace")
    return float(np.mean(trace.values) - trace.f_star)


def constant_step_bound(B: float, L: float, eta: float, T: int) -> float:
    """Average-gap bound B^2/(2 eta T) + eta L^2/2 for a constant step."""
    if eta <= 0:
        raise ArgError(f"eta must be > 0, got {eta}")
    if T < 1:
        raise ArgError(f"T must be >= 1, got {T}")
    return B * B / (2.0 * eta * T) + eta * L * L / 2.0


def diminishing_bound(B: float, L: float, T: int) -> float:
    """Average-gap bound (B^2/2 + L^2)/sqrt(T) for the 1/sqrt(t) schedule."""
    if T < 1:
        raise ArgError(f"T must be >= 1, got {T}")
    return (B * B / 2.0 + L * L) / math.sqrt(T)


def sqrt_sum_check(T: int) -> tuple[float, float]:
    """(sum_{t=1..T} 1/sqrt(t), 2 sqrt(T)); the sum never exceeds the bound."""
    if T < 1:
        raise ArgError(f"T must be >= 1, got {T}")
    s = float(np.sum(1.0 / np.sqrt(np.arange(1, T + 1, dtype=float))))
    return s, 2.0 * math.sqrt(T)


def abs_objective(half_width: float = 1.0) -> ScalarTarget:
    """|x| on [-w, w]: convex, 1-Lipschitz, minimum 0 at 0."""
    return ScalarTarget(
        id="abs",
        fn=np.abs,
        interval=Interval(-half_width, half_width),
        lipschitz=1.0,
        derivative=np.sign,
    )


def quadratic_objective(half_width: float = 1.0) -> ScalarTarget:
    """x^2 clipped to [-w, w]: convex, 2w-Lipschitz there, minimum 0 at 0."""
    return ScalarTarget(
        id="quadratic",
        fn=lambda x: x * x,
        interval=Interval(-half_width, half_width),
        lipschitz=2.0 * half_width,
        derivative=lambda x: 2.0 * x,
    )


def huber_objective(delta: float = 0.5, half_width: float = 1.0) -> ScalarTarget:
    """Huber loss on [-w, w]: quadratic core |x|<=delta, linear tails; delta-Lipschitz."""
    if delta <= 0:
        raise ArgError(f"delta must be > 0, got {delta}")

    def f(x):
        ax = np.abs(x)
        return np.where(ax <= delta, 0.5 * x * x, delta * (ax - 0.5 * delta))

    def d(x):
        return np.clip(x, -delta, delta)

    return ScalarTarget(
        id="huber",
        fn=f,
        interval=Interval(-half_width, half_width),
        lipschitz=float(delta),
        derivative=d,
    )
