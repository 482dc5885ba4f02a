"""One-dimensional target functions with domain intervals and Lipschitz constants.

A `ScalarTarget` bundles a real function with the interval it lives on and,
when known, its exact Lipschitz constant (sup of |f'| over the interval).
The built-in demo pair models the decomposition "ground truth = physics
trend + residual": the residual left after subtracting the trend is the
smoother of the two and carries the smaller constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ArgError, DomainError, EvalError

DEFAULT_GRID_POINTS = 100_000


@dataclass(frozen=True)
class Interval:
    """Closed interval [a, b] with a < b, both finite."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ArgError(f"interval bounds must be finite, got [{self.a}, {self.b}]")
        if not self.a < self.b:
            raise ArgError(f"interval requires a < b, got [{self.a}, {self.b}]")

    @property
    def width(self) -> float:
        return self.b - self.a

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.a, self.b, n)


@dataclass(frozen=True)
class ScalarTarget:
    """A real function on an interval, optionally with derivative and Lipschitz constant.

    `fn` (and `derivative`, when given) must accept scalars and numpy arrays.
    `lipschitz`, when set, is the exact sup|f'| over the interval.
    Instances are immutable and evaluation is pure.
    """

    id: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    interval: Interval = Interval(0.0, 1.0)
    lipschitz: Optional[float] = None
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.lipschitz is not None and self.lipschitz < 0:
            raise ArgError(f"lipschitz constant must be >= 0, got {self.lipschitz}")

    def __call__(self, x):
        return self.fn(x)

    def eval_array(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized evaluation with a scalar-function fallback."""
        xs = np.asarray(xs, dtype=float)
        out = np.asarray(self.fn(xs), dtype=float)
        if out.shape != xs.shape:
            out = np.array([float(self.fn(float(x))) for x in xs.ravel()]).reshape(xs.shape)
        return out


def _f_demo() -> ScalarTarget:
    return ScalarTarget(
        id="f_demo",
        fn=lambda x: np.cos(x) - np.sin(x),
        interval=Interval(0.0, 10.0),
        lipschitz=math.sqrt(2.0),
        derivative=lambda x: -np.sin(x) - np.cos(x),
    )


def _r_demo() -> ScalarTarget:
    return ScalarTarget(
        id="r_demo",
        fn=lambda x: -np.sin(x),
        interval=Interval(0.0, 10.0),
        lipschitz=1.0,
        derivative=lambda x: -np.cos(x),
    )


def _phys_demo() -> ScalarTarget:
    return ScalarTarget(
        id="phys_demo",
        fn=np.cos,
        interval=Interval(0.0, 10.0),
        lipschitz=1.0,
        derivative=lambda x: -np.sin(x),
    )


_BUILTINS: dict[str, Callable[[], ScalarTarget]] = {
    "f_demo": _f_demo,
    "r_demo": _r_demo,
    "phys_demo": _phys_demo,
}


def make_builtin(name: str) -> ScalarTarget:
    """Return a built-in demo target by name.

    f_demo = cos(x) - sin(x), r_demo = -sin(x), phys_demo = cos(x), all on
    [0, 10], each carrying its exact Lipschitz constant.
    """
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise NameError(f"unknown builtin target {name!r}; choose from {sorted(_BUILTINS)}") from None


def estimate_lipschitz(target: ScalarTarget, grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """Max consecutive difference quotient of `target` on a uniform grid.

    For C^1 targets this converges to sup|f'| from below as the grid is
    refined; consecutive pairs (not all pairs) keep it O(n).
    """
    if grid_points < 2:
        raise ArgError(f"grid_points must be >= 2, got {grid_points}")
    xs = target.interval.grid(grid_points)
    ys = target.eval_array(xs)
    if not np.all(np.isfinite(ys)):
        bad = xs[~np.isfinite(ys)][0]
        raise EvalError(f"target {target.id!r} is non-finite at x={bad}")
    h = target.interval.width / (grid_points - 1)
    return float(np.max(np.abs(np.diff(ys))) / h)


def residual_target(g: ScalarTarget, phys: ScalarTarget) -> ScalarTarget:
    """Target evaluating g(x) - phys(x); its Lipschitz constant is left unset.

    Both inputs must live on the identical interval.
    """
    if g.interval != phys.interval:
        raise DomainError(
            f"interval mismatch: {g.id!r} on [{g.interval.a}, {g.interval.b}] vs "
            f"{phys.id!r} on [{phys.interval.a}, {phys.interval.b}]"
        )
    deriv = None
    if g.derivative is not None and phys.derivative is not None:
        g_d, p_d = g.derivative, phys.derivative
        deriv = lambda x: g_d(x) - p_d(x)
    g_fn, p_fn = g.fn, phys.fn
    return ScalarTarget(
        id=f"residual({g.id}-{phys.id})",
        fn=lambda x: g_fn(x) - p_fn(x),
        interval=g.interval,
        lipschitz=None,
        derivative=deriv,
    )


def with_lipschitz(target: ScalarTarget, value: float) -> ScalarTarget:
    """Copy of `target` with the Lipschitz field set."""
    return replace(target, lipschitz=value)
