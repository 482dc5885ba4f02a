"""Piecewise-linear approximation of Lipschitz targets on uniform knots.

Two error metrics coexist on purpose. `segment_bound` is the worst-case
knot count guaranteeing an integral (L1) tolerance for any L-Lipschitz
function. `min_segments` searches for the empirically smallest count for
one concrete target under either the sup or the L1 metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgError, CapError
from .funcspace import Interval, ScalarTarget

DEFAULT_GRID_PER_SEGMENT = 64
DEFAULT_SEGMENT_CAP = 10_000_000


@dataclass(frozen=True)
class UniformPWL:
    """Linear interpolant of a target at n_segments+1 uniform knots."""

    interval: Interval
    n_segments: int
    knot_values: np.ndarray

    def __post_init__(self):
        if self.n_segments < 1:
            raise ArgError(f"need at least one segment, got {self.n_segments}")
        if len(self.knot_values) != self.n_segments + 1:
            raise ArgError(
                f"knot count {len(self.knot_values)} != n_segments+1 = {self.n_segments + 1}"
            )

    @property
    def knots(self) -> np.ndarray:
        return np.linspace(self.interval.a, self.interval.b, self.n_segments + 1)

    def __call__(self, x):
        # np.interp returns the stored value exactly when x hits a knot
        return np.interp(x, self.knots, self.knot_values)


@dataclass(frozen=True)
class ApproxReport:
    n_segments: int
    sup_error: float
    l1_error: float


def segment_bound(L: float, interval: Interval, eps: float) -> int:
    """Segments sufficient for integral error <= eps for ANY L-Lipschitz function.

    ceil(L (b-a)^2 / (4 eps)), clamped to >= 1 so a constant target still
    gets one segment.
    """
    if eps <= 0:
        raise ArgError(f"eps must be > 0, got {eps}")
    if L < 0:
        raise ArgError(f"L must be >= 0, got {L}")
    return max(1, math.ceil(L * interval.width**2 / (4.0 * eps)))


def interpolate_uniform(target: ScalarTarget, n: int) -> UniformPWL:
    """Interpolate `target` at n+1 uniform knots over its interval."""
    if n < 1:
        raise ArgError(f"n must be >= 1, got {n}")
    knots = target.interval.grid(n + 1)
    return UniformPWL(target.interval, n, target.eval_array(knots))


def _segment_grid(pwl: UniformPWL, grid_per_segment: int) -> np.ndarray:
    """All evaluation points, shaped (n_segments, grid_per_segment + 1)."""
    knots = pwl.knots
    t = np.linspace(0.0, 1.0, grid_per_segment + 1)
    return knots[:-1, None] + np.diff(knots)[:, None] * t[None, :]


def approx_error(
    target: ScalarTarget,
    pwl: UniformPWL,
    metric: str = "sup",
    grid_per_segment: int = DEFAULT_GRID_PER_SEGMENT,
) -> float:
    """Sup or L1 distance between target and interpolant on a per-segment grid.

    sup: max |f - fhat| over the composite grid.
    l1:  composite trapezoid rule applied to |f - fhat|.
    """
    if metric not in ("sup", "l1"):
        raise ArgError(f"metric must be 'sup' or 'l1', got {metric!r}")
    if grid_per_segment < 8:
        raise ArgError(f"grid_per_segment must be >= 8, got {grid_per_segment}")
    xs = _segment_grid(pwl, grid_per_segment)
    err = np.abs(target.eval_array(xs) - pwl(xs))
    if metric == "sup":
        return float(err.max())
    h = pwl.interval.width / pwl.n_segments / grid_per_segment
    # trapezoid per segment, summed; segment endpoints are duplicated in xs
    # so no weight is double-counted
    return float(np.sum(np.trapezoid(err, dx=h, axis=1)))


def report(target: ScalarTarget, pwl: UniformPWL, grid_per_segment: int = DEFAULT_GRID_PER_SEGMENT) -> ApproxReport:
    return ApproxReport(
        n_segments=pwl.n_segments,
        sup_error=approx_error(target, pwl, "sup", grid_per_segment),
        l1_error=approx_error(target, pwl, "l1", grid_per_segment),
    )


def min_segments(
    target: ScalarTarget,
    eps: float,
    metric: str = "sup",
    grid_per_segment: int = DEFAULT_GRID_PER_SEGMENT,
    cap: int = DEFAULT_SEGMENT_CAP,
) -> int:
    """Smallest uniform-knot segment count whose error is <= eps.

    Doubling search finds a satisfying count, then a linear backscan walks
    down through the contiguous satisfying run (the error is not strictly
    monotone in n for oscillatory targets, so bisection is unsafe).
    """
    if eps <= 0:
        raise ArgError(f"eps must be > 0, got {eps}")

    def err(n: int) -> float:
        return approx_error(target, interpolate_uniform(target, n), metric, grid_per_segment)

    n = 1
    while err(n) > eps:
        n *= 2
        if n > cap:
            raise CapError(f"min_segments exceeded cap {cap} for {target.id!r} at eps={eps}")
    while n > 1 and err(n - 1) <= eps:
        n -= 1
    return n


def reduction_percent(n_f: int, n_r: int) -> float:
    """Percent reduction 100 (n_f - n_r) / n_f; requires n_f >= n_r >= 1."""
    if n_r < 1:
        raise ArgError(f"n_r must be >= 1, got {n_r}")
    if n_r > n_f:
        raise ArgError(
            f"n_r={n_r} > n_f={n_f}: residual needs more segments than the original, "
            "which violates the smoother-residual assumption"
        )
    return 100.0 * (n_f - n_r) / n_f
