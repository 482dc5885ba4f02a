"""Intelligent Driver Model: acceleration law, Euler simulation, calibration.

The car-following law gives follower acceleration from speed, gap and speed
difference. `CALIBRATED_PARAMS` is the reference parameter set shipped with
the package (calibrated on highway automated-vehicle trajectories); the
acceleration exponent is not part of that set and defaults to the standard
value 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ArgError, CollisionError, StateError

DEFAULT_DELTA = 4.0

DEFAULT_CALIBRATION_RANGES: dict[str, tuple[float, float]] = {
    "v0": (10.0, 40.0),
    "a_max": (0.1, 3.0),
    "b": (0.5, 5.0),
    "s0": (0.5, 5.0),
    "T_headway": (0.5, 3.0),
}

_CALIBRATION_FIELDS = tuple(DEFAULT_CALIBRATION_RANGES)


@dataclass(frozen=True)
class IDMParams:
    """Model parameters; all strictly positive.

    v0: desired velocity (m/s), a_max: maximum acceleration (m/s^2),
    b: comfortable deceleration (m/s^2), s0: minimum gap (m),
    T_headway: desired time headway (s), delta: acceleration exponent.
    """

    v0: float
    a_max: float
    b: float
    s0: float
    T_headway: float
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        for name in ("v0", "a_max", "b", "s0", "T_headway", "delta"):
            if getattr(self, name) <= 0:
                raise ArgError(f"IDM parameter {name} must be > 0, got {getattr(self, name)}")


CALIBRATED_PARAMS = IDMParams(v0=23.058, a_max=0.572, b=2.601, s0=1.605, T_headway=1.165)


@dataclass(frozen=True)
class CFState:
    """Instantaneous car-following state: follower speed, leader speed, gap."""

    v: float
    v_lead: float
    s: float

    def __post_init__(self):
        if self.v < 0 or self.v_lead < 0:
            raise StateError(f"speeds must be >= 0, got v={self.v}, v_lead={self.v_lead}")
        if self.s <= 0:
            raise StateError(f"gap must be > 0, got s={self.s}")


def idm_desired_gap(state: CFState, p: IDMParams) -> float:
    """Desired gap s0 + v T + v dv / (2 sqrt(a_max b)), dv = v_lead - v; unclamped."""
    return float(_desired_gap_arrays(state.v, state.v_lead, p))


def idm_accel(state: CFState, p: IDMParams) -> float:
    """a_max [1 - (v/v0)^delta - (s*/s)^2]; negative values mean braking."""
    if state.s <= 0:
        raise StateError(f"gap must be > 0, got s={state.s}")
    return float(idm_accel_arrays(state.v, state.v_lead, state.s, p))


def _desired_gap_arrays(v, v_lead, p: IDMParams):
    dv = v_lead - v
    return p.s0 + v * p.T_headway - v * dv / (2.0 * math.sqrt(p.a_max * p.b))


def idm_accel_arrays(v, v_lead, s, p: IDMParams):
    """Vectorized acceleration law; inputs broadcast like numpy arrays."""
    s_star = _desired_gap_arrays(v, v_lead, p)
    return p.a_max * (1.0 - (v / p.v0) ** p.delta - (s_star / s) ** 2)


def equilibrium_gap(v: float, p: IDMParams) -> float:
    """Gap at which acceleration vanishes for matched speeds (dv = 0).

    Exists only for v < v0; at v = 0 it reduces to s0.
    """
    if not 0 <= v < p.v0:
        raise ArgError(f"equilibrium requires 0 <= v < v0={p.v0}, got {v}")
    return (p.s0 + v * p.T_headway) / math.sqrt(1.0 - (v / p.v0) ** p.delta)


@dataclass(frozen=True)
class LeaderSeries:
    """Uniformly sampled leader trajectory: times, speeds, positions."""

    t: np.ndarray
    v: np.ndarray
    x: np.ndarray


@dataclass(frozen=True)
class FollowerTrajectory:
    """Simulated follower: times, speeds, applied accelerations, gaps."""

    t: np.ndarray
    v: np.ndarray
    a: np.ndarray
    s: np.ndarray


def simulate_follower(
    leader: LeaderSeries,
    p: IDMParams,
    dt: float,
    init: CFState,
    accel_noise: Optional[np.ndarray] = None,
) -> FollowerTrajectory:
    """Explicit-Euler follower simulation behind a prescribed leader.

    Per step: a = idm_accel(+ optional additive noise), v <- max(0, v + a dt),
    positions integrate the pre-update speeds. Raises CollisionError with the
    offending step index if the gap collapses.
    """
    if dt <= 0:
        raise ArgError(f"dt must be > 0, got {dt}")
    n = len(leader.t)
    if n == 0:
        empty = np.array([])
        return FollowerTrajectory(empty, empty.copy(), empty.copy(), empty.copy())
    if accel_noise is not None and len(accel_noise) != n:
        raise ArgError(f"noise length {len(accel_noise)} != series length {n}")
    v = np.zeros(n)
    a = np.zeros(n)
    s = np.zeros(n)
    x_f = leader.x[0] - init.s
    v[0] = init.v
    for k in range(n):
        s[k] = leader.x[k] - x_f
        if s[k] <= 0:
            raise CollisionError(k)
        a_k = idm_accel_arrays(v[k], leader.v[k], s[k], p)
        if accel_noise is not None:
            a_k = a_k + accel_noise[k]
        a[k] = a_k
        if k + 1 < n:
            v[k + 1] = max(0.0, v[k] + a_k * dt)
            x_f += v[k] * dt
    return FollowerTrajectory(np.asarray(leader.t, dtype=float).copy(), v, a, s)


@dataclass(frozen=True)
class CalibrationData:
    """One-step calibration targets: states and the observed accelerations."""

    v: np.ndarray
    v_lead: np.ndarray
    s: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        n = len(self.accel)
        if not (len(self.v) == len(self.v_lead) == len(self.s) == n):
            raise ArgError("calibration arrays must share one length")


def score_params(data: CalibrationData, p: IDMParams) -> float:
    """One-step acceleration MSE of the model against the observations."""
    if len(data.accel) == 0:
        raise ArgError("empty calibration dataset")
    pred = idm_accel_arrays(data.v, data.v_lead, data.s, p)
    return float(np.mean((pred - data.accel) ** 2))


def calibrate_monte_carlo(
    data: CalibrationData,
    ranges: Optional[dict[str, tuple[float, float]]] = None,
    num_samples: int = 100_000,
    seed: int = 0,
    delta: float = DEFAULT_DELTA,
    chunk: int = 2000,
) -> tuple[IDMParams, float]:
    """Uniform random search over parameter boxes; returns the argmin and its MSE.

    Deterministic given the seed; ties break toward the lowest sample index.
    The exponent is held fixed at `delta` rather than searched.
    """
    if num_samples < 1:
        raise ArgError(f"num_samples must be >= 1, got {num_samples}")
    if len(data.accel) == 0:
        raise ArgError("empty calibration dataset")
    ranges = dict(DEFAULT_CALIBRATION_RANGES if ranges is None else ranges)
    unknown = set(ranges) - set(_CALIBRATION_FIELDS)
    if unknown:
        raise ArgError(f"unknown calibration fields: {sorted(unknown)}")
    for name, (lo, hi) in ranges.items():
        if not (0 < lo < hi):
            raise ArgError(f"bad range for {name}: ({lo}, {hi})")

    rng = np.random.default_rng(seed)
    names = [n for n in _CALIBRATION_FIELDS if n in ranges]
    draws = {
        n: rng.uniform(ranges[n][0], ranges[n][1], num_samples) for n in names
    }
    v, v_lead, s, accel = data.v, data.v_lead, data.s, data.accel
    dv = v_lead - v
    best_mse = math.inf
    best_idx = -1
    for start in range(0, num_samples, chunk):
        end = min(start + chunk, num_samples)
        v0 = draws["v0"][start:end, None]
        a_max = draws["a_max"][start:end, None]
        b = draws["b"][start:end, None]
        s0 = draws["s0"][start:end, None]
        Th = draws["T_headway"][start:end, None]
        s_star = s0 + v[None, :] * Th - v[None, :] * dv[None, :] / (2.0 * np.sqrt(a_max * b))
        pred = a_max * (1.0 - (v[None, :] / v0) ** delta - (s_star / s[None, :]) ** 2)
        mse = np.mean((pred - accel[None, :]) ** 2, axis=1)
        i = int(np.argmin(mse))
        if mse[i] < best_mse:
            best_mse = float(mse[i])
            best_idx = start + i
    params = IDMParams(
        v0=float(draws["v0"][best_idx]),
        a_max=float(draws["a_max"][best_idx]),
        b=float(draws["b"][best_idx]),
        s0=float(draws["s0"][best_idx]),
        T_headway=float(draws["T_headway"][best_idx]),
        delta=delta,
    )
    return params, best_mse


def save_calibration(path, params: IDMParams, mse: float) -> None:
    """Write the six parameter fields and the achieved MSE as key=value lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for name in ("v0", "a_max", "b", "s0", "T_headway", "delta"):
            fh.write(f"{name}={getattr(params, name):.9g}\n")
        fh.write(f"mse={mse:.9g}\n")


def load_calibration(path) -> tuple[IDMParams, float]:
    values: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, raw = line.partition("=")
            values[key] = float(raw)
    mse = values.pop("mse")
    return IDMParams(**values), mse
