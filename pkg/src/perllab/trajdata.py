"""Trajectory CSV ingestion, sliding windows, splits, and a synthetic generator.

The single ingestion format is a six-column CSV (header `t,v_f,a_f,v_l,a_l,
spacing`, UTF-8, '.' decimals) sampled uniformly in time. The synthetic
generator simulates a follower behind a configurable leader profile with
seeded Gaussian acceleration noise and writes the identical schema, standing
in for externally licensed trajectory datasets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ArgError, LengthError, SamplingError, SchemaError
from .perl import WindowSample
from .physics import CFState, IDMParams, LeaderSeries, equilibrium_gap, simulate_follower

CSV_COLUMNS = ("t", "v_f", "a_f", "v_l", "a_l", "spacing")
DT = 0.1
DT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class TrajectoryRecord:
    """One uniformly sampled step of a leader/follower pair."""

    t: float
    v_f: float
    a_f: float
    v_l: float
    a_l: float
    spacing: float

    def validate(self, row: int) -> None:
        for name in CSV_COLUMNS:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite {name} at row {row}")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be > 0 at row {row}, got {self.spacing}")
        if self.v_f < 0 or self.v_l < 0:
            raise ValueError(f"speeds must be >= 0 at row {row}")


def load_csv(path) -> list[TrajectoryRecord]:
    """Parse and validate a trajectory CSV.

    Raises SchemaError for a wrong header, ValueError (with the row number)
    for non-finite fields, negative speeds or non-positive spacing, and
    SamplingError at the first row breaking uniform time sampling.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("<empty file>") from None
        if tuple(h.strip() for h in header) != CSV_COLUMNS:
            missing = [c for c in CSV_COLUMNS if c not in header]
            raise SchemaError(missing[0] if missing else ",".join(header))
        records = []
        for row_idx, row in enumerate(reader, start=1):
            if len(row) != len(CSV_COLUMNS):
                raise SchemaError(f"row {row_idx} has {len(row)} fields")
            try:
                rec = TrajectoryRecord(*(float(v) for v in row))
            except ValueError:
                raise ValueError(f"unparseable number at row {row_idx}") from None
            rec.validate(row_idx)
            records.append(rec)
    ts = np.array([r.t for r in records])
    if len(ts) >= 2:
        dts = np.diff(ts)
        bad = np.nonzero(np.abs(dts - dts[0]) > DT_TOLERANCE)[0]
        if len(bad):
            raise SamplingError(int(bad[0]) + 2)  # 1-based data row of the offender
    return records


def write_csv(records: Sequence[TrajectoryRecord], path) -> None:
    """Write records with 9-significant-digit fields; output is deterministic."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([f"{getattr(r, c):.9g}" for c in CSV_COLUMNS])


def make_windows(records: Sequence[TrajectoryRecord], k: int = 30) -> list[WindowSample]:
    """Sliding windows: features from steps i..i+k-1, label a_f at step i+k.

    Yields len(records) - k windows; windows never cross file boundaries
    (concatenate multiple files at the window level instead).
    """
    if k < 1:
        raise ArgError(f"k must be >= 1, got {k}")
    if len(records) < k + 1:
        raise LengthError(f"need at least {k + 1} records for k={k}, got {len(records)}")
    cols = np.array([[r.v_f, r.a_f, r.v_l, r.a_l, r.spacing] for r in records])
    labels = cols[:, 1]
    return [
        WindowSample(cols[i : i + k], float(labels[i + k]))
        for i in range(len(records) - k)
    ]


def split(dataset: list, fractions: tuple[float, float, float], seed: int):
    """Seeded shuffle then contiguous slicing into (train, val, test).

    The three parts are disjoint and jointly exhaust the dataset.
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ArgError(f"need three nonnegative fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ArgError(f"fractions must sum to 1, got {sum(fractions)}")
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * fractions[0]))
    n_val = int(round(n * fractions[1]))
    n_val = min(n_val, n - n_train)
    parts = (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])
    return tuple([dataset[i] for i in idx] for idx in parts)


# --- synthetic generator ----------------------------------------------------------


@dataclass(frozen=True)
class ConstantProfile:
    v: float

    def speeds(self, t: np.ndarray) -> np.ndarray:
        if self.v < 0:
            raise ArgError(f"leader speed must be >= 0, got {self.v}")
        return np.full_like(t, self.v)


@dataclass(frozen=True)
class SineProfile:
    mean: float
    amplitude: float
    period: float

    def speeds(self, t: np.ndarray) -> np.ndarray:
        if not 0 <= self.amplitude < self.mean:
            raise ArgError("need 0 <= amplitude < mean so the leader keeps moving")
        if self.period <= 0:
            raise ArgError(f"period must be > 0, got {self.period}")
        return self.mean + self.amplitude * np.sin(2.0 * np.pi * t / self.period)


@dataclass(frozen=True)
class RampProfile:
    """Piecewise-linear speed vertices (t, v); held constant outside the range."""

    points: tuple[tuple[float, float], ...]

    def speeds(self, t: np.ndarray) -> np.ndarray:
        if len(self.points) < 2:
            raise ArgError("need at least two ramp vertices")
        ts = np.array([p[0] for p in self.points])
        vs = np.array([p[1] for p in self.points])
        if np.any(np.diff(ts) <= 0):
            raise ArgError("ramp vertex times must increase")
        if np.any(vs < 0):
            raise ArgError("ramp speeds must be >= 0")
        return np.interp(t, ts, vs)


LeaderProfile = Union[ConstantProfile, SineProfile, RampProfile]


@dataclass(frozen=True)
class SynthConfig:
    duration: float
    leader_profile: LeaderProfile
    idm: IDMParams
    accel_noise_sigma: float = 0.0
    seed: int = 0
    dt: float = DT

    def __post_init__(self):
        if self.duration <= 0:
            raise ArgError(f"duration must be > 0, got {self.duration}")
        if self.accel_noise_sigma < 0:
            raise ArgError(f"noise sigma must be >= 0, got {self.accel_noise_sigma}")
        if self.dt <= 0:
            raise ArgError(f"dt must be > 0, got {self.dt}")


def synth_generate(config: SynthConfig) -> list[TrajectoryRecord]:
    """Simulate a follower behind the configured leader at uniform sampling.

    The follower starts at the equilibrium gap for the leader's initial
    speed; per-step Gaussian acceleration noise is seeded and additive. The
    recorded a_f is the applied (noisy) acceleration; a_l is the forward
    difference of the leader speeds with the final value repeated.
    """
    n = int(round(config.duration / config.dt))
    if n < 1:
        raise ArgError("duration shorter than one step")
    t = np.arange(n) * config.dt
    v_l = np.asarray(config.leader_profile.speeds(t), dtype=float)
    if np.any(v_l < 0):
        raise ArgError("leader profile produced negative speeds")
    x_l = np.concatenate([[0.0], np.cumsum(v_l[:-1]) * config.dt])
    a_l = np.zeros(n)
    if n >= 2:
        a_l[:-1] = np.diff(v_l) / config.dt
        a_l[-1] = a_l[-2]
    v_init = float(v_l[0])
    gap = equilibrium_gap(v_init, config.idm)
    noise = None
    if config.accel_noise_sigma > 0:
        rng = np.random.default_rng(config.seed)
        noise = config.accel_noise_sigma * rng.standard_normal(n)
    traj = simulate_follower(
        LeaderSeries(t, v_l, x_l),
        config.idm,
        config.dt,
        CFState(v=v_init, v_lead=v_init, s=gap),
        accel_noise=noise,
    )
    return [
        TrajectoryRecord(
            t=float(t[i]),
            v_f=float(traj.v[i]),
            a_f=float(traj.a[i]),
            v_l=float(v_l[i]),
            a_l=float(a_l[i]),
            spacing=float(traj.s[i]),
        )
        for i in range(n)
    ]
