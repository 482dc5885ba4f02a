"""Physics + learned-residual composition for car-following prediction.

A window of recent leader/follower kinematics feeds two predictors: the
physics law applied to the window's final state (the model is memoryless)
and a network trained on what the physics gets wrong. Their sum is the
prediction; with a zero residual net it degenerates to pure physics, and
residual label + physics prediction reconstructs the ground truth exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from . import neural
from .errors import ArgError
from .neural import LSTMSpec, MLPSpec, TrainConfig
from .physics import CalibrationData, IDMParams, idm_accel_arrays

# feature channel order within a window
FEATURE_CHANNELS = ("v_f", "a_f", "v_l", "a_l", "spacing")
DEFAULT_WINDOW = 30


@dataclass(frozen=True)
class WindowSample:
    """k x 5 history (channels above) plus the next-step follower acceleration."""

    features: np.ndarray
    label: float

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 2 or feats.shape[1] != len(FEATURE_CHANNELS):
            raise ArgError(f"features must be (k, {len(FEATURE_CHANNELS)}), got {feats.shape}")
        if not np.all(np.isfinite(feats)) or not math.isfinite(self.label):
            raise ArgError("window contains non-finite values")
        if np.any(feats[:, 4] <= 0):
            raise ArgError("spacing channel must be positive")
        object.__setattr__(self, "features", feats)


def windows_to_arrays(dataset: Sequence[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack a window list into (X, y) arrays for batch training."""
    if len(dataset) == 0:
        raise ArgError("empty dataset")
    X = np.stack([w.features for w in dataset])
    y = np.array([w.label for w in dataset])
    return X, y


def last_step_states(dataset: Sequence[WindowSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(v, v_lead, s) at each window's final step: the physics model's inputs."""
    if len(dataset) == 0:
        raise ArgError("empty dataset")
    last = np.stack([w.features[-1] for w in dataset])
    return last[:, 0], last[:, 2], last[:, 4]


def calibration_data_from_windows(dataset: Sequence[WindowSample]) -> CalibrationData:
    v, v_lead, s = last_step_states(dataset)
    _, y = windows_to_arrays(dataset)
    return CalibrationData(v, v_lead, s, y)


def physics_prediction(window: WindowSample, p: IDMParams) -> float:
    """Acceleration law applied to the window's final step (only that step matters)."""
    v, v_lead, s = window.features[-1, 0], window.features[-1, 2], window.features[-1, 4]
    return float(idm_accel_arrays(v, v_lead, s, p))


def physics_predictions(dataset: Sequence[WindowSample], p: IDMParams) -> np.ndarray:
    v, v_lead, s = last_step_states(dataset)
    return idm_accel_arrays(v, v_lead, s, p)


def residual_labels(dataset: Sequence[WindowSample], p: IDMParams) -> list[WindowSample]:
    """Same features, labels replaced by label - physics prediction."""
    phys = physics_predictions(dataset, p)
    return [replace(w, label=float(w.label - ph)) for w, ph in zip(dataset, phys)]


@dataclass(frozen=True)
class FeatureScaler:
    """Per-channel standardization fitted on a training split."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "FeatureScaler":
        mean = X.reshape(-1, X.shape[-1]).mean(axis=0)
        std = X.reshape(-1, X.shape[-1]).std(axis=0)
        return cls(mean, np.where(std > 1e-12, std, 1.0))

    @classmethod
    def identity(cls, n_channels: int = len(FEATURE_CHANNELS)) -> "FeatureScaler":
        return cls(np.zeros(n_channels), np.ones(n_channels))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


NetSpec = Union[MLPSpec, LSTMSpec]


@dataclass(frozen=True)
class PERLModel:
    """Composed predictor: physics parameters plus a residual network.

    The prediction is always physics output + residual output; the scaler is
    the input standardization the residual net was trained with.
    """

    physics: IDMParams
    residual_spec: NetSpec
    residual_params: np.ndarray
    scaler: FeatureScaler = field(default_factory=FeatureScaler.identity)


def predict(model: PERLModel, window: WindowSample) -> float:
    phys = physics_prediction(window, model.physics)
    x = model.scaler(window.features)
    return phys + neural.forward(model.residual_spec, model.residual_params, x)


def predict_batch(model: PERLModel, dataset: Sequence[WindowSample]) -> np.ndarray:
    X, _ = windows_to_arrays(dataset)
    phys = physics_predictions(dataset, model.physics)
    return phys + neural.forward_batch(model.residual_spec, model.residual_params, model.scaler(X))


# --- head-to-head comparison ----------------------------------------------------


@dataclass(frozen=True)
class PERLSpec:
    """Untrained PERL blueprint: physics parameters and the residual net spec."""

    physics: IDMParams
    net: NetSpec


@dataclass
class PairResult:
    """One seed's head-to-head outcome on the test split."""

    seed: int
    direct_mse: float
    perl_mse: float
    direct_val_curve: np.ndarray
    perl_val_curve: np.ndarray
    perl_model: PERLModel


@dataclass
class ComparisonReport:
    results: list[PairResult]
    direct_mean: float
    perl_mean: float
    direct_ci: Optional[tuple[float, float]]
    perl_ci: Optional[tuple[float, float]]
    ci_level: float


def fit_and_score(
    net_spec: NetSpec,
    physics: IDMParams,
    train_set: Sequence[WindowSample],
    val_set: Sequence[WindowSample],
    test_set: Sequence[WindowSample],
    config: TrainConfig,
) -> PairResult:
    """Train a direct net on raw labels and a residual net on residual labels.

    Both use the identical architecture, init seed and schedule; inputs are
    standardized with statistics of the training split. Scores are test MSEs
    of the two acceleration predictors.
    """
    X_tr, y_tr = windows_to_arrays(train_set)
    X_va, y_va = windows_to_arrays(val_set)
    X_te, y_te = windows_to_arrays(test_set)
    scaler = FeatureScaler.fit(X_tr)
    X_tr, X_va, X_te = scaler(X_tr), scaler(X_va), scaler(X_te)

    direct = neural.train(net_spec, (X_tr, y_tr), config, val_data=(X_va, y_va))
    direct_pred = neural.forward_batch(net_spec, direct.final_params, X_te)
    direct_mse = float(np.mean((direct_pred - y_te) ** 2))

    phys_tr = physics_predictions(train_set, physics)
    phys_va = physics_predictions(val_set, physics)
    phys_te = physics_predictions(test_set, physics)
    residual = neural.train(
        net_spec, (X_tr, y_tr - phys_tr), config, val_data=(X_va, y_va - phys_va)
    )
    perl_pred = phys_te + neural.forward_batch(net_spec, residual.final_params, X_te)
    perl_mse = float(np.mean((perl_pred - y_te) ** 2))

    model = PERLModel(physics, net_spec, residual.final_params, scaler)
    return PairResult(
        config.seed, direct_mse, perl_mse, direct.val_loss_curve, residual.val_loss_curve, model
    )


def student_t_ci(values: np.ndarray, level: float) -> tuple[float, float]:
    """Two-sided confidence interval for the mean, Student-t over the samples."""
    values = np.asarray(values, dtype=float)
    k = len(values)
    if k < 2:
        raise ArgError("confidence intervals need at least 2 values")
    half = stats.t.ppf(0.5 + level / 2.0, k - 1) * values.std(ddof=1) / math.sqrt(k)
    m = float(values.mean())
    return m - half, m + half


def bootstrap_ci(values: np.ndarray, level: float, draws: int = 2000, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean."""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        raise ArgError("confidence intervals need at least 2 values")
    rng = np.random.default_rng(seed)
    means = rng.choice(values, size=(draws, len(values)), replace=True).mean(axis=1)
    lo, hi = np.quantile(means, [0.5 - level / 2.0, 0.5 + level / 2.0])
    return float(lo), float(hi)


def compare(
    direct_spec: NetSpec,
    perl_spec: PERLSpec,
    dataset: Sequence[WindowSample],
    config: TrainConfig,
    seeds: Sequence[int],
    split_fractions: tuple[float, float, float] = (0.7, 0.15, 0.15),
    ci_level: float = 0.99,
    ci_method: str = "student-t",
) -> ComparisonReport:
    """Seeded head-to-head: per-seed test MSEs plus means and CIs over seeds.

    With a single seed the report degrades to point estimates (no CIs);
    requesting CIs with fewer than 2 seeds is an error.
    """
    from .trajdata import split  # deferred: trajdata imports this module

    if direct_spec != perl_spec.net:
        raise ArgError("direct and residual nets must share one architecture")
    if len(seeds) == 0:
        raise ArgError("need at least one seed")
    want_ci = len(seeds) > 1
    results = []
    for seed in seeds:
        tr, va, te = split(list(dataset), split_fractions, seed=seed)
        cfg = replace(config, seed=int(seed))
        results.append(fit_and_score(direct_spec, perl_spec.physics, tr, va, te, cfg))
    d = np.array([r.direct_mse for r in results])
    p = np.array([r.perl_mse for r in results])
    ci = None
    if want_ci:
        ci_fn = student_t_ci if ci_method == "student-t" else bootstrap_ci
        ci = (ci_fn(d, ci_level), ci_fn(p, ci_level))
    return ComparisonReport(
        results=results,
        direct_mean=float(d.mean()),
        perl_mean=float(p.mean()),
        direct_ci=ci[0] if ci else None,
        perl_ci=ci[1] if ci else None,
        ci_level=ci_level,
    )
