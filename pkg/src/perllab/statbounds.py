"""Concentration and capacity calculators plus an empirical error harness.

Calculators: two-sided bounded-loss tail, the doubled union-bound tail for
the excess risk of empirical risk minimization, the sample size implied by
inverting that tail, the squared-loss Lipschitz constant 4CL, and the
capacity-based generalization bound 8 C L R_n + c sqrt(ln(1/delta)/(2n)).
Bounds are reported raw and may exceed 1; callers clamp for display.

The measurement side estimates empirical Rademacher complexity (exactly for
finite classes, by inner ascent for parameterized ones), checks the ERM
inequality chain by simulation, and measures generalization/estimation
errors of a trainer on noiseless scalar targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import neural
from .errors import ArgError, TrainError
from .funcspace import ScalarTarget
from .neural import MLPSpec, TrainConfig

DEFAULT_TEST_SIZE = 100_000


# --- closed-form calculators ----------------------------------------------------

def hoeffding_tail(n: int, t: float, c: float) -> float:
    """Two-sided deviation bound 2 exp(-2 n t^2 / c^2) for losses in [0, c].

    n = 0 returns the vacuous 2.
    """
    if t <= 0:
        raise ArgError(f"t must be > 0, got {t}")
    if c <= 0:
        raise ArgError(f"c must be > 0, got {c}")
    if n < 0:
        raise ArgError(f"n must be >= 0, got {n}")
    return 2.0 * math.exp(-2.0 * n * t * t / (c * c))


def estimation_tail(n: int, eps: float, c: float) -> float:
    """Union bound 4 exp(-n eps^2 / (2 c^2)) on the ERM excess risk exceeding eps."""
    if eps <= 0:
        raise ArgError(f"eps must be > 0, got {eps}")
    if c <= 0:
        raise ArgError(f"c must be > 0, got {c}")
    if n < 0:
        raise ArgError(f"n must be >= 0, got {n}")
    return 4.0 * math.exp(-n * eps * eps / (2.0 * c * c))


def required_sample_size(c: float, eps: float, delta: float) -> int:
    """Smallest n with estimation_tail(n, eps, c) <= delta, clamped to >= 1."""
    if eps <= 0:
        raise ArgError(f"eps must be > 0, got {eps}")
    if not 0 < delta < 1:
        raise ArgError(f"delta must be in (0, 1), got {delta}")
    if c < 0:
        raise ArgError(f"c must be >= 0, got {c}")
    return max(1, math.ceil(c * c / (2.0 * eps * eps) * math.log(4.0 / delta)))


def loss_lipschitz(C: float, L: float) -> float:
    """Lipschitz constant 4 C L of the squared loss of a C-bounded L-Lipschitz model."""
    if C < 0 or L < 0:
        raise ArgError(f"C and L must be >= 0, got C={C}, L={L}")
    return 4.0 * C * L


def generalization_bound(
    C: float, L: float, rad_F: float, c: float, delta: float, n: int
) -> float:
    """8 C L rad_F + c sqrt(ln(1/delta) / (2 n)); raw, not clamped to 1."""
    if not 0 < delta < 1:
        raise ArgError(f"delta must be in (0, 1), got {delta}")
    if n < 1:
        raise ArgError(f"n must be >= 1, got {n}")
    if min(C, L, rad_F, c) < 0:
        raise ArgError("C, L, rad_F and c must be >= 0")
    return 8.0 * C * L * rad_F + c * math.sqrt(math.log(1.0 / delta) / (2.0 * n))


# --- empirical Rademacher complexity ----------------------------------------------

@dataclass(frozen=True)
class RademacherEstimate:
    value: float
    sigma_draws: int
    std_error: float
    inner_method: str  # "enumerate" (exact sup) or "optimize" (lower bound)


class ParamClass:
    """Parameterized function class for the ascent-based estimator.

    Subclasses define `dim`, `sample(rng) -> theta` (a start point) and
    `value(theta, xs) -> array`.
    """

    dim: int

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def value(self, theta: np.ndarray, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class LinearClass(ParamClass):
    """{x -> w x + b : |w| <= w_max, |b| <= b_max}; its inner supremum is known
    in closed form, which makes it a convenient accuracy reference."""

    dim = 2

    def __init__(self, w_max: float, b_max: float):
        self.w_max = w_max
        self.b_max = b_max

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform([-self.w_max, -self.b_max], [self.w_max, self.b_max])

    def value(self, theta: np.ndarray, xs: np.ndarray) -> np.ndarray:
        w = np.clip(theta[0], -self.w_max, self.w_max)
        b = np.clip(theta[1], -self.b_max, self.b_max)
        return w * xs + b

    def exact_inner_sup(self, sigma: np.ndarray, xs: np.ndarray) -> float:
        n = len(xs)
        return (self.w_max * abs(np.dot(sigma, xs)) + self.b_max * abs(sigma.sum())) / n


def _inner_sup_optimize(
    fclass: ParamClass,
    sigma: np.ndarray,
    xs: np.ndarray,
    rng: np.random.Generator,
    restarts: int = 5,
    steps: int = 60,
    lr: float = 0.2,
    fd_step: float = 1e-5,
) -> float:
    """Gradient ascent with restarts on theta -> mean(sigma * f(xs)); lower bound."""
    n = len(xs)
    best = -math.inf
    for _ in range(restarts):
        theta = np.asarray(fclass.sample(rng), dtype=float)
        for _ in range(steps):
            grad = np.zeros_like(theta)
            for j in range(len(theta)):
                up = theta.copy()
                up[j] += fd_step
                dn = theta.copy()
                dn[j] -= fd_step
                grad[j] = (
                    np.dot(sigma, fclass.value(up, xs)) - np.dot(sigma, fclass.value(dn, xs))
                ) / (2 * fd_step * n)
            norm = np.linalg.norm(grad)
            if norm < 1e-12:
                break
            theta += lr * grad / norm
        best = max(best, float(np.dot(sigma, fclass.value(theta, xs)) / n))
    return best


def empirical_rademacher(
    fclass,
    xs: Sequence[float],
    sigma_draws: int,
    seed: int = 0,
) -> RademacherEstimate:
    """Monte-Carlo estimate of E_sigma sup_f (1/n) sum_i sigma_i f(x_i).

    A list of callables gets the exact supremum per draw ("enumerate"); a
    ParamClass gets gradient-ascent inner maximization ("optimize"), making
    the result a lower-bound estimate.
    """
    xs = np.asarray(xs, dtype=float)
    if len(xs) == 0:
        raise ArgError("empty sample")
    if sigma_draws < 1:
        raise ArgError(f"sigma_draws must be >= 1, got {sigma_draws}")
    rng = np.random.default_rng(seed)
    n = len(xs)
    sigmas = rng.choice([-1.0, 1.0], size=(sigma_draws, n))
    if isinstance(fclass, ParamClass):
        vals = np.array(
            [_inner_sup_optimize(fclass, s, xs, rng) for s in sigmas]
        )
        method = "optimize"
    else:
        fclass = list(fclass)
        if len(fclass) == 0:
            raise ArgError("empty function class")
        F = np.stack([np.asarray(f(xs), dtype=float) for f in fclass])  # (m, n)
        vals = (sigmas @ F.T / n).max(axis=1)
        method = "enumerate"
    value = float(vals.mean())
    std_error = float(vals.std(ddof=1) / math.sqrt(sigma_draws)) if sigma_draws > 1 else 0.0
    return RademacherEstimate(value, sigma_draws, std_error, method)


def rademacher_exact(fclass: Sequence[Callable], xs: Sequence[float]) -> float:
    """Exact complexity of a finite class by enumerating all 2^n sign patterns."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    if n == 0 or len(fclass) == 0:
        raise ArgError("empty sample or class")
    if n > 20:
        raise ArgError(f"2^{n} sign patterns is too many; use the MC estimator")
    F = np.stack([np.asarray(f(xs), dtype=float) for f in fclass])
    bits = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1) * 2.0 - 1.0  # (2^n, n)
    return float((bits @ F.T / n).max(axis=1).mean())


# --- ERM inequality chain ---------------------------------------------------------

@dataclass(frozen=True)
class ChainReport:
    """Simulated frequency of the three-link ERM risk chain holding."""

    trials: int
    holds: int
    frequency: float
    hoeffding_delta: float
    threshold: float  # 1 - 2 delta - 3 binomial standard errors

    @property
    def passed(self) -> bool:
        return self.frequency >= self.threshold


def erm_chain_check(
    finite_class: Sequence[Callable],
    data_sampler: Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]],
    n: int,
    t: float,
    trials: int,
    seed: int = 0,
    c: float = 1.0,
    population_size: int = 200_000,
) -> ChainReport:
    """Fraction of trials where R(f^) <= R^(f^)+t <= R^(f*)+t <= R(f*)+2t.

    Population risks use one large Monte-Carlo sample; each trial draws n
    fresh points, finds the empirical minimizer by enumeration (ties to the
    lowest index) and checks all three links.
    """
    if len(finite_class) == 0:
        raise ArgError("empty function class")
    if trials < 1 or n < 1:
        raise ArgError("need trials >= 1 and n >= 1")
    rng = np.random.default_rng(seed)
    xs_pop, ys_pop = data_sampler(rng, population_size)
    pop_risk = np.array(
        [float(np.mean((np.asarray(f(xs_pop)) - ys_pop) ** 2)) for f in finite_class]
    )
    star = int(np.argmin(pop_risk))
    holds = 0
    for _ in range(trials):
        xs, ys = data_sampler(rng, n)
        emp = np.array([float(np.mean((np.asarray(f(xs)) - ys) ** 2)) for f in finite_class])
        fhat = int(np.argmin(emp))
        ok = (
            pop_risk[fhat] <= emp[fhat] + t
            and emp[fhat] <= emp[star]
            and emp[star] <= pop_risk[star] + t
        )
        holds += bool(ok)
    freq = holds / trials
    delta = hoeffding_tail(n, t, c)
    se = math.sqrt(max(freq * (1.0 - freq), 1e-12) / trials)
    return ChainReport(trials, holds, freq, delta, 1.0 - 2.0 * delta - 3.0 * se)


# --- loss smoothness sampling -------------------------------------------------------

def loss_quotient_max(
    predictor: Callable[[np.ndarray], np.ndarray],
    truth: Callable[[np.ndarray], np.ndarray],
    interval,
    n_pairs: int = 10_000,
    seed: int = 0,
) -> float:
    """Max sampled difference quotient of the squared loss over random point pairs."""
    if n_pairs < 1:
        raise ArgError(f"n_pairs must be >= 1, got {n_pairs}")
    rng = np.random.default_rng(seed)
    a, b = interval.a, interval.b
    s1 = rng.uniform(a, b, n_pairs)
    s2 = rng.uniform(a, b, n_pairs)
    keep = np.abs(s1 - s2) > 1e-12
    s1, s2 = s1[keep], s2[keep]
    l1 = (np.asarray(predictor(s1)) - np.asarray(truth(s1))) ** 2
    l2 = (np.asarray(predictor(s2)) - np.asarray(truth(s2))) ** 2
    return float(np.max(np.abs(l1 - l2) / np.abs(s1 - s2)))


# --- generalization / estimation error measurement -----------------------------------

Trainer = Callable[[np.ndarray, np.ndarray, int], Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class ErrorReport:
    """Risks of one fitted predictor on a noiseless target.

    gen_error = test_risk - train_risk. est_error = test_risk: for a
    noiseless deterministic target fit by an expressive class the optimal
    risk is taken as zero.
    """

    n_train: int
    train_risk: float
    test_risk: float
    gen_error: float
    est_error: float


def measure_errors(
    trainer: Trainer,
    target: ScalarTarget,
    n_train: int,
    n_test: int = DEFAULT_TEST_SIZE,
    seed: int = 0,
) -> ErrorReport:
    """Fit on n_train uniform samples of the target; score on n_test fresh ones."""
    if n_train < 1 or n_test < 1:
        raise ArgError("need n_train >= 1 and n_test >= 1")
    rng = np.random.default_rng(seed)
    a, b = target.interval.a, target.interval.b
    xs = rng.uniform(a, b, n_train)
    ys = target.eval_array(xs)
    predictor = trainer(xs, ys, seed)
    train_pred = np.asarray(predictor(xs), dtype=float)
    train_risk = float(np.mean((train_pred - ys) ** 2))
    if not math.isfinite(train_risk):
        raise TrainError("trainer produced a non-finite training risk")
    xs_te = rng.uniform(a, b, n_test)
    ys_te = target.eval_array(xs_te)
    test_risk = float(np.mean((np.asarray(predictor(xs_te)) - ys_te) ** 2))
    if not math.isfinite(test_risk):
        raise TrainError("trainer produced a non-finite test risk")
    return ErrorReport(
        n_train=n_train,
        train_risk=train_risk,
        test_risk=test_risk,
        gen_error=test_risk - train_risk,
        est_error=test_risk,
    )


def mlp_trainer(
    widths: tuple[int, ...] = (1, 128, 64, 1),
    learning_rate: float = 1e-2,
    epochs: int = 1500,
    batch_size: int = 64,
    optimizer: str = "sgd",
    input_range: Optional[tuple[float, float]] = None,
) -> Trainer:
    """Scalar-regression trainer around the from-scratch MLP.

    Inputs are rescaled to [0, 1] (using `input_range` or the training
    sample's range) before entering the network; plain seeded minibatch
    training otherwise.
    """
    spec = MLPSpec(tuple(widths))

    def train_fn(xs: np.ndarray, ys: np.ndarray, seed: int):
        lo, hi = input_range if input_range is not None else (xs.min(), xs.max())
        span = hi - lo if hi > lo else 1.0
        X = ((np.asarray(xs, dtype=float) - lo) / span)[:, None]
        cfg = TrainConfig(
            learning_rate=learning_rate,
            epochs=epochs,
            batch_size=min(batch_size, len(X)),
            seed=seed,
            optimizer=optimizer,
        )
        report = neural.train(spec, (X, np.asarray(ys, dtype=float)), cfg, val_data=(X, ys))
        params = report.final_params

        def predict(xq: np.ndarray) -> np.ndarray:
            Xq = ((np.asarray(xq, dtype=float) - lo) / span)[:, None]
            return neural.forward_batch(spec, params, Xq)

        return predict

    return train_fn
