import math

import numpy as np
import pytest

from perllab.errors import ArgError, DivergedError
from perllab.funcspace import Interval, ScalarTarget, make_builtin
from perllab.gdharness import (
    GDConfig,
    GDTrace,
    abs_objective,
    avg_gap,
    constant_step_bound,
    diminishing_bound,
    huber_objective,
    quadratic_objective,
    run_gd,
    sqrt_sum_check,
)

F_STAR = {"f_demo": -math.sqrt(2.0), "r_demo": -1.0}
X_STAR = {"f_demo": 3 * math.pi / 4, "r_demo": math.pi / 2}


def test_quadratic_one_step():
    # eta = 1 on x^2/2 is an exact Newton step
    obj = ScalarTarget("halfsq", lambda x: 0.5 * x * x, Interval(-2, 2), derivative=lambda x: x)
    trace = run_gd(obj, GDConfig(x0=1.0, eta=1.0, max_iters=50, tol=1e-12), f_star=0.0, x_star=0.0)
    assert trace.iterations_to_tol == 1
    assert trace.values[0] == 0.0


def test_zero_function_stops_immediately():
    obj = ScalarTarget("zero", lambda x: np.zeros_like(np.asarray(x, dtype=float)), Interval(-1, 1))
    trace = run_gd(obj, GDConfig(x0=0.5, eta=0.1, max_iters=10, tol=1e-9), f_star=0.0, x_star=0.0)
    assert trace.iterations_to_tol == 1


def test_demo_pair_iteration_counts():
    # documented defaults: x0=0, tol=1e-3, eta=1/(10L), value-gap stop
    f, r = make_builtin("f_demo"), make_builtin("r_demo")
    tf = run_gd(f, GDConfig(x0=0.0, eta=1 / (10 * math.sqrt(2)), max_iters=10_000, tol=1e-3),
                f_star=F_STAR["f_demo"], x_star=X_STAR["f_demo"]).iterations_to_tol
    tr = run_gd(r, GDConfig(x0=0.0, eta=0.1, max_iters=10_000, tol=1e-3),
                f_star=F_STAR["r_demo"], x_star=X_STAR["r_demo"]).iterations_to_tol
    assert tr < tf
    assert (tf - tr) / tf >= 0.15


def test_run_gd_numerical_derivative_fallback():
    obj = ScalarTarget("halfsq", lambda x: 0.5 * x * x, Interval(-2, 2))  # no derivative
    trace = run_gd(obj, GDConfig(x0=1.0, eta=0.5, max_iters=200, tol=1e-10), f_star=0.0, x_star=0.0)
    assert trace.iterations_to_tol is not None


def test_run_gd_diverged():
    obj = ScalarTarget(
        "logish",
        lambda x: np.log(np.abs(np.asarray(x, dtype=float))),
        Interval(-1, 1),
        derivative=lambda x: 1.0 / np.asarray(x, dtype=float),
    )
    with pytest.raises(DivergedError):
        run_gd(obj, GDConfig(x0=0.0, eta=1.0, max_iters=5, tol=1e-9), f_star=0.0, x_star=0.0)


def test_iterates_stay_in_interval():
    obj = quadratic_objective()
    trace = run_gd(obj, GDConfig(x0=1.0, eta=5.0, max_iters=30, tol=1e-12), f_star=0.0, x_star=0.0)
    assert np.all(trace.iterates >= -1.0) and np.all(trace.iterates <= 1.0)


def test_avg_gap_arithmetic():
    t = GDTrace(np.array([0.0, 0.0]), np.array([1.0, 0.5]), None, 0.0, 1.0)
    assert avg_gap(t) == pytest.approx(0.75)
    const = GDTrace(np.array([0.0] * 3), np.array([2.0] * 3), None, 2.0, 1.0)
    assert avg_gap(const) == 0.0
    with pytest.raises(ArgError):
        avg_gap(GDTrace(np.array([]), np.array([]), None, 0.0, 1.0))


def test_constant_step_bound_values():
    assert constant_step_bound(1.0, math.sqrt(2.0), 0.1, 100) == pytest.approx(0.15)
    assert constant_step_bound(0.0, 0.0, 0.3, 7) == 0.0
    # first term vanishes as T grows
    assert constant_step_bound(1.0, math.sqrt(2.0), 0.1, 10**9) == pytest.approx(0.1, abs=1e-6)
    with pytest.raises(ArgError):
        constant_step_bound(1.0, 1.0, 0.0, 10)


def test_diminishing_bound_values():
    assert diminishing_bound(1.0, 1.0, 100) == pytest.approx(0.15)
    assert diminishing_bound(0.0, 0.0, 5) == 0.0
    assert diminishing_bound(1.0, 1.0, 10**6) == pytest.approx(1.5e-3)


def test_bounds_increase_with_lipschitz():
    for L_lo, L_hi in [(1.0, math.sqrt(2.0)), (0.5, 1.0)]:
        assert constant_step_bound(1, L_lo, 0.1, 100) < constant_step_bound(1, L_hi, 0.1, 100)
        assert diminishing_bound(1, L_lo, 100) < diminishing_bound(1, L_hi, 100)


def test_sqrt_sum_check_values():
    assert sqrt_sum_check(1) == (1.0, 2.0)
    s, b = sqrt_sum_check(4)
    assert s == pytest.approx(1 + 1 / math.sqrt(2) + 1 / math.sqrt(3) + 0.5)
    assert b == 4.0
    s6, b6 = sqrt_sum_check(10**6)
    assert s6 <= b6 == 2000.0


@pytest.mark.parametrize("objective", [abs_objective, quadratic_objective, huber_objective])
def test_avg_gap_within_bounds_spotcheck(objective):
    # full (eta, T) grid lives in the acceptance suite
    obj = objective()
    L, B = obj.lipschitz, 1.0
    for eta, T in [(0.05, 50), (0.2, 200)]:
        trace = run_gd(obj, GDConfig(x0=1.0, eta=eta, max_iters=T, tol=1e-18),
                       f_star=0.0, x_star=0.0)
        assert avg_gap(trace) <= constant_step_bound(B, L, eta, len(trace.values)) + 1e-12
    trace = run_gd(obj, GDConfig(x0=1.0, schedule="diminishing", max_iters=100, tol=1e-18),
                   f_star=0.0, x_star=0.0)
    assert avg_gap(trace) <= diminishing_bound(B, L, len(trace.values)) + 1e-12


def test_config_validation():
    with pytest.raises(ArgError):
        GDConfig(eta=-1.0)
    with pytest.raises(ArgError):
        GDConfig(max_iters=0)
    with pytest.raises(ArgError):
        GDConfig(stop_on="nope")
    with pytest.raises(ArgError):
        GDConfig(schedule="linesearch")
