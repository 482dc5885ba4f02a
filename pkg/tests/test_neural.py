import numpy as np
import pytest

from perllab.errors import ShapeError, SpecError, TrainError
from perllab.neural import (
    LSTMSpec,
    MLPSpec,
    TrainConfig,
    backward,
    count_params,
    forward,
    forward_batch,
    init,
    kink_margin,
    load_params,
    loss_and_grad,
    save_params,
    train,
)


def fd_gradient(spec, params, X, y, step=1e-5):
    g = np.zeros_like(params)
    for i in range(len(params)):
        p_hi = params.copy()
        p_hi[i] += step
        p_lo = params.copy()
        p_lo[i] -= step
        hi = np.mean((forward_batch(spec, p_hi, X) - y) ** 2)
        lo = np.mean((forward_batch(spec, p_lo, X) - y) ** 2)
        g[i] = (hi - lo) / (2 * step)
    return g


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)


def draw_checkable_case(spec, shape, seed):
    """Params and batch whose ReLU pre-activations stay away from the kink.

    Central differences are meaningless across the nondifferentiable point,
    so redraw (deterministically) until the margin is comfortable.
    """
    for attempt in range(20):
        rng = np.random.default_rng((seed, attempt))
        params = init(spec, seed * 1000 + attempt)
        X = rng.uniform(-1, 1, shape)
        y = rng.uniform(-1, 1, shape[0])
        if kink_margin(spec, params, X) > 1e-3:
            return params, X, y
    raise AssertionError("could not find a kink-free case")


# --- counting -----------------------------------------------------------------

def test_count_params_known_values():
    assert count_params(MLPSpec((1, 128, 64, 1))) == 8577  # 256 + 8256 + 65
    assert count_params(LSTMSpec(5, 32, 1)) == 4 * (32 * 37 + 32) + 33  # 4897
    assert count_params(MLPSpec((1, 1))) == 2


def test_count_params_monotone_in_widths():
    base = count_params(MLPSpec((1, 16, 1)))
    assert count_params(MLPSpec((1, 17, 1))) > base
    assert count_params(MLPSpec((2, 16, 1))) > base
    lstm = count_params(LSTMSpec(5, 16, 1))
    assert count_params(LSTMSpec(5, 17, 1)) > lstm
    assert count_params(LSTMSpec(6, 16, 1)) > lstm
    assert count_params(LSTMSpec(5, 16, 2)) > lstm


# --- init ---------------------------------------------------------------------

def test_init_deterministic():
    spec = MLPSpec((1, 8, 1))
    a = init(spec, 7)
    b = init(spec, 7)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, init(spec, 8))


def test_init_rejects_bad_spec():
    with pytest.raises(SpecError):
        MLPSpec((1, 0, 1))
    with pytest.raises(SpecError):
        MLPSpec((3,))
    with pytest.raises(SpecError):
        LSTMSpec(0, 4, 1)


def test_init_vector_length():
    for spec in (MLPSpec((2, 5, 3, 1)), LSTMSpec(3, 7, 2)):
        assert init(spec, 0).shape == (count_params(spec),)


# --- forward ------------------------------------------------------------------

def test_zero_params_give_zero_output():
    mlp = MLPSpec((1, 4, 1))
    assert forward(mlp, np.zeros(count_params(mlp)), 3.7) == 0.0
    lstm = LSTMSpec(2, 3, 1)
    assert forward(lstm, np.zeros(count_params(lstm)), np.zeros((6, 2))) == 0.0


def test_handset_identity_mlp():
    # [1,2,1] computing max(0,x) - max(0,-x) = x
    spec = MLPSpec((1, 2, 1))
    params = np.array([1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 0.0])
    for x in (-1.0, 0.0, 2.0):
        assert forward(spec, params, x) == pytest.approx(x)


def test_forward_shape_errors():
    spec = MLPSpec((2, 3, 1))
    params = init(spec, 0)
    with pytest.raises(ShapeError):
        forward(spec, params, np.zeros(3))
    with pytest.raises(ShapeError):
        forward_batch(spec, params, np.zeros((4, 5)))
    lstm = LSTMSpec(2, 3, 1)
    with pytest.raises(ShapeError):
        forward(lstm, init(lstm, 0), np.zeros((5, 3)))
    with pytest.raises(ShapeError):
        forward(lstm, init(MLPSpec((2, 3, 1)), 0), np.zeros((5, 2)))


def test_single_forward_matches_batch():
    spec = LSTMSpec(4, 6, 2)
    params = init(spec, 9)
    X = np.random.default_rng(1).normal(size=(5, 12, 4))
    batch = forward_batch(spec, params, X)
    singles = [forward(spec, params, X[i]) for i in range(5)]
    np.testing.assert_allclose(batch, singles, rtol=0, atol=1e-12)


# --- backward -----------------------------------------------------------------

def test_gradient_zero_at_minimum():
    # single linear weight w fitting y = 2x exactly at w=2
    spec = MLPSpec((1, 1))
    params = np.array([2.0, 0.0])
    X = np.array([[1.0], [2.0], [-1.0]])
    y = 2.0 * X[:, 0]
    g = backward(spec, params, (X, y))
    np.testing.assert_allclose(g, 0.0, atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_mlp_gradient_matches_finite_differences(seed):
    spec = MLPSpec((1, 8, 8, 1))
    params, X, y = draw_checkable_case(spec, (4, 1), seed)
    _, g = loss_and_grad(spec, params, X, y)
    gf = fd_gradient(spec, params, X, y)
    assert rel_err(g, gf).max() <= 1e-4


@pytest.mark.parametrize("seed", range(3))
def test_lstm_gradient_matches_finite_differences(seed):
    spec = LSTMSpec(3, 4, 1)
    params, X, y = draw_checkable_case(spec, (3, 5, 3), seed)
    _, g = loss_and_grad(spec, params, X, y)
    gf = fd_gradient(spec, params, X, y)
    assert rel_err(g, gf).max() <= 1e-4


def test_backward_empty_batch():
    spec = MLPSpec((1, 2, 1))
    with pytest.raises(ShapeError):
        backward(spec, init(spec, 0), (np.zeros((0, 1)), np.zeros(0)))


# --- train --------------------------------------------------------------------

def test_train_fits_linear_target():
    rng = np.random.default_rng(42)
    X = rng.uniform(0, 1, (100, 1))
    y = 2.0 * X[:, 0]
    cfg = TrainConfig(learning_rate=1e-2, epochs=200, batch_size=32, seed=1)
    rep = train(MLPSpec((1, 16, 1)), (X, y), cfg, val_data=(X, y))
    assert rep.train_loss_curve[-1] <= 1e-3


def test_train_zero_epochs():
    X = np.zeros((4, 1))
    y = np.zeros(4)
    cfg = TrainConfig(epochs=0, seed=3)
    rep = train(MLPSpec((1, 4, 1)), (X, y), cfg, val_data=(X, y))
    assert len(rep.train_loss_curve) == 0
    np.testing.assert_array_equal(rep.final_params, init(MLPSpec((1, 4, 1)), 3))


def test_train_deterministic():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 1))
    y = np.sin(X[:, 0])
    cfg = TrainConfig(epochs=20, batch_size=8, seed=5)
    r1 = train(MLPSpec((1, 8, 1)), (X, y), cfg)
    r2 = train(MLPSpec((1, 8, 1)), (X, y), cfg)
    np.testing.assert_array_equal(r1.train_loss_curve, r2.train_loss_curve)
    np.testing.assert_array_equal(r1.val_loss_curve, r2.val_loss_curve)
    np.testing.assert_array_equal(r1.final_params, r2.final_params)


def test_train_divergence_reports_epoch():
    X = np.full((8, 1), 1e3)
    y = np.full(8, -1e3)
    cfg = TrainConfig(learning_rate=1e6, epochs=50, batch_size=8, seed=0, optimizer="sgd")
    with pytest.raises(TrainError):
        train(MLPSpec((1, 4, 1)), (X, y), cfg, val_data=(X, y))


def test_sgd_full_batch_loss_nonincreasing_linear_model():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, (50, 1))
    y = 0.7 * X[:, 0] + 0.1
    cfg = TrainConfig(learning_rate=1e-2, epochs=100, batch_size=50, seed=2, optimizer="sgd")
    rep = train(MLPSpec((1, 1)), (X, y), cfg, val_data=(X, y))
    assert np.all(np.diff(rep.train_loss_curve) <= 1e-9)


# --- serialization --------------------------------------------------------------

@pytest.mark.parametrize("spec", [MLPSpec((1, 5, 1)), LSTMSpec(3, 4, 2)])
def test_params_roundtrip(tmp_path, spec):
    params = init(spec, 13)
    path = tmp_path / "net.bin"
    save_params(path, spec, params)
    spec2, params2 = load_params(path)
    assert spec2 == spec
    np.testing.assert_array_equal(params2, params)


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTAMODEL" + b"\x00" * 64)
    with pytest.raises(SpecError):
        load_params(path)
