"""From-scratch trainable networks: ReLU MLP and stacked LSTM with a linear head.

Everything runs in float64 numpy with no autograd: `backward` implements the
exact gradient of the mean squared error over a batch (backpropagation
through time for the LSTM). Initialization and training are deterministic
functions of (spec, seed).

The LSTM applies standard sigmoid/tanh gates; the configured ReLU acts on
the final hidden state just before the linear head.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ShapeError, SpecError, TrainError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_MAGIC = b"PERLNN1\x00"


@dataclass(frozen=True)
class MLPSpec:
    """Fully-connected ReLU network; identity activation on the output layer."""

    layer_widths: tuple[int, ...]

    def __post_init__(self):
        if len(self.layer_widths) < 2:
            raise SpecError(f"need at least input and output widths, got {self.layer_widths}")
        if any(w < 1 for w in self.layer_widths):
            raise SpecError(f"all widths must be positive, got {self.layer_widths}")


@dataclass(frozen=True)
class LSTMSpec:
    """Stacked LSTM with a linear head mapping the last hidden state to a scalar."""

    input_dim: int
    hidden: int
    num_layers: int = 1

    def __post_init__(self):
        if min(self.input_dim, self.hidden, self.num_layers) < 1:
            raise SpecError(
                f"input_dim, hidden and num_layers must be positive, got {self}"
            )


Spec = Union[MLPSpec, LSTMSpec]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise SpecError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise SpecError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise SpecError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("sgd", "adam"):
            raise SpecError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")


@dataclass
class TrainReport:
    train_loss_curve: np.ndarray
    val_loss_curve: np.ndarray
    final_params: np.ndarray


def count_params(spec: Spec) -> int:
    """Total number of weights and biases."""
    if isinstance(spec, MLPSpec):
        w = spec.layer_widths
        return sum(w[i] * w[i + 1] + w[i + 1] for i in range(len(w) - 1))
    n = 0
    d = spec.input_dim
    for _ in range(spec.num_layers):
        n += 4 * (spec.hidden * (spec.hidden + d) + spec.hidden)
        d = spec.hidden
    return n + spec.hidden + 1  # linear head


def init(spec: Spec, seed: int) -> np.ndarray:
    """Deterministic initial parameter vector.

    MLP weights are He-uniform (+-sqrt(6/fan_in)) with zero biases; all LSTM
    weights and biases (head included) are uniform +-1/sqrt(hidden).
    """
    rng = np.random.default_rng(seed)
    if isinstance(spec, MLPSpec):
        chunks = []
        w = spec.layer_widths
        for fan_in, fan_out in zip(w[:-1], w[1:]):
            limit = np.sqrt(6.0 / fan_in)
            chunks.append(rng.uniform(-limit, limit, fan_out * fan_in))
            chunks.append(np.zeros(fan_out))
        return np.concatenate(chunks)
    limit = 1.0 / np.sqrt(spec.hidden)
    return rng.uniform(-limit, limit, count_params(spec))


# --- parameter slicing --------------------------------------------------------

def _mlp_layers(spec: MLPSpec, params: np.ndarray):
    """Yield (W, b) views per layer."""
    w = spec.layer_widths
    off = 0
    for fan_in, fan_out in zip(w[:-1], w[1:]):
        W = params[off : off + fan_out * fan_in].reshape(fan_out, fan_in)
        off += fan_out * fan_in
        b = params[off : off + fan_out]
        off += fan_out
        yield W, b


def _lstm_layers(spec: LSTMSpec, params: np.ndarray):
    """Yield (Wx, Wh, b) views per layer, then return (w_head, b_head) via StopIteration."""
    h = spec.hidden
    off = 0
    d = spec.input_dim
    for _ in range(spec.num_layers):
        Wx = params[off : off + 4 * h * d].reshape(4 * h, d)
        off += 4 * h * d
        Wh = params[off : off + 4 * h * h].reshape(4 * h, h)
        off += 4 * h * h
        b = params[off : off + 4 * h]
        off += 4 * h
        yield Wx, Wh, b
        d = h


def _lstm_head(spec: LSTMSpec, params: np.ndarray):
    h = spec.hidden
    return params[-(h + 1) : -1], params[-1]


def _check_params(spec: Spec, params: np.ndarray) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.shape != (count_params(spec),):
        raise ShapeError(
            f"parameter vector has shape {params.shape}, spec needs ({count_params(spec)},)"
        )
    return params


# --- scratch buffers ------------------------------------------------------------

# Allocating large temporaries every step is expensive (mmap churn), so the
# recurrence reuses per-thread buffers keyed by name and shape. Values never
# depend on buffer reuse; this is purely an allocation optimization.
_scratch = threading.local()


def _buf(name: str, shape: tuple[int, ...]) -> np.ndarray:
    pool = getattr(_scratch, "pool", None)
    if pool is None:
        pool = _scratch.pool = {}
    key = (name, shape)
    arr = pool.get(key)
    if arr is None:
        arr = pool[key] = np.empty(shape)
    return arr


# --- forward ------------------------------------------------------------------

def _mlp_batch(spec: MLPSpec, params: np.ndarray, X: np.ndarray, want_cache: bool = False):
    acts = [X]
    pre = []
    a = X
    layers = list(_mlp_layers(spec, params))
    for k, (W, b) in enumerate(layers):
        z = a @ W.T + b
        if k < len(layers) - 1:
            a = np.maximum(z, 0.0)
        else:
            a = z
        if want_cache:
            pre.append(z)
            acts.append(a)
    return (a, acts, pre) if want_cache else a


def _lstm_single_layer(li: int, zx: np.ndarray, Wh: np.ndarray, h: int):
    """Gate recurrence given precomputed input projections zx = W_x x + b.

    Arrays are feature-major, (T, features, batch), so every hot operation
    touches contiguous memory. Gate blocks are ordered (input, forget,
    output, cell-candidate): the three sigmoids share one contiguous slab.
    Returns hidden states H, gate activations G, cell states C and tanh(C),
    all living in reusable scratch buffers valid until the next network call.
    """
    T, _, B = zx.shape
    H = _buf(f"H{li}", (T, h, B))
    G = _buf(f"G{li}", (T, 4 * h, B))
    C = _buf(f"C{li}", (T, h, B))
    TC = _buf(f"TC{li}", (T, h, B))
    z = _buf(f"z{li}", (4 * h, B))
    ig = _buf(f"ig{li}", (h, B))
    tc = _buf(f"tc{li}", (h, B))
    ht = np.zeros((h, B))
    ct = np.zeros((h, B))
    sig = z[: 3 * h]
    gv = z[3 * h :]
    for t in range(T):
        np.dot(Wh, ht, out=z)
        z += zx[t]
        # sigmoid of the i/f/o slab in place, tanh of the candidate slab
        np.negative(sig, out=sig)
        np.exp(sig, out=sig)
        sig += 1.0
        np.reciprocal(sig, out=sig)
        np.tanh(gv, out=gv)
        np.multiply(z[h : 2 * h], ct, out=ct)      # forget * c
        np.multiply(z[:h], gv, out=ig)             # input * candidate
        ct += ig
        np.tanh(ct, out=tc)
        np.multiply(z[2 * h : 3 * h], tc, out=ht)  # output * tanh(c)
        H[t] = ht
        C[t] = ct
        TC[t] = tc
        G[t] = z
    return H, G, C, TC


def _lstm_batch(spec: LSTMSpec, params: np.ndarray, X: np.ndarray, want_cache: bool = False):
    B, T, F = X.shape
    h = spec.hidden
    caches = []
    inp = _buf("Xw", (T, F, B))
    inp[:] = X.transpose(1, 2, 0)
    for li, (Wx, Wh, b) in enumerate(_lstm_layers(spec, params)):
        zx = _buf(f"zx{li}", (T, 4 * h, B))
        np.matmul(Wx[None], inp, out=zx)
        zx += b[None, :, None]
        H, G, C, TC = _lstm_single_layer(li, zx, np.ascontiguousarray(Wh), h)
        if want_cache:
            caches.append((inp, G, C, TC, H))
        inp = H
    w_head, b_head = _lstm_head(spec, params)
    hT = inp[-1].copy()                            # (h, B)
    hr = np.maximum(hT, 0.0)
    y = w_head @ hr + b_head
    return (y, caches, hT, hr) if want_cache else y


def forward_batch(spec: Spec, params: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Predictions for a batch: X is (B, d_in) for MLP, (B, T, input_dim) for LSTM."""
    params = _check_params(spec, params)
    X = np.asarray(X, dtype=float)
    if isinstance(spec, MLPSpec):
        if X.ndim != 2 or X.shape[1] != spec.layer_widths[0]:
            raise ShapeError(f"MLP batch must be (B, {spec.layer_widths[0]}), got {X.shape}")
        out = _mlp_batch(spec, params, X)
        return out[:, 0] if spec.layer_widths[-1] == 1 else out
    if X.ndim != 3 or X.shape[2] != spec.input_dim:
        raise ShapeError(f"LSTM batch must be (B, T, {spec.input_dim}), got {X.shape}")
    return _lstm_batch(spec, params, X)


def forward(spec: Spec, params: np.ndarray, x) -> float:
    """Prediction for a single input (scalar/vector for MLP, (T, input_dim) for LSTM)."""
    x = np.asarray(x, dtype=float)
    if isinstance(spec, MLPSpec):
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape != (spec.layer_widths[0],):
            raise ShapeError(f"MLP input must have {spec.layer_widths[0]} features, got {x.shape}")
        return float(forward_batch(spec, params, x[None, :])[0])
    if x.ndim != 2:
        raise ShapeError(f"LSTM input must be (T, {spec.input_dim}), got {x.shape}")
    return float(forward_batch(spec, params, x[None])[0])


# --- backward -----------------------------------------------------------------

def loss_and_grad(spec: Spec, params: np.ndarray, X: np.ndarray, y: np.ndarray):
    """Mean-MSE loss over the batch and its exact parameter gradient."""
    params = _check_params(spec, params)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ShapeError("empty batch")
    if isinstance(spec, MLPSpec):
        if spec.layer_widths[-1] != 1:
            raise ShapeError("MSE training expects a scalar output layer")
        return _mlp_loss_grad(spec, params, X, y)
    return _lstm_loss_grad(spec, params, X, y)


def backward(spec: Spec, params: np.ndarray, batch) -> np.ndarray:
    """Gradient of the mean MSE over `batch` = (X, y)."""
    X, y = batch
    loss, grad = loss_and_grad(spec, params, X, y)
    if not np.isfinite(loss):
        raise TrainError(f"non-finite loss {loss}")
    return grad


def _mlp_loss_grad(spec: MLPSpec, params: np.ndarray, X: np.ndarray, y: np.ndarray):
    B = len(y)
    out, acts, pre = _mlp_batch(spec, params, X, want_cache=True)
    pred = out[:, 0]
    resid = pred - y
    loss = float(np.mean(resid**2))
    grad = np.zeros_like(params)
    layers = list(_mlp_layers(spec, params))
    g_layers = list(_mlp_layers(spec, grad))
    delta = (2.0 / B) * resid[:, None]  # d loss / d output
    for k in range(len(layers) - 1, -1, -1):
        W, _ = layers[k]
        gW, gb = g_layers[k]
        a_prev = acts[k]
        gW[...] = delta.T @ a_prev
        gb[...] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ W) * (pre[k - 1] > 0)
    return loss, grad


def _lstm_loss_grad(spec: LSTMSpec, params: np.ndarray, X: np.ndarray, y: np.ndarray):
    B, T, _ = X.shape
    h = spec.hidden
    yhat, caches, hT, hr = _lstm_batch(spec, params, X, want_cache=True)
    resid = yhat - y
    loss = float(np.mean(resid**2))
    grad = np.zeros_like(params)
    w_head, _ = _lstm_head(spec, params)

    dy = (2.0 / B) * resid                       # (B,)
    grad[-(h + 1) : -1] = hr @ dy
    grad[-1] = dy.sum()
    dhT = w_head[:, None] * dy[None, :] * (hT > 0)

    layer_views = list(_lstm_layers(spec, params))
    grad_views = list(_lstm_layers(spec, grad))
    # dH per layer: gradient wrt that layer's hidden sequence from above
    dH = _buf("b_dHtop", (T, h, B))
    dH[:] = 0.0
    dH[-1] = dhT
    for li in range(spec.num_layers - 1, -1, -1):
        Wx, Wh, _ = layer_views[li]
        gWx, gWh, gb = grad_views[li]
        inp, G, C, TC, H = caches[li]
        i_g = G[:, :h]
        f_g = G[:, h : 2 * h]
        o_g = G[:, 2 * h : 3 * h]
        g_g = G[:, 3 * h :]
        # time-independent factors, computed in bulk
        dtc = _buf("b_dtc", (T, h, B))            # d h / d c through the output path
        np.multiply(TC, TC, out=dtc)
        np.subtract(1.0, dtc, out=dtc)
        dtc *= o_g
        si = _buf("b_si", (T, h, B))
        np.subtract(1.0, i_g, out=si)
        si *= i_g
        sf = _buf("b_sf", (T, h, B))
        np.subtract(1.0, f_g, out=sf)
        sf *= f_g
        so = _buf("b_so", (T, h, B))
        np.subtract(1.0, o_g, out=so)
        so *= o_g
        dg_fac = _buf("b_dg", (T, h, B))
        np.multiply(g_g, g_g, out=dg_fac)
        np.subtract(1.0, dg_fac, out=dg_fac)

        dZ = _buf("b_dZ", (T, 4 * h, B))
        dzt = _buf("b_dzt", (4 * h, B))
        dh = _buf("b_dh", (h, B))
        dc = _buf("b_dc", (h, B))
        dh_next = np.zeros((h, B))
        dc_next = np.zeros((h, B))
        zero_c = np.zeros((h, B))
        WhT = np.ascontiguousarray(Wh.T)
        v_i, v_f = dzt[:h], dzt[h : 2 * h]
        v_o, v_g = dzt[2 * h : 3 * h], dzt[3 * h :]
        for t in range(T - 1, -1, -1):
            np.add(dH[t], dh_next, out=dh)
            np.multiply(dh, dtc[t], out=dc)
            dc += dc_next
            c_prev = C[t - 1] if t > 0 else zero_c
            np.multiply(dc, g_g[t], out=v_i)
            v_i *= si[t]
            np.multiply(dc, c_prev, out=v_f)
            v_f *= sf[t]
            np.multiply(dh, TC[t], out=v_o)
            v_o *= so[t]
            np.multiply(dc, i_g[t], out=v_g)
            v_g *= dg_fac[t]
            np.multiply(dc, f_g[t], out=dc_next)
            np.dot(WhT, dzt, out=dh_next)
            dZ[t] = dzt
        # weight gradients: accumulate the per-step outer products
        tmp_x = _buf(f"b_gWx{li}", gWx.shape)
        tmp_h = _buf("b_gWh", gWh.shape)
        for t in range(T):
            np.dot(dZ[t], inp[t].T, out=tmp_x)
            gWx += tmp_x
            if t > 0:
                np.dot(dZ[t], H[t - 1].T, out=tmp_h)
                gWh += tmp_h
        gb[...] = dZ.sum(axis=(0, 2))
        if li > 0:
            dX = _buf(f"b_dX{li}", (T, h, B))
            np.matmul(Wx.T[None], dZ, out=dX)
            dH = dX
    return loss, grad


# --- training -----------------------------------------------------------------

def train(
    spec: Spec,
    data: tuple[np.ndarray, np.ndarray],
    config: TrainConfig,
    val_data: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> TrainReport:
    """Minibatch training with seeded shuffling; deterministic given the config.

    The train curve records the mean of minibatch losses per epoch, the val
    curve the full validation loss after each epoch. When no validation set
    is supplied a seeded 90/10 split of `data` is used.
    """
    X, y = np.asarray(data[0], dtype=float), np.asarray(data[1], dtype=float)
    if len(X) == 0:
        raise TrainError("empty training data")
    rng = np.random.default_rng(config.seed)
    if val_data is None:
        perm = rng.permutation(len(X))
        n_val = max(1, len(X) // 10)
        val_idx, tr_idx = perm[:n_val], perm[n_val:]
        if len(tr_idx) == 0:
            tr_idx = val_idx
        Xv, yv = X[val_idx], y[val_idx]
        X, y = X[tr_idx], y[tr_idx]
    else:
        Xv, yv = np.asarray(val_data[0], dtype=float), np.asarray(val_data[1], dtype=float)

    params = init(spec, config.seed)
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    step = 0
    train_curve = np.zeros(config.epochs)
    val_curve = np.zeros(config.epochs)
    n = len(X)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grad = loss_and_grad(spec, params, X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainError("training diverged", epoch=epoch)
            losses.append(loss)
            if config.optimizer == "sgd":
                params = params - config.learning_rate * grad
            else:
                step += 1
                m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * grad
                v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * grad * grad
                mhat = m / (1 - ADAM_BETA1**step)
                vhat = v / (1 - ADAM_BETA2**step)
                params = params - config.learning_rate * mhat / (np.sqrt(vhat) + ADAM_EPS)
        train_curve[epoch] = np.mean(losses)
        val_pred = forward_batch(spec, params, Xv)
        val_curve[epoch] = np.mean((val_pred - yv) ** 2)
        if not np.isfinite(val_curve[epoch]):
            raise TrainError("validation loss diverged", epoch=epoch)
    return TrainReport(train_curve, val_curve, params)


# --- diagnostics ---------------------------------------------------------------

def kink_margin(spec: Spec, params: np.ndarray, X: np.ndarray) -> float:
    """Distance of the nearest ReLU pre-activation to its kink on this batch.

    Finite-difference gradient checks are only meaningful away from the
    nondifferentiable points; callers can redraw when this is tiny.
    """
    params = _check_params(spec, params)
    X = np.asarray(X, dtype=float)
    if isinstance(spec, MLPSpec):
        _, _, pre = _mlp_batch(spec, params, X, want_cache=True)
        hidden = pre[:-1]
        if not hidden:
            return np.inf
        return float(min(np.min(np.abs(z)) for z in hidden))
    _, _, hT, _ = _lstm_batch(spec, params, X, want_cache=True)
    return float(np.min(np.abs(hT)))


# --- serialization --------------------------------------------------------------

def save_params(path, spec: Spec, params: np.ndarray) -> None:
    """Write magic, spec descriptor and little-endian float64 parameters."""
    params = _check_params(spec, params)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        if isinstance(spec, MLPSpec):
            fh.write(struct.pack("<BI", 0, len(spec.layer_widths)))
            fh.write(struct.pack(f"<{len(spec.layer_widths)}I", *spec.layer_widths))
        else:
            fh.write(struct.pack("<BIII", 1, spec.input_dim, spec.hidden, spec.num_layers))
        fh.write(params.astype("<f8").tobytes())


def load_params(path) -> tuple[Spec, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise SpecError(f"{path}: not a parameter file (bad magic)")
        kind = struct.unpack("<B", fh.read(1))[0]
        if kind == 0:
            (n,) = struct.unpack("<I", fh.read(4))
            widths = struct.unpack(f"<{n}I", fh.read(4 * n))
            spec: Spec = MLPSpec(tuple(widths))
        elif kind == 1:
            d, h, layers = struct.unpack("<III", fh.read(12))
            spec = LSTMSpec(d, h, layers)
        else:
            raise SpecError(f"{path}: unknown spec kind {kind}")
        params = np.frombuffer(fh.read(), dtype="<f8").astype(float)
    return spec, _check_params(spec, params)
