"""Layers with explicit forward/backward passes on numpy arrays.

Every layer works on the trailing channel axis and treats all leading axes
as batch, so the same dense/activation stack serves both (B, C) inputs and
per-step application over (B, T, C) sequences. Caches live on the layer
between forward and backward; a layer instance is owned by one training
loop at a time.
"""

from __future__ import annotations

import numpy as np

from . import kernels


def he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def small_uniform(rng: np.random.Generator, shape, scale: float, dtype) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape).astype(dtype)


class Layer:
    """Base: parameters, gradients, and mutable state (e.g. running stats)."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.state: dict[str, np.ndarray] = {}
        self.strict = True

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grads(self) -> None:
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)

    @property
    def num_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))


class Dense(Layer):
    """Affine map on the channel axis; leading axes are flattened to rows.

    In strict mode the forward pass uses a row-independent kernel so that
    batched application over (B, T, C) is bit-identical to applying the
    layer step by step.
    """

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator,
                 dtype=np.float32):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.params = {
            "weight": he_uniform(rng, (n_in, n_out), n_in, dtype),
            "bias": np.zeros(n_out, dtype=dtype),
        }
        self.zero_grads()

    def forward(self, x, training):
        self._in_shape = x.shape
        x2d = np.ascontiguousarray(x.reshape(-1, self.n_in))
        self._x2d = x2d
        if self.strict:
            y2d = kernels.dense_forward_strict(x2d, self.params["weight"],
                                               self.params["bias"])
        else:
            y2d = x2d @ self.params["weight"] + self.params["bias"]
        return y2d.reshape(self._in_shape[:-1] + (self.n_out,))

    def backward(self, dy):
        dy2d = dy.reshape(-1, self.n_out)
        self.grads["weight"] += self._x2d.T @ dy2d
        self.grads["bias"] += dy2d.sum(axis=0)
        return (dy2d @ self.params["weight"].T).reshape(self._in_shape)


class PReLU(Layer):
    """One learnable negative slope per channel, initialized at 0.25."""

    def __init__(self, channels: int, dtype=np.float32, init: float = 0.25):
        super().__init__()
        self.channels = channels
        self.params = {"slope": np.full(channels, init, dtype=dtype)}
        self.zero_grads()

    def forward(self, x, training):
        self._x = x
        self._neg = x < 0
        return np.where(self._neg, x * self.params["slope"], x)

    def backward(self, dy):
        neg = self._neg
        axes = tuple(range(dy.ndim - 1))
        self.grads["slope"] += np.where(neg, dy * self._x, 0.0).sum(axis=axes)
        return np.where(neg, dy * self.params["slope"], dy)


class BatchNorm(Layer):
    """Per-channel normalization over all leading axes; running stats for inference."""

    def __init__(self, channels: int, dtype=np.float32,
                 momentum: float = 0.99, eps: float = 1e-5):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.params = {
            "gamma": np.ones(channels, dtype=dtype),
            "beta": np.zeros(channels, dtype=dtype),
        }
        self.state = {
            "run_mean": np.zeros(channels, dtype=dtype),
            "run_var": np.ones(channels, dtype=dtype),
        }
        self.zero_grads()

    def forward(self, x, training):
        axes = tuple(range(x.ndim - 1))
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.state["run_mean"] = (self.momentum * self.state["run_mean"]
                                      + (1.0 - self.momentum) * mean).astype(x.dtype)
            self.state["run_var"] = (self.momentum * self.state["run_var"]
                                     + (1.0 - self.momentum) * var).astype(x.dtype)
            self._x = x
            self._mean = mean
            self._var = var
            self._inv_std = 1.0 / np.sqrt(var + self.eps)
            self._xhat = (x - mean) * self._inv_std
            self._n = int(np.prod([x.shape[a] for a in axes]))
            return self.params["gamma"] * self._xhat + self.params["beta"]
        xhat = (x - self.state["run_mean"]) / np.sqrt(self.state["run_var"] + self.eps)
        return self.params["gamma"] * xhat + self.params["beta"]

    def backward(self, dy):
        axes = tuple(range(dy.ndim - 1))
        gamma = self.params["gamma"]
        self.grads["beta"] += dy.sum(axis=axes)
        self.grads["gamma"] += (dy * self._xhat).sum(axis=axes)
        dxhat = dy * gamma
        xc = self._x - self._mean
        n = self._n
        dvar = (dxhat * xc).sum(axis=axes) * (-0.5) * self._inv_std ** 3
        dmean = (-self._inv_std) * dxhat.sum(axis=axes) + dvar * (-2.0 / n) * xc.sum(axis=axes)
        return dxhat * self._inv_std + dvar * 2.0 * xc / n + dmean / n


class Dropout(Layer):
    """Inverted dropout; identity at inference."""

    def __init__(self, rate: float, rng: np.random.Generator):
        super().__init__()
        if not (0.0 <= rate < 1.0):
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate
        self.rng = rng

    def forward(self, x, training):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (self.rng.random(x.shape) < keep).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, dy):
        if self._mask is None:
            return dy
        return dy * self._mask


class CausalConv1D(Layer):
    """1-d convolution over time, left-padded so step t sees only steps <= t."""

    def __init__(self, in_channels: int, filters: int, width: int,
                 rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.in_channels = in_channels
        self.filters = filters
        self.width = width
        fan_in = width * in_channels
        self.params = {
            "weight": he_uniform(rng, (filters, width, in_channels), fan_in, dtype),
            "bias": np.zeros(filters, dtype=dtype),
        }
        self.zero_grads()

    def forward(self, x, training):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ValueError(
                f"expected (B, T, {self.in_channels}) input, got {x.shape}")
        self._x = np.ascontiguousarray(x)
        return kernels.conv1d_forward(self._x, self.params["weight"],
                                      self.params["bias"])

    def backward(self, dy):
        dx, dw, db = kernels.conv1d_backward(self._x, self.params["weight"],
                                             np.ascontiguousarray(dy))
        self.grads["weight"] += dw
        self.grads["bias"] += db
        return dx


class LSTM(Layer):
    """Recurrent layer emitting the full hidden sequence (B, T, H).

    Default cell follows the variant where the output gate reads the
    current cell state and the hidden output squashes the cell with a
    sigmoid; ``sigmoid_cell=False`` selects the conventional tanh cell with
    an input-driven output gate.
    """

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator,
                 dtype=np.float32, sigmoid_cell: bool = True):
        super().__init__()
        self.n_in = n_in
        self.hidden = hidden
        self.sigmoid_cell = sigmoid_cell
        scale = 1.0 / np.sqrt(hidden)
        out_src_dim = hidden if sigmoid_cell else n_in
        self.params = {
            "w_in": he_uniform(rng, (n_in, 3 * hidden), n_in, dtype),
            "w_rec": small_uniform(rng, (hidden, 3 * hidden), scale, dtype),
            "b_gates": np.zeros(3 * hidden, dtype=dtype),
            "w_out_src": he_uniform(rng, (out_src_dim, hidden), out_src_dim, dtype),
            "w_out_rec": small_uniform(rng, (hidden, hidden), scale, dtype),
            "b_out": np.zeros(hidden, dtype=dtype),
        }
        self.zero_grads()

    def forward(self, x, training):
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise ValueError(f"expected (B, T, {self.n_in}) input, got {x.shape}")
        xt = np.ascontiguousarray(x.transpose(1, 0, 2))   # (T, B, N)
        self._xt = xt
        p = self.params
        h, gates, o, c, s = kernels.lstm_forward(
            xt, p["w_in"], p["w_rec"], p["b_gates"],
            p["w_out_src"], p["w_out_rec"], p["b_out"], self.sigmoid_cell)
        self._cache = (h, gates, o, c, s)
        return np.ascontiguousarray(h.transpose(1, 0, 2))

    def backward(self, dy):
        h, gates, o, c, s = self._cache
        p = self.params
        dh_out = np.ascontiguousarray(dy.transpose(1, 0, 2))
        dx, dw_in, dw_rec, db, dw_os, dw_or, db_out = kernels.lstm_backward(
            self._xt, p["w_in"], p["w_rec"], p["b_gates"],
            p["w_out_src"], p["w_out_rec"], p["b_out"], self.sigmoid_cell,
            h, gates, o, c, s, dh_out)
        self.grads["w_in"] += dw_in
        self.grads["w_rec"] += dw_rec
        self.grads["b_gates"] += db
        self.grads["w_out_src"] += dw_os
        self.grads["w_out_rec"] += dw_or
        self.grads["b_out"] += db_out
        return np.ascontiguousarray(dx.transpose(1, 0, 2))


class Softmax(Layer):
    """Row-stochastic output over the channel axis (shift-stabilized)."""

    def forward(self, x, training):
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        self._y = e / e.sum(axis=-1, keepdims=True)
        return self._y

    def backward(self, dy):
        y = self._y
        dot = (dy * y).sum(axis=-1, keepdims=True)
        return y * (dy - dot)
