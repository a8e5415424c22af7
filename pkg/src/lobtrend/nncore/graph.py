"""Ordered layer stacks with chained forward/backward and finiteness guards."""

from __future__ import annotations

import numpy as np

from .layers import Layer


class NonFiniteError(FloatingPointError):
    """Raised the first time a NaN or Inf appears in any layer output."""


def assert_finite(arr: np.ndarray, where: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite value produced at {where}")


class ModelGraph:
    """Sequential model: forward chains layers, backward walks them in reverse.

    One graph is exclusively owned by its training loop; inference on a
    frozen graph is side-effect free (dropout is identity, batch-norm uses
    running statistics).
    """

    def __init__(self, layers: list[tuple[str, Layer]], dtype=np.float32,
                 strict: bool = True, check_finite: bool = True,
                 meta: dict | None = None):
        names = [n for n, _ in layers]
        if len(set(names)) != len(names):
            raise ValueError("layer names must be unique")
        self.layers = list(layers)
        self.dtype = np.dtype(dtype)
        self.strict = strict
        self.check_finite = check_finite
        self.meta = dict(meta or {})
        self._training = False
        for _, layer in self.layers:
            layer.strict = strict

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        h = np.asarray(x, dtype=self.dtype)
        if self.check_finite:
            assert_finite(h, "input")
        for name, layer in self.layers:
            h = layer.forward(h, training)
            if self.check_finite:
                assert_finite(h, f"forward:{name}")
        self._training = training
        return h

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if not self._training:
            raise RuntimeError(
                "backward requires a preceding training-mode forward pass")
        g = np.asarray(dout, dtype=self.dtype)
        for name, layer in reversed(self.layers):
            g = layer.backward(g)
            if self.check_finite:
                assert_finite(g, f"backward:{name}")
        return g

    # ---- parameter access -------------------------------------------------

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self.layers:
            for pname, arr in layer.params.items():
                out[f"{name}.{pname}"] = arr
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self.layers:
            for pname, arr in layer.grads.items():
                out[f"{name}.{pname}"] = arr
        return out

    def state(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self.layers:
            for sname, arr in layer.state.items():
                out[f"{name}.{sname}"] = arr
        return out

    def zero_grads(self) -> None:
        for _, layer in self.layers:
            layer.zero_grads()

    @property
    def num_params(self) -> int:
        return int(sum(v.size for v in self.params().values()))

    def load_arrays(self, params: dict[str, np.ndarray],
                    state: dict[str, np.ndarray] | None = None) -> None:
        own = self.params()
        for name, arr in params.items():
            if name not in own:
                raise KeyError(f"unknown parameter '{name}'")
            if tuple(own[name].shape) != tuple(arr.shape):
                raise ValueError(f"shape mismatch for '{name}': "
                                 f"{own[name].shape} vs {arr.shape}")
            own[name][...] = arr.astype(own[name].dtype)
        if state:
            own_state = self.state()
            for name, arr in state.items():
                if name not in own_state:
                    raise KeyError(f"unknown state array '{name}'")
                own_state[name][...] = arr.astype(own_state[name].dtype)
