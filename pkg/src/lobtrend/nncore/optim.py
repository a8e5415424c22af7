"""Parameter update rules. Updates are applied in place."""

from __future__ import annotations

import numpy as np


class GradientDescent:
    """Plain descent: p <- p - lr * g."""

    kind = "sgd"

    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, p in params.items():
            p -= (self.lr * grads[name]).astype(p.dtype, copy=False)

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        pass

    def config(self) -> dict:
        return {"kind": self.kind, "lr": self.lr}


class RMSProp:
    """Moving average of squared gradients scales each parameter's step."""

    kind = "rmsprop"

    def __init__(self, lr: float = 1e-3, decay: float = 0.9, eps: float = 1e-7):
        self.lr = lr
        self.decay = decay
        self.eps = eps
        self.sq_avg: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, p in params.items():
            g = grads[name]
            acc = self.sq_avg.get(name)
            if acc is None:
                acc = np.zeros_like(p)
                self.sq_avg[name] = acc
            acc *= self.decay
            acc += ((1.0 - self.decay) * g * g).astype(p.dtype, copy=False)
            p -= (self.lr * g / np.sqrt(acc + self.eps)).astype(p.dtype, copy=False)

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {f"sq_avg.{k}": v for k, v in self.sq_avg.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.sq_avg = {k[len("sq_avg."):]: v.copy()
                       for k, v in arrays.items() if k.startswith("sq_avg.")}

    def config(self) -> dict:
        return {"kind": self.kind, "lr": self.lr, "decay": self.decay, "eps": self.eps}


def make_optimizer(cfg: dict):
    kind = cfg.get("kind", "rmsprop")
    if kind == "rmsprop":
        return RMSProp(lr=cfg.get("lr", 1e-3), decay=cfg.get("decay", 0.9),
                       eps=cfg.get("eps", 1e-7))
    if kind == "sgd":
        return GradientDescent(lr=cfg.get("lr", 1e-3))
    raise ValueError(f"unknown optimizer kind '{kind}'")
