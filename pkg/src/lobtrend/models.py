"""Model architectures and the linear-SVM baseline.

Temporal models (cnn, lstm, cnn_lstm) map (B, T, F) feature sequences to
(B, T, 3) per-step class distributions; the shared classification head is
applied independently at every time step. The MLP and SVM consume flat
windows of 50 steps and predict the label of the window's last step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labels import CLASSES
from .nncore.graph import ModelGraph
from .nncore.layers import (LSTM, BatchNorm, CausalConv1D, Dense, Dropout,
                            Layer, PReLU, Softmax)

ARCHITECTURES = ("mlp", "cnn", "lstm", "cnn_lstm", "linear_svm")

CNN_STACK = ((16, 10), (16, 10), (32, 8), (32, 6), (32, 4))       # (filters, width)
CNN_LSTM_STACK = ((16, 5), (16, 5), (32, 5), (32, 5))
LSTM_HIDDEN = 32
LSTM_HEAD_WIDTH = 64
MLP_WIDTHS = (128, 64, 32)
MLP_WINDOW = 50
N_CLASSES = 3


def _rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    init_ss, dropout_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(dropout_ss)


def _conv_block(layers, prefix, idx, c_in, filters, width, rng, dtype):
    layers.append((f"{prefix}{idx}", CausalConv1D(c_in, filters, width, rng, dtype)))
    layers.append((f"{prefix}{idx}_bn", BatchNorm(filters, dtype)))
    layers.append((f"{prefix}{idx}_act", PReLU(filters, dtype)))
    return filters


def build_cnn(feature_width: int, seed: int = 0, dtype=np.float32,
              strict: bool = True) -> ModelGraph:
    rng, _ = _rngs(seed)
    layers: list[tuple[str, Layer]] = []
    c = feature_width
    for i, (filters, width) in enumerate(CNN_STACK, start=1):
        c = _conv_block(layers, "conv", i, c, filters, width, rng, dtype)
    layers.append(("head", Dense(c, 32, rng, dtype)))
    layers.append(("head_act", PReLU(32, dtype)))
    layers.append(("logits", Dense(32, N_CLASSES, rng, dtype)))
    layers.append(("out", Softmax()))
    meta = {"architecture": "cnn", "feature_width": feature_width, "seed": seed}
    return ModelGraph(layers, dtype=dtype, strict=strict, meta=meta)


def build_lstm(feature_width: int, seed: int = 0, dtype=np.float32,
               strict: bool = True, dropout: float = 0.5,
               sigmoid_cell: bool = True) -> ModelGraph:
    rng, drop_rng = _rngs(seed)
    layers: list[tuple[str, Layer]] = [
        ("lstm", LSTM(feature_width, LSTM_HIDDEN, rng, dtype, sigmoid_cell=sigmoid_cell)),
        ("head", Dense(LSTM_HIDDEN, LSTM_HEAD_WIDTH, rng, dtype)),
        ("head_act", PReLU(LSTM_HEAD_WIDTH, dtype)),
        ("head_drop", Dropout(dropout, drop_rng)),
        ("logits", Dense(LSTM_HEAD_WIDTH, N_CLASSES, rng, dtype)),
        ("out", Softmax()),
    ]
    meta = {"architecture": "lstm", "feature_width": feature_width, "seed": seed,
            "dropout": dropout, "sigmoid_cell": sigmoid_cell}
    return ModelGraph(layers, dtype=dtype, strict=strict, meta=meta)


def build_cnn_lstm(feature_width: int, seed: int = 0, dtype=np.float32,
                   strict: bool = True, dropout: float = 0.5,
                   sigmoid_cell: bool = True) -> ModelGraph:
    rng, drop_rng = _rngs(seed)
    layers: list[tuple[str, Layer]] = []
    c = feature_width
    for i, (filters, width) in enumerate(CNN_LSTM_STACK, start=1):
        c = _conv_block(layers, "conv", i, c, filters, width, rng, dtype)
    layers.append(("lstm", LSTM(c, LSTM_HIDDEN, rng, dtype, sigmoid_cell=sigmoid_cell)))
    layers.append(("head", Dense(LSTM_HIDDEN, LSTM_HEAD_WIDTH, rng, dtype)))
    layers.append(("head_act", PReLU(LSTM_HEAD_WIDTH, dtype)))
    layers.append(("head_drop", Dropout(dropout, drop_rng)))
    layers.append(("logits", Dense(LSTM_HEAD_WIDTH, N_CLASSES, rng, dtype)))
    layers.append(("out", Softmax()))
    meta = {"architecture": "cnn_lstm", "feature_width": feature_width, "seed": seed,
            "dropout": dropout, "sigmoid_cell": sigmoid_cell}
    return ModelGraph(layers, dtype=dtype, strict=strict, meta=meta)


def build_mlp(feature_width: int, window: int = MLP_WINDOW, seed: int = 0,
              dtype=np.float32, strict: bool = True,
              dropout: float = 0.5) -> ModelGraph:
    rng, drop_rng = _rngs(seed)
    layers: list[tuple[str, Layer]] = []
    n_in = window * feature_width
    for i, width in enumerate(MLP_WIDTHS, start=1):
        layers.append((f"fc{i}", Dense(n_in, width, rng, dtype)))
        layers.append((f"fc{i}_act", PReLU(width, dtype)))
        layers.append((f"fc{i}_drop", Dropout(dropout, drop_rng)))
        n_in = width
    layers.append(("logits", Dense(n_in, N_CLASSES, rng, dtype)))
    layers.append(("out", Softmax()))
    meta = {"architecture": "mlp", "feature_width": feature_width, "seed": seed,
            "window": window, "dropout": dropout}
    return ModelGraph(layers, dtype=dtype, strict=strict, meta=meta)


def build_model(architecture: str, feature_width: int, seed: int = 0,
                dtype=np.float32, strict: bool = True, dropout: float = 0.5,
                sigmoid_cell: bool = True, window: int = MLP_WINDOW) -> ModelGraph:
    if architecture == "cnn":
        return build_cnn(feature_width, seed, dtype, strict)
    if architecture == "lstm":
        return build_lstm(feature_width, seed, dtype, strict, dropout, sigmoid_cell)
    if architecture == "cnn_lstm":
        return build_cnn_lstm(feature_width, seed, dtype, strict, dropout, sigmoid_cell)
    if architecture == "mlp":
        return build_mlp(feature_width, window, seed, dtype, strict, dropout)
    raise ValueError(f"unknown architecture '{architecture}'")


def build_from_meta(meta: dict, dtype=np.float32, strict: bool = True) -> ModelGraph:
    return build_model(
        meta["architecture"], meta["feature_width"], seed=meta.get("seed", 0),
        dtype=dtype, strict=strict, dropout=meta.get("dropout", 0.5),
        sigmoid_cell=meta.get("sigmoid_cell", True), window=meta.get("window", MLP_WINDOW))


def apply_per_step(layer: Layer, x: np.ndarray, training: bool = False) -> np.ndarray:
    """Loop-oracle for temporal batching: apply a head layer step by step."""
    steps = [layer.forward(x[:, t], training) for t in range(x.shape[1])]
    return np.stack(steps, axis=1)


# ---------------------------------------------------------------------------
# linear SVM baseline (one-vs-rest hinge, sub-gradient SGD)
# ---------------------------------------------------------------------------

@dataclass
class SVMConfig:
    lr: float = 0.01
    l2: float = 1e-4
    epochs: int = 10
    batch_size: int = 256
    seed: int = 0


class LinearSVM:
    """One linear scorer per class; prediction is the argmax score.

    Ties resolve to the lowest class index (np.argmax takes the first
    maximum). Training minimizes class-weighted hinge loss with L2
    regularization by mini-batch sub-gradient descent.
    """

    def __init__(self, n_features: int, n_classes: int = N_CLASSES):
        self.weights = np.zeros((n_classes, n_features), dtype=np.float64)
        self.bias = np.zeros(n_classes, dtype=np.float64)

    def decision_scores(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.bias

    def predict_idx(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_scores(x), axis=1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(CLASSES, dtype=np.int8)[self.predict_idx(x)]

    def train_epoch(self, x: np.ndarray, y_idx: np.ndarray,
                    sample_weights: np.ndarray, cfg: SVMConfig,
                    rng: np.random.Generator) -> None:
        n = x.shape[0]
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            xb = x[rows]
            yb = y_idx[rows]
            wb = sample_weights[rows]
            scores = xb @ self.weights.T + self.bias          # (m, C)
            targets = np.where(yb[:, None] == np.arange(self.weights.shape[0]),
                               1.0, -1.0)                      # (m, C)
            margins = targets * scores
            active = (margins < 1.0).astype(np.float64) * wb[:, None]
            coeff = active * targets                           # (m, C)
            m = xb.shape[0]
            grad_w = cfg.l2 * self.weights - (coeff.T @ xb) / m
            grad_b = -coeff.sum(axis=0) / m
            self.weights -= cfg.lr * grad_w
            self.bias -= cfg.lr * grad_b

    def fit(self, x: np.ndarray, y_idx: np.ndarray, sample_weights: np.ndarray,
            cfg: SVMConfig) -> None:
        rng = np.random.default_rng(cfg.seed)
        for _ in range(cfg.epochs):
            self.train_epoch(x, y_idx, sample_weights, cfg, rng)
