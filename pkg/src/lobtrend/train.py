"""Training and evaluation loops over windowed feature/label days.

Temporal models see non-overlapping windows of ``window`` steps (never
crossing a day boundary); a per-step label accompanies every step. Steps
without a defined label (the day's final ``k`` events) and steps inside
the burn-in prefix are masked out of both the loss and the evaluation.
MLP/SVM samples are rolling flat windows labelled at their last step.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .features import FeatureMatrix
from .labels import ClassWeights, LabelSeries, class_weights_from_labels
from .metrics import ConfusionMatrix, accumulate, kappa, macro_scores
from .models import MLP_WINDOW, LinearSVM, SVMConfig, build_model
from .nncore.graph import ModelGraph
from .nncore.losses import weighted_cross_entropy
from .nncore.optim import RMSProp

LABEL_TO_IDX_OFFSET = 1     # class index = label + 1, classes ordered (-1, 0, +1)
IDX_TO_LABEL = np.array([-1, 0, 1], dtype=np.int8)

TEMPORAL_ARCHS = ("cnn", "lstm", "cnn_lstm")
FLAT_ARCHS = ("mlp", "linear_svm")


class TrainError(ValueError):
    pass


@dataclass
class TrainConfig:
    architecture: str = "cnn_lstm"
    horizon: int = 100
    alpha: float = 3e-4
    window: int = 300            # T for temporal models
    window_stride: int = 0       # training-window stride; 0 = non-overlapping
    burn_in: int = 100           # masked prefix; forced to 0 for mlp/svm
    epochs: int = 60
    batch_size: int = 64
    lr: float = 1e-3
    rms_decay: float = 0.9
    rms_eps: float = 1e-7
    dropout: float = 0.5
    mlp_window: int = MLP_WINDOW
    flat_stride: int = 1         # rolling stride of mlp/svm windows
    svm_lr: float = 0.01
    svm_l2: float = 1e-4
    seed: int = 0
    strict: bool = True
    sigmoid_cell: bool = True
    eval_train: bool = True   # False skips per-epoch train-split evaluation

    def __post_init__(self):
        if self.architecture in FLAT_ARCHS:
            self.burn_in = 0
        if self.architecture in TEMPORAL_ARCHS and self.window <= self.burn_in:
            raise TrainError(
                f"window {self.window} must exceed burn_in {self.burn_in}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise TrainError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    split: str
    kappa: float
    recall: float
    precision: float
    f1: float
    f1_macro_pr: float
    loss: float

    def to_line(self) -> str:
        return (f"{self.epoch},{self.split},{self.kappa:.6f},{self.recall:.6f},"
                f"{self.precision:.6f},{self.f1:.6f},{self.f1_macro_pr:.6f},"
                f"{self.loss:.6f}")

    @staticmethod
    def header() -> str:
        return "epoch,split,kappa,recall,precision,f1,f1_macro_pr,loss"


@dataclass
class TrainResult:
    config: TrainConfig
    records: list[EpochRecord]
    class_weights: ClassWeights
    graph: ModelGraph | None = None
    optimizer: RMSProp | None = None
    svm: LinearSVM | None = None
    step_loss_profile: np.ndarray | None = None   # mean test loss per step t

    def last_epochs_summary(self, n: int = 20, split: str = "test") -> dict:
        rows = [r for r in self.records if r.split == split][-n:]
        if not rows:
            raise TrainError(f"no records for split '{split}'")
        return {
            "kappa": float(np.mean([r.kappa for r in rows])),
            "recall": float(np.mean([r.recall for r in rows])),
            "precision": float(np.mean([r.precision for r in rows])),
            "f1": float(np.mean([r.f1 for r in rows])),
            "f1_macro_pr": float(np.mean([r.f1_macro_pr for r in rows])),
            "loss": float(np.mean([r.loss for r in rows])),
            "epochs_averaged": len(rows),
        }


# ---------------------------------------------------------------------------
# window assembly
# ---------------------------------------------------------------------------

def _day_label_arrays(m: FeatureMatrix, ls: LabelSeries):
    """Per-row label index (0..2) and defined-mask for one day."""
    snap = m.snapshot_index
    defined = (snap >= ls.valid_start) & (snap <= ls.valid_end)
    labels = ls.labels[np.clip(snap, 0, len(ls.labels) - 1)]
    return (labels.astype(np.int64) + LABEL_TO_IDX_OFFSET), defined


def make_sequence_windows(days: Sequence[tuple[FeatureMatrix, LabelSeries]],
                          window: int, stride: int = 0):
    """(X, Y, defined) windows, each inside a single day.

    ``stride`` < ``window`` overlaps consecutive training windows for more
    optimizer steps per epoch; the default (0) means non-overlapping, which
    evaluation always uses so no step is counted twice.
    """
    if stride <= 0:
        stride = window
    xs, ys, ms = [], [], []
    for m, ls in days:
        if m.rows != len(ls.labels) - 1:
            raise TrainError(
                f"feature rows ({m.rows}) misaligned with labels ({len(ls.labels)})")
        y_idx, defined = _day_label_arrays(m, ls)
        for start in range(0, m.rows - window + 1, stride):
            sl = slice(start, start + window)
            xs.append(m.values[sl].astype(np.float32))
            ys.append(y_idx[sl])
            ms.append(defined[sl])
    if not xs:
        raise TrainError(f"no day provides a full window of {window} steps")
    return np.stack(xs), np.stack(ys), np.stack(ms)


def make_flat_windows(days: Sequence[tuple[FeatureMatrix, LabelSeries]],
                      window: int, stride: int = 1):
    """Rolling flat windows labelled at the last step; undefined ones dropped."""
    xs, ys = [], []
    for m, ls in days:
        y_idx, defined = _day_label_arrays(m, ls)
        if m.rows < window:
            continue
        views = sliding_window_view(m.values.astype(np.float32), window, axis=0)
        # views: (rows - window + 1, F, window); flatten time-major below
        for start in range(0, m.rows - window + 1, stride):
            last = start + window - 1
            if not defined[last]:
                continue
            xs.append(views[start].T.reshape(-1))
            ys.append(y_idx[last])
    if not xs:
        raise TrainError("no labelled flat windows available")
    return np.stack(xs), np.asarray(ys, dtype=np.int64)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate_sequences(graph: ModelGraph, x, y_idx, defined, burn_in: int,
                       weights: ClassWeights, batch_size: int = 64):
    """Inference-mode metrics over steps that are defined and past burn-in.

    Also returns the per-step mean loss profile over all defined steps
    (burn-in included) for the loss-vs-step diagnostic.
    """
    T = x.shape[1]
    eval_mask = defined.copy()
    eval_mask[:, :burn_in] = False
    cm = ConfusionMatrix()
    loss_total = 0.0
    n_total = 0
    step_loss_sum = np.zeros(T)
    step_loss_count = np.zeros(T)
    w = weights.weights
    for start in range(0, x.shape[0], batch_size):
        sl = slice(start, start + batch_size)
        probs = graph.forward(x[sl], training=False)
        loss, _, n_terms, per_pos = weighted_cross_entropy(
            probs, y_idx[sl], w, eval_mask[sl])
        loss_total += loss
        n_total += n_terms
        _, _, _, per_pos_all = weighted_cross_entropy(
            probs, y_idx[sl], w, defined[sl])
        step_loss_sum += np.where(defined[sl], per_pos_all, 0.0).sum(axis=0)
        step_loss_count += defined[sl].sum(axis=0)
        pred = probs.argmax(axis=-1)
        sel = eval_mask[sl]
        accumulate(IDX_TO_LABEL[y_idx[sl][sel]], IDX_TO_LABEL[pred[sel]], into=cm)
    profile = np.divide(step_loss_sum, step_loss_count,
                        out=np.zeros_like(step_loss_sum),
                        where=step_loss_count > 0)
    mean_loss = loss_total / max(n_total, 1)
    return cm, mean_loss, profile


def evaluate_flat(predict_idx, x, y_idx, weights: ClassWeights,
                  probs_fn=None, batch_size: int = 4096):
    cm = ConfusionMatrix()
    loss_total = 0.0
    n_total = 0
    for start in range(0, x.shape[0], batch_size):
        sl = slice(start, start + batch_size)
        pred = predict_idx(x[sl])
        accumulate(IDX_TO_LABEL[y_idx[sl]], IDX_TO_LABEL[pred], into=cm)
        if probs_fn is not None:
            loss, _, n_terms, _ = weighted_cross_entropy(
                probs_fn(x[sl]), y_idx[sl], weights.weights)
            loss_total += loss
            n_total += n_terms
    return cm, (loss_total / max(n_total, 1)) if n_total else 0.0


def _record(epoch: int, split: str, cm: ConfusionMatrix, loss: float) -> EpochRecord:
    scores = macro_scores(cm)
    return EpochRecord(epoch=epoch, split=split, kappa=kappa(cm),
                       recall=scores.recall, precision=scores.precision,
                       f1=scores.f1, f1_macro_pr=scores.f1_macro_pr, loss=loss)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def train_model(train_days, test_days, cfg: TrainConfig,
                verbose: bool = False) -> TrainResult:
    if cfg.architecture in TEMPORAL_ARCHS:
        return _train_temporal(train_days, test_days, cfg, verbose)
    if cfg.architecture == "mlp":
        return _train_mlp(train_days, test_days, cfg, verbose)
    if cfg.architecture == "linear_svm":
        return _train_svm(train_days, test_days, cfg, verbose)
    raise TrainError(f"unknown architecture '{cfg.architecture}'")


def _train_weights(y_idx: np.ndarray, mask: np.ndarray | None) -> ClassWeights:
    labels = IDX_TO_LABEL[y_idx[mask]] if mask is not None else IDX_TO_LABEL[y_idx]
    return class_weights_from_labels(labels)


def _train_temporal(train_days, test_days, cfg: TrainConfig,
                    verbose: bool) -> TrainResult:
    x_tr, y_tr, m_tr = make_sequence_windows(train_days, cfg.window,
                                             cfg.window_stride)
    x_te, y_te, m_te = make_sequence_windows(test_days, cfg.window)
    overlapped = 0 < cfg.window_stride < cfg.window
    if cfg.eval_train and overlapped:
        # train-split metrics must not double-count overlapped steps
        x_tr_ev, y_tr_ev, m_tr_ev = make_sequence_windows(train_days, cfg.window)
    else:
        x_tr_ev, y_tr_ev, m_tr_ev = x_tr, y_tr, m_tr
    feature_width = x_tr.shape[2]
    weights = _train_weights(y_tr_ev, m_tr_ev)

    graph = build_model(cfg.architecture, feature_width, seed=cfg.seed,
                        strict=cfg.strict, dropout=cfg.dropout,
                        sigmoid_cell=cfg.sigmoid_cell)
    graph.meta.update({"horizon": cfg.horizon, "alpha": cfg.alpha,
                       "window": cfg.window, "burn_in": cfg.burn_in})
    opt = RMSProp(lr=cfg.lr, decay=cfg.rms_decay, eps=cfg.rms_eps)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xBA7C4]))

    loss_mask_tr = m_tr.copy()
    loss_mask_tr[:, :cfg.burn_in] = False
    w = weights.weights
    records: list[EpochRecord] = []
    profile = None
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(x_tr.shape[0])
        for start in range(0, order.size, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            probs = graph.forward(x_tr[rows], training=True)
            _, dprobs, n_terms, _ = weighted_cross_entropy(
                probs, y_tr[rows], w, loss_mask_tr[rows])
            graph.zero_grads()
            # gradient of the per-term mean: same minimizer as the summed
            # loss, but the step scale no longer depends on how many steps
            # a batch happens to contribute
            graph.backward(dprobs / max(n_terms, 1))
            opt.step(graph.params(), graph.grads())
        if cfg.eval_train:
            cm_tr, loss_tr, _ = evaluate_sequences(
                graph, x_tr_ev, y_tr_ev, m_tr_ev, cfg.burn_in, weights,
                cfg.batch_size)
            records.append(_record(epoch, "train", cm_tr, loss_tr))
        cm_te, loss_te, profile = evaluate_sequences(
            graph, x_te, y_te, m_te, cfg.burn_in, weights, cfg.batch_size)
        records.append(_record(epoch, "test", cm_te, loss_te))
        if verbose:
            print(f"epoch {epoch:3d}  test κ={records[-1].kappa:+.3f} "
                  f"f1={records[-1].f1:.3f}")
    return TrainResult(config=cfg, records=records, class_weights=weights,
                       graph=graph, optimizer=opt, step_loss_profile=profile)


def _train_mlp(train_days, test_days, cfg: TrainConfig,
               verbose: bool) -> TrainResult:
    x_tr, y_tr = make_flat_windows(train_days, cfg.mlp_window, cfg.flat_stride)
    x_te, y_te = make_flat_windows(test_days, cfg.mlp_window, cfg.flat_stride)
    feature_width = train_days[0][0].feature_width
    weights = _train_weights(y_tr, None)

    graph = build_model("mlp", feature_width, seed=cfg.seed, strict=cfg.strict,
                        dropout=cfg.dropout, window=cfg.mlp_window)
    graph.meta.update({"horizon": cfg.horizon, "alpha": cfg.alpha})
    opt = RMSProp(lr=cfg.lr, decay=cfg.rms_decay, eps=cfg.rms_eps)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xBA7C4]))
    w = weights.weights
    records: list[EpochRecord] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(x_tr.shape[0])
        for start in range(0, order.size, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            probs = graph.forward(x_tr[rows], training=True)
            _, dprobs, n_terms, _ = weighted_cross_entropy(probs, y_tr[rows], w)
            graph.zero_grads()
            graph.backward(dprobs / max(n_terms, 1))
            opt.step(graph.params(), graph.grads())

        def probs_fn(xb):
            return graph.forward(xb, training=False)

        def pred_fn(xb):
            return graph.forward(xb, training=False).argmax(axis=-1)

        if cfg.eval_train:
            cm_tr, loss_tr = evaluate_flat(pred_fn, x_tr, y_tr, weights, probs_fn)
            records.append(_record(epoch, "train", cm_tr, loss_tr))
        cm_te, loss_te = evaluate_flat(pred_fn, x_te, y_te, weights, probs_fn)
        records.append(_record(epoch, "test", cm_te, loss_te))
        if verbose:
            print(f"epoch {epoch:3d}  test κ={records[-1].kappa:+.3f}")
    return TrainResult(config=cfg, records=records, class_weights=weights,
                       graph=graph, optimizer=opt)


def _train_svm(train_days, test_days, cfg: TrainConfig,
               verbose: bool) -> TrainResult:
    x_tr, y_tr = make_flat_windows(train_days, cfg.mlp_window, cfg.flat_stride)
    x_te, y_te = make_flat_windows(test_days, cfg.mlp_window, cfg.flat_stride)
    x_tr = x_tr.astype(np.float64)
    x_te = x_te.astype(np.float64)
    weights = _train_weights(y_tr, None)
    sample_w = weights.weights[y_tr]

    svm = LinearSVM(n_features=x_tr.shape[1])
    svm_cfg = SVMConfig(lr=cfg.svm_lr, l2=cfg.svm_l2, epochs=1,
                        batch_size=cfg.batch_size, seed=cfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xBA7C4]))
    records: list[EpochRecord] = []
    for epoch in range(1, cfg.epochs + 1):
        svm.train_epoch(x_tr, y_tr, sample_w, svm_cfg, rng)
        if cfg.eval_train:
            cm_tr, _ = evaluate_flat(svm.predict_idx, x_tr, y_tr, weights)
            records.append(_record(epoch, "train", cm_tr, 0.0))
        cm_te, _ = evaluate_flat(svm.predict_idx, x_te, y_te, weights)
        records.append(_record(epoch, "test", cm_te, 0.0))
        if verbose:
            print(f"epoch {epoch:3d}  test κ={records[-1].kappa:+.3f}")
    return TrainResult(config=cfg, records=records, class_weights=weights,
                       svm=svm)


def write_records(records: list[EpochRecord], path) -> None:
    with open(path, "w") as fh:
        fh.write(EpochRecord.header() + "\n")
        for r in records:
            fh.write(r.to_line() + "\n")


def write_step_loss_profile(profile: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("step,mean_loss\n")
        for t, v in enumerate(profile):
            fh.write(f"{t},{v:.8f}\n")
