"""End-to-end experiment orchestration: synth -> features -> labels -> train -> report.

An experiment config describes a synthetic multi-day dataset, the feature
modes, the (horizon, alpha) grid and the model list. Days are the split
unit: the first ``train_days`` model days train, the rest test. Raw-mode
normalization needs a previous day, so one extra leading day is generated
and used only as the statistics day; both feature modes then share the
same model days and split.

Everything is a pure function of the config: identical config -> identical
bytes in every artifact (no timestamps, derived seeds only).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import datagen
from .book import SnapshotSeries, write_snapshot_stream
from .features import (FeatureMatrix, NormStats, apply_norm, fit_norm_stats_many,
                       raw_prenorm, stationary_prenorm, write_features)
from .labels import LabelSeries, label_series, write_labels
from .book import mid_prices
from .nncore.checkpoint import save_checkpoint
from .binio import write_container
from .train import (TrainConfig, train_model, write_records,
                    write_step_loss_profile)

DEFAULT_HORIZONS = (10, 50, 100, 200)
DEFAULT_ALPHAS = (2e-5, 9e-5, 3e-4, 3.5e-4)
ALL_MODELS = ("linear_svm", "mlp", "cnn", "lstm", "cnn_lstm")
RAW_MODELS = ("linear_svm", "mlp", "cnn", "lstm")   # table rows: no cnn_lstm under raw


class ExperimentError(ValueError):
    pass


@dataclass
class SynthPlan:
    """Multi-day generator plan: alternating drift regimes per day."""

    n_days: int = 10
    events_per_day: int = 3000
    regime_length: int = 500
    drift_ticks: float = 1.0        # magnitude of the trending regimes
    noise_ticks: float = 0.0
    tick_size: float = 0.01
    base_price: float = 10.0
    day_price_growth: float = 0.0   # relative day-over-day base price drift
    volume_mean: float = 5.0
    volume_dispersion: float = 0.5
    persistent_volume: float = 0.9
    flow_imbalance: float = 0.0
    imbalance_mode: str = "level"
    imbalance_pulse_period: int = 16
    imbalance_pulse_width: int = 4
    imbalance_pulse_lag: int = 0
    seed: int = 7

    def day_config(self, day: int) -> datagen.SynthConfig:
        # deterministic per-day seed and regime phase
        seed = int(np.random.SeedSequence([self.seed, day]).generate_state(1)[0])
        phase_rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, day, 1]))
        drift = self.drift_ticks * self.tick_size
        noise = self.noise_ticks * self.tick_size
        cycle = [+drift, 0.0, -drift, 0.0]
        offset = int(phase_rng.integers(4))
        regimes = []
        remaining = self.events_per_day
        i = 0
        while remaining > 0:
            length = min(self.regime_length, remaining)
            regimes.append(datagen.Regime(
                length=length, drift=cycle[(offset + i) % 4], noise_std=noise))
            remaining -= length
            i += 1
        base = self.base_price * (1.0 + self.day_price_growth) ** day
        return datagen.SynthConfig(
            n_events=self.events_per_day, regimes=regimes,
            tick_size=self.tick_size, base_price=base,
            volume_mean=self.volume_mean, volume_dispersion=self.volume_dispersion,
            persistent_volume=self.persistent_volume,
            flow_imbalance=self.flow_imbalance,
            imbalance_mode=self.imbalance_mode,
            imbalance_pulse_period=self.imbalance_pulse_period,
            imbalance_pulse_width=self.imbalance_pulse_width,
            imbalance_pulse_lag=self.imbalance_pulse_lag, seed=seed,
            stock_id="SYNTH", day_id=f"day_{day:02d}")

    def generate_days(self) -> list[SnapshotSeries]:
        """n_days model days plus one leading stats day (index 0)."""
        return [datagen.generate(self.day_config(d)) for d in range(self.n_days + 1)]


@dataclass
class ExperimentConfig:
    synth: SynthPlan = field(default_factory=SynthPlan)
    train_days: int = 7
    test_days: int = 3
    feature_modes: tuple[str, ...] = ("stationary", "raw")
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    models: tuple[str, ...] = ALL_MODELS
    training: dict = field(default_factory=dict)   # TrainConfig overrides
    last_epochs: int = 20
    seed: int = 0

    def validate(self) -> None:
        if len(self.horizons) != len(self.alphas):
            raise ExperimentError("horizons and alphas must have equal length")
        if self.train_days + self.test_days != self.synth.n_days:
            raise ExperimentError(
                f"train_days + test_days = {self.train_days + self.test_days} "
                f"!= n_days = {self.synth.n_days}")
        for mode in self.feature_modes:
            if mode not in ("stationary", "raw"):
                raise ExperimentError(f"unknown feature mode '{mode}'")
        for m in self.models:
            if m not in ALL_MODELS:
                raise ExperimentError(f"unknown model '{m}'")

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "synth" in d:
            d["synth"] = SynthPlan(**d["synth"])
        for key in ("feature_modes", "horizons", "alphas", "models"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ExperimentError(str(exc))

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# feature/label preparation (shared by the CLI and the report runner)
# ---------------------------------------------------------------------------

def extract_mode_features(
    days: list[SnapshotSeries], mode: str, n_train: int
) -> tuple[list[FeatureMatrix], NormStats | list[NormStats]]:
    """Normalized features for model days (days[1:]); days[0] feeds raw stats.

    Stationary stats are fitted on the training model days only and frozen;
    raw mode normalizes each day with its previous day's statistics.
    """
    model_days = days[1:]
    if mode == "stationary":
        pre = [stationary_prenorm(s) for s in model_days]
        stats = fit_norm_stats_many(pre[:n_train])
        stats_meta = stats.to_dict()
        stats_meta["fitted_on"] = [m.day_id for m in pre[:n_train]]
        return [apply_norm(m, stats) for m in pre], stats
    if mode == "raw":
        mats = []
        day_stats = []
        for i, s in enumerate(model_days):
            prev = days[i]           # model day i has generated index i+1
            prev_stats = fit_norm_stats_many([raw_prenorm(prev)])
            mats.append(apply_norm(raw_prenorm(s), prev_stats))
            day_stats.append(prev_stats)
        return mats, day_stats
    raise ExperimentError(f"unknown feature mode '{mode}'")


def label_days(days: list[SnapshotSeries], k: int, alpha: float) -> list[LabelSeries]:
    return [label_series(mid_prices(s), k, alpha) for s in days]


# ---------------------------------------------------------------------------
# report runner
# ---------------------------------------------------------------------------

@dataclass
class CellResult:
    feature_mode: str
    model: str
    horizon: int
    alpha: float
    summary: dict
    config_hash: str


def run_cell(feats: list[FeatureMatrix], labels: list[LabelSeries],
             cfg: ExperimentConfig, mode: str, model: str,
             k: int, alpha: float, out_dir: Path | None = None,
             verbose: bool = False) -> CellResult:
    n_train = cfg.train_days
    train = list(zip(feats[:n_train], labels[:n_train]))
    test = list(zip(feats[n_train:], labels[n_train:]))
    overrides = dict(cfg.training)
    overrides.update({"architecture": model, "horizon": k, "alpha": alpha,
                      "seed": overrides.get("seed", cfg.seed)})
    tcfg = TrainConfig.from_dict(overrides)
    result = train_model(train, test, tcfg, verbose=verbose)
    cell_id = {"mode": mode, "model": model, "k": k, "alpha": alpha,
               "experiment": cfg.to_dict()}
    chash = config_hash(cell_id)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_records(result.records, out_dir / "metrics.csv")
        if result.graph is not None:
            result.graph.meta["config_hash"] = chash
            save_checkpoint(out_dir / "checkpoint.ckpt", result.graph,
                            result.optimizer,
                            extra_meta={"cell": {"mode": mode, "model": model,
                                                 "k": k, "alpha": alpha}})
        if result.svm is not None:
            write_container(out_dir / "checkpoint.ckpt",
                            {"format": "lobtrend-svm", "cell_hash": chash},
                            {"weights": result.svm.weights, "bias": result.svm.bias})
        if result.step_loss_profile is not None:
            write_step_loss_profile(result.step_loss_profile,
                                    out_dir / "step_loss.csv")
    summary = result.last_epochs_summary(cfg.last_epochs, "test")
    return CellResult(feature_mode=mode, model=model, horizon=k, alpha=alpha,
                      summary=summary, config_hash=chash)


def models_for_mode(cfg: ExperimentConfig, mode: str) -> tuple[str, ...]:
    if mode == "raw":
        return tuple(m for m in cfg.models if m in RAW_MODELS)
    return cfg.models


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path,
                   verbose: bool = False) -> list[CellResult]:
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    days = cfg.synth.generate_days()
    days_dir = out / "days"
    days_dir.mkdir(exist_ok=True)
    for s in days:
        write_snapshot_stream(s, days_dir / f"{s.day_id}.csv")

    mode_feats: dict[str, list[FeatureMatrix]] = {}
    for mode in cfg.feature_modes:
        feats, stats = extract_mode_features(days, mode, cfg.train_days)
        mode_feats[mode] = feats
        fdir = out / "features" / mode
        fdir.mkdir(parents=True, exist_ok=True)
        if mode == "stationary":
            provenance = {"fitted_on": [m.day_id for m in feats[:cfg.train_days]]}
            (fdir / "stats.json").write_text(
                json.dumps({**stats.to_dict(), **provenance},
                           indent=2, sort_keys=True) + "\n")
            for m in feats:
                write_features(fdir / f"{m.day_id}.feat", m, stats)
        else:
            for m, st in zip(feats, stats):
                write_features(fdir / f"{m.day_id}.feat", m, st)

    results: list[CellResult] = []
    for k, alpha in zip(cfg.horizons, cfg.alphas):
        labels = label_days(days[1:], k, alpha)
        ldir = out / "labels" / f"k{k}"
        ldir.mkdir(parents=True, exist_ok=True)
        for s, ls in zip(days[1:], labels):
            write_labels(ls, ldir / f"{s.day_id}.labels")
        for mode in cfg.feature_modes:
            for model in models_for_mode(cfg, mode):
                cell_dir = out / "runs" / f"{mode}_{model}_k{k}"
                if verbose:
                    print(f"[cell] mode={mode} model={model} k={k} alpha={alpha}")
                results.append(run_cell(mode_feats[mode], labels, cfg, mode,
                                        model, k, alpha, cell_dir, verbose))

    write_report(results, cfg, out)
    return results


def write_report(results: list[CellResult], cfg: ExperimentConfig,
                 out: Path) -> None:
    lines_csv = ["feature_mode,model,horizon,alpha,kappa,recall,precision,"
                 "f1,f1_macro_pr,loss,epochs_averaged,config_hash"]
    for r in results:
        s = r.summary
        lines_csv.append(
            f"{r.feature_mode},{r.model},{r.horizon},{r.alpha!r},"
            f"{s['kappa']:.6f},{s['recall']:.6f},{s['precision']:.6f},"
            f"{s['f1']:.6f},{s['f1_macro_pr']:.6f},{s['loss']:.6f},"
            f"{s['epochs_averaged']},{r.config_hash}")
    (out / "report.csv").write_text("\n".join(lines_csv) + "\n")

    by_cell = {(r.feature_mode, r.model, r.horizon): r for r in results}
    mode_title = {"raw": "Raw Values", "stationary": "Stationary Features"}
    model_title = {"linear_svm": "SVM", "mlp": "MLP", "cnn": "CNN",
                   "lstm": "LSTM", "cnn_lstm": "CNNLSTM"}
    text = ["Mean of the last %d test epochs per cell" % cfg.last_epochs, ""]
    for k in cfg.horizons:
        text.append(f"Prediction Horizon k={k}")
        text.append(f"{'Feature Type':<22}{'Model':<10}{'Recall':>8}"
                    f"{'Precision':>11}{'F1':>8}{'Kappa':>8}")
        for mode in ("raw", "stationary"):
            if mode not in cfg.feature_modes:
                continue
            for model in models_for_mode(cfg, mode):
                r = by_cell.get((mode, model, k))
                if r is None:
                    continue
                s = r.summary
                text.append(f"{mode_title[mode]:<22}{model_title[model]:<10}"
                            f"{s['recall']:>8.2f}{s['precision']:>11.2f}"
                            f"{s['f1']:>8.2f}{s['kappa']:>8.2f}")
        text.append("")
    (out / "report.txt").write_text("\n".join(text))
