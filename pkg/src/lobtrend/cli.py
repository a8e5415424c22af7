"""Command-line pipeline orchestration.

Subcommands:
    synth     generate one synthetic stock-day snapshot file
    extract   snapshot files -> normalized feature files (+ stats)
    label     snapshot files -> per-day trend label files
    train     feature + label files -> checkpoint + per-epoch metrics
    eval      checkpoint + feature/label files -> metrics line
    report    full experiment grid -> Table-style report + CSVs

All paths are explicit. Every command is deterministic given identical
inputs and seed. ``LOBTREND_THREADS`` caps BLAS thread counts;
``LOBTREND_DISABLE_NUMBA=1`` selects the pure-numpy kernel lane.
"""

from __future__ import annotations

import os

_threads = os.environ.get("LOBTREND_THREADS")
if _threads:
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment as xp
from .book import mid_prices, parse_snapshot_stream, write_snapshot_stream
from .datagen import SynthConfig, generate
from .features import (apply_norm, fit_norm_stats_many, raw_prenorm,
                       read_features, stationary_prenorm, write_features)
from .labels import (calibrate_alpha, class_distribution, label_series,
                     read_labels, write_labels, class_weights_from_labels)
from .metrics import kappa, macro_scores
from .models import LinearSVM, build_from_meta
from .nncore.checkpoint import load_checkpoint
from .binio import read_container
from .train import (TrainConfig, evaluate_flat, evaluate_sequences,
                    make_flat_windows, make_sequence_windows, train_model,
                    write_records, write_step_loss_profile)


class CliError(Exception):
    pass


def _load_days(paths: list[str]):
    series = []
    for i, p in enumerate(paths):
        series.append(parse_snapshot_stream(p, day_id=Path(p).stem))
    return series


def cmd_synth(args) -> int:
    cfg = SynthConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    series = generate(cfg)
    write_snapshot_stream(series, args.out)
    print(f"wrote {len(series)} snapshots to {args.out}")
    return 0


def cmd_extract(args) -> int:
    days = _load_days(args.days)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "stationary":
        pre = [stationary_prenorm(s) for s in days]
        n_train = args.train_days or len(days)
        stats = fit_norm_stats_many(pre[:n_train])
        provenance = {"fitted_on": [m.day_id for m in pre[:n_train]]}
        (out / "stats.json").write_text(
            json.dumps({**stats.to_dict(), **provenance},
                       indent=2, sort_keys=True) + "\n")
        for m in pre:
            write_features(out / f"{m.day_id}.feat", apply_norm(m, stats), stats)
        print(f"wrote {len(pre)} stationary feature files to {out}")
    else:
        if len(days) < 2:
            raise CliError("raw mode needs at least 2 days "
                           "(the first supplies normalization stats)")
        written = 0
        for i in range(1, len(days)):
            prev_stats = fit_norm_stats_many([raw_prenorm(days[i - 1])])
            m = apply_norm(raw_prenorm(days[i]), prev_stats)
            write_features(out / f"{m.day_id}.feat", m, prev_stats)
            written += 1
        print(f"wrote {written} raw feature files to {out} "
              f"(first day used only for statistics)")
    return 0


def cmd_label(args) -> int:
    days = _load_days(args.days)
    mids = [mid_prices(s) for s in days]
    if args.alpha is not None:
        alpha = args.alpha
    elif args.target_stationary is not None:
        n_cal = args.calibrate_days or len(days)
        result = calibrate_alpha(mids[:n_cal], args.k, args.target_stationary)
        alpha = result.alpha
        print(f"calibrated alpha={alpha!r} "
              f"(distribution {np.round(result.distribution, 4).tolist()}, "
              f"converged={result.converged})")
    else:
        raise CliError("provide --alpha or --target-stationary")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for s, p in zip(days, mids):
        ls = label_series(p, args.k, alpha)
        write_labels(ls, out / f"{s.day_id}.labels")
        dist = class_distribution(ls)
        print(f"{s.day_id}: down/stat/up = "
              f"{dist[0]:.3f}/{dist[1]:.3f}/{dist[2]:.3f}")
    return 0


def _load_feature_label_days(features_dir: str, labels_dir: str):
    fpaths = sorted(Path(features_dir).glob("*.feat"))
    if not fpaths:
        raise CliError(f"no .feat files in {features_dir}")
    days = []
    for fp in fpaths:
        m, _ = read_features(fp)
        lp = Path(labels_dir) / (fp.stem + ".labels")
        if not lp.exists():
            raise CliError(f"missing label file {lp}")
        days.append((m, read_labels(lp)))
    return days


def cmd_train(args) -> int:
    days = _load_feature_label_days(args.features, args.labels)
    if args.train_days >= len(days):
        raise CliError(f"--train-days {args.train_days} leaves no test days "
                       f"(have {len(days)})")
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides.update(json.load(fh))
    overrides["architecture"] = args.arch
    k0 = days[0][1].horizon
    overrides.setdefault("horizon", k0)
    overrides.setdefault("alpha", days[0][1].alpha)
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.strict is not None:
        overrides["strict"] = args.strict
    cfg = TrainConfig.from_dict(overrides)

    result = train_model(days[:args.train_days], days[args.train_days:], cfg,
                         verbose=args.verbose)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_records(result.records, out / "metrics.csv")
    (out / "train_config.json").write_text(
        json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    if result.graph is not None:
        from .nncore.checkpoint import save_checkpoint
        save_checkpoint(out / "checkpoint.ckpt", result.graph, result.optimizer)
    if result.svm is not None:
        from .binio import write_container
        write_container(out / "checkpoint.ckpt",
                        {"format": "lobtrend-svm",
                         "mlp_window": cfg.mlp_window,
                         "horizon": cfg.horizon, "alpha": cfg.alpha},
                        {"weights": result.svm.weights, "bias": result.svm.bias})
    if result.step_loss_profile is not None:
        write_step_loss_profile(result.step_loss_profile, out / "step_loss.csv")
    last = result.records[-1]
    print(f"final test: kappa={last.kappa:.4f} f1={last.f1:.4f} "
          f"(artifacts in {out})")
    return 0


def cmd_eval(args) -> int:
    days = _load_feature_label_days(args.features, args.labels)
    labels_flat = np.concatenate([ls.valid_labels for _, ls in days])
    weights = class_weights_from_labels(labels_flat)

    meta, arrays = read_container(args.checkpoint)
    if meta.get("format") == "lobtrend-svm":
        svm = LinearSVM(n_features=arrays["weights"].shape[1])
        svm.weights = arrays["weights"]
        svm.bias = arrays["bias"]
        x, y = make_flat_windows(days, meta.get("mlp_window", 50))
        cm, _ = evaluate_flat(svm.predict_idx, x.astype(np.float64), y, weights)
        loss = 0.0
    else:
        cmeta, params, state, _ = load_checkpoint(args.checkpoint)
        model_meta = cmeta["model"]
        graph = build_from_meta(model_meta, strict=args.strict if args.strict is not None else True)
        graph.load_arrays(params, state)
        if model_meta["architecture"] == "mlp":
            x, y = make_flat_windows(days, model_meta.get("window", 50))

            def pred(xb):
                return graph.forward(xb, training=False).argmax(axis=-1)

            def probs(xb):
                return graph.forward(xb, training=False)

            cm, loss = evaluate_flat(pred, x, y, weights, probs)
        else:
            window = model_meta.get("window", 300)
            burn_in = model_meta.get("burn_in", 100)
            x, y, m = make_sequence_windows(days, window)
            cm, loss, _ = evaluate_sequences(graph, x, y, m, burn_in, weights)
    scores = macro_scores(cm)
    line = (f"kappa={kappa(cm):.6f} recall={scores.recall:.6f} "
            f"precision={scores.precision:.6f} f1={scores.f1:.6f} "
            f"loss={loss:.6f} n={cm.total}")
    print(line)
    if args.out:
        Path(args.out).write_text(line + "\n")
    return 0


def cmd_report(args) -> int:
    cfg = xp.ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    results = xp.run_experiment(cfg, args.out, verbose=args.verbose)
    print(f"wrote report for {len(results)} cells to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lobtrend", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic stock-day")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("extract", help="extract features from snapshot files")
    sp.add_argument("--days", nargs="+", required=True,
                    help="snapshot files in day order")
    sp.add_argument("--mode", choices=("stationary", "raw"), default="stationary")
    sp.add_argument("--train-days", type=int, default=None,
                    help="fit stationary stats on the first N days only")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_extract)

    sp = sub.add_parser("label", help="compute trend labels per day")
    sp.add_argument("--days", nargs="+", required=True)
    sp.add_argument("--k", type=int, required=True, help="prediction horizon")
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--target-stationary", type=float, default=None,
                    help="calibrate alpha to this stationary fraction")
    sp.add_argument("--calibrate-days", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_label)

    sp = sub.add_parser("train", help="train one model on feature/label days")
    sp.add_argument("--features", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--arch", required=True,
                    choices=("mlp", "cnn", "lstm", "cnn_lstm", "linear_svm"))
    sp.add_argument("--train-days", type=int, required=True)
    sp.add_argument("--config", default=None, help="TrainConfig overrides (JSON)")
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--strict", action=argparse.BooleanOptionalAction, default=None)
    sp.add_argument("--verbose", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--strict", action=argparse.BooleanOptionalAction, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("report", help="run the full experiment grid")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--verbose", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
