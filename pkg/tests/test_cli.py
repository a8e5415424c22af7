import json

import pytest

from lobtrend.cli import main
from lobtrend.book import parse_snapshot_stream
from lobtrend.features import read_features


@pytest.fixture
def synth_cfg(tmp_path):
    cfg = {
        "n_events": 700,
        "regimes": [{"length": 250, "drift": 0.01},
                    {"length": 200, "drift": 0.0},
                    {"length": 250, "drift": -0.01}],
        "tick_size": 0.01,
        "base_price": 10.0,
        "seed": 3,
    }
    path = tmp_path / "synth.json"
    path.write_text(json.dumps(cfg))
    return path


def make_days(tmp_path, synth_cfg, n=3):
    paths = []
    for d in range(n):
        out = tmp_path / f"day_{d:02d}.csv"
        assert main(["synth", "--config", str(synth_cfg), "--seed", str(100 + d),
                     "--out", str(out)]) == 0
        paths.append(str(out))
    return paths


def test_synth_writes_parseable_and_deterministic(tmp_path, synth_cfg):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert main(["synth", "--config", str(synth_cfg), "--out", str(out1)]) == 0
    assert main(["synth", "--config", str(synth_cfg), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    series = parse_snapshot_stream(out1)
    assert len(series) == 700
    series.validate()


def test_extract_stationary_and_raw(tmp_path, synth_cfg):
    days = make_days(tmp_path, synth_cfg, n=3)
    st_dir = tmp_path / "feat_st"
    assert main(["extract", "--days", *days, "--mode", "stationary",
                 "--train-days", "2", "--out", str(st_dir)]) == 0
    feats = sorted(st_dir.glob("*.feat"))
    assert len(feats) == 3
    stats = json.loads((st_dir / "stats.json").read_text())
    assert stats["fitted_on"] == ["day_00", "day_01"]
    m, _ = read_features(feats[0])
    assert m.feature_width == 41 and m.normalized

    raw_dir = tmp_path / "feat_raw"
    assert main(["extract", "--days", *days, "--mode", "raw",
                 "--out", str(raw_dir)]) == 0
    raw_feats = sorted(raw_dir.glob("*.feat"))
    assert [p.stem for p in raw_feats] == ["day_01", "day_02"]
    m, _ = read_features(raw_feats[0])
    assert m.feature_width == 40


def test_label_command_with_alpha_and_calibration(tmp_path, synth_cfg, capsys):
    days = make_days(tmp_path, synth_cfg, n=2)
    out = tmp_path / "labels"
    assert main(["label", "--days", *days, "--k", "20", "--alpha", "1e-3",
                 "--out", str(out)]) == 0
    files = sorted(out.glob("*.labels"))
    assert len(files) == 2
    header = files[0].read_text().splitlines()[0]
    assert "k=20" in header and "alpha=0.001" in header

    out2 = tmp_path / "labels_cal"
    assert main(["label", "--days", *days, "--k", "20",
                 "--target-stationary", "0.5", "--out", str(out2)]) == 0
    assert "calibrated alpha" in capsys.readouterr().out


def test_train_eval_roundtrip(tmp_path, synth_cfg):
    days = make_days(tmp_path, synth_cfg, n=3)
    fdir = tmp_path / "feats"
    ldir = tmp_path / "labels"
    main(["extract", "--days", *days, "--train-days", "2", "--out", str(fdir)])
    (fdir / "stats.json").unlink()   # only .feat files are read back
    main(["label", "--days", *days, "--k", "20", "--alpha", "1e-3",
          "--out", str(ldir)])
    run = tmp_path / "run"
    tcfg = tmp_path / "train.json"
    tcfg.write_text(json.dumps({"window": 120, "burn_in": 30, "batch_size": 4,
                                "epochs": 2}))
    assert main(["train", "--features", str(fdir), "--labels", str(ldir),
                 "--arch", "lstm", "--train-days", "2", "--config", str(tcfg),
                 "--seed", "1", "--out", str(run)]) == 0
    assert (run / "checkpoint.ckpt").exists()
    metrics = (run / "metrics.csv").read_text().splitlines()
    assert metrics[0].startswith("epoch,split,kappa")
    assert len(metrics) == 1 + 2 * 2   # train+test lines per epoch
    assert (run / "step_loss.csv").read_text().startswith("step,mean_loss")

    assert main(["eval", "--checkpoint", str(run / "checkpoint.ckpt"),
                 "--features", str(fdir), "--labels", str(ldir),
                 "--out", str(tmp_path / "eval.txt")]) == 0
    assert "kappa=" in (tmp_path / "eval.txt").read_text()


def test_train_determinism_byte_identical(tmp_path, synth_cfg):
    days = make_days(tmp_path, synth_cfg, n=3)
    fdir = tmp_path / "feats"
    ldir = tmp_path / "labels"
    main(["extract", "--days", *days, "--train-days", "2", "--out", str(fdir)])
    main(["label", "--days", *days, "--k", "20", "--alpha", "1e-3",
          "--out", str(ldir)])
    tcfg = tmp_path / "train.json"
    tcfg.write_text(json.dumps({"window": 100, "burn_in": 20, "batch_size": 4,
                                "epochs": 2}))
    outs = []
    for name in ("r1", "r2"):
        run = tmp_path / name
        assert main(["train", "--features", str(fdir), "--labels", str(ldir),
                     "--arch", "cnn", "--train-days", "2", "--config", str(tcfg),
                     "--seed", "7", "--strict", "--out", str(run)]) == 0
        outs.append(run)
    assert (outs[0] / "checkpoint.ckpt").read_bytes() == \
        (outs[1] / "checkpoint.ckpt").read_bytes()
    assert (outs[0] / "metrics.csv").read_text() == \
        (outs[1] / "metrics.csv").read_text()


def test_missing_input_structured_error(tmp_path, capsys):
    rc = main(["extract", "--days", str(tmp_path / "nope.csv"),
               "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_report_minimal_grid(tmp_path):
    cfg = {
        "synth": {"n_days": 3, "events_per_day": 500, "regime_length": 125,
                  "drift_ticks": 1.0, "noise_ticks": 0.5, "seed": 5},
        "train_days": 2,
        "test_days": 1,
        "feature_modes": ["stationary", "raw"],
        "horizons": [10],
        "alphas": [5e-4],
        "models": ["mlp", "lstm"],
        "training": {"window": 100, "burn_in": 25, "epochs": 2, "batch_size": 4,
                     "mlp_window": 50, "flat_stride": 4},
        "last_epochs": 2,
        "seed": 1,
    }
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "exp_out"
    assert main(["report", "--config", str(cfg_path), "--out", str(out)]) == 0
    report = (out / "report.csv").read_text().splitlines()
    # header + 2 modes x 2 models x 1 horizon
    assert len(report) == 1 + 4
    assert (out / "report.txt").exists()
    cells = {tuple(line.split(",")[:3]) for line in report[1:]}
    assert ("stationary", "mlp", "10") in cells
    assert ("raw", "lstm", "10") in cells
    # every cell records a config hash
    for line in report[1:]:
        assert len(line.split(",")[-1]) == 16
    # and artifacts exist per cell
    assert (out / "runs" / "stationary_lstm_k10" / "checkpoint.ckpt").exists()
    assert (out / "days" / "day_00.csv").exists()
    stats = json.loads((out / "features" / "stationary" / "stats.json").read_text())
    assert set(stats["fitted_on"]) == {"day_01", "day_02"}
