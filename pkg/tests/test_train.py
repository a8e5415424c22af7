import numpy as np
import pytest

from lobtrend.book import mid_prices
from lobtrend.datagen import Regime, SynthConfig, generate
from lobtrend.features import stationary_prenorm, fit_norm_stats, apply_norm
from lobtrend.labels import LabelError, label_series
from lobtrend.nncore.checkpoint import save_checkpoint
from lobtrend.nncore.losses import weighted_cross_entropy
from lobtrend.train import (EpochRecord, TrainConfig, TrainError,
                            make_flat_windows, make_sequence_windows,
                            train_model, write_records)


def synth_day(seed=0, n=900, drift=0.01, noise=0.0):
    cfg = SynthConfig(
        n_events=n,
        regimes=[Regime(n // 3, drift, noise), Regime(n // 3, 0.0, noise),
                 Regime(n - 2 * (n // 3), -drift, noise)],
        base_price=10.0, seed=seed)
    return generate(cfg)


def feature_label_day(seed=0, k=20, alpha=1e-4, n=900, stats=None):
    series = synth_day(seed=seed, n=n)
    pre = stationary_prenorm(series)
    if stats is None:
        stats = fit_norm_stats(pre)
    m = apply_norm(pre, stats)
    ls = label_series(mid_prices(series), k, alpha)
    return (m, ls), stats


def test_sequence_window_alignment():
    (m, ls), _ = feature_label_day(n=500, k=20)
    x, y, mask = make_sequence_windows([(m, ls)], window=100)
    assert x.shape == (4, 100, 41)
    # row r of the feature matrix is snapshot r+1; labels must line up
    for wi in range(4):
        for t in (0, 57, 99):
            row = wi * 100 + t
            snap = int(m.snapshot_index[row])
            expected = int(ls.labels[snap]) + 1
            if mask[wi, t]:
                assert y[wi, t] == expected
            else:
                assert snap > ls.valid_end


def test_sequence_window_requires_alignment():
    (m, ls), _ = feature_label_day(n=400, k=10)
    bad = type(ls)(labels=ls.labels[:-5], horizon=ls.horizon, alpha=ls.alpha,
                   valid_start=ls.valid_start, valid_end=ls.valid_end - 5)
    with pytest.raises(TrainError, match="misaligned"):
        make_sequence_windows([(m, bad)], window=50)


def test_flat_windows_label_last_step():
    (m, ls), _ = feature_label_day(n=400, k=10)
    x, y = make_flat_windows([(m, ls)], window=50, stride=1)
    assert x.shape[1] == 50 * 41
    snap_of_first = int(m.snapshot_index[49])
    assert y[0] == int(ls.labels[snap_of_first]) + 1
    # windows whose last step is unlabeled are dropped
    assert x.shape[0] == m.rows - 50 + 1 - 10


def test_burn_in_masks_loss_and_gradient():
    (m, ls), _ = feature_label_day(n=600, k=20)
    x, y, mask = make_sequence_windows([(m, ls)], window=150)
    burn = 60
    loss_mask = mask.copy()
    loss_mask[:, :burn] = False
    probs = np.full(y.shape + (3,), 1 / 3.0)
    w = np.ones(3)
    loss, dprobs, _, _ = weighted_cross_entropy(probs, y, w, loss_mask)
    # flipping any label inside the burn-in prefix cannot move the loss
    y2 = y.copy()
    y2[:, :burn] = (y2[:, :burn] + 1) % 3
    loss2, dprobs2, _, _ = weighted_cross_entropy(probs, y2, w, loss_mask)
    assert loss == loss2
    np.testing.assert_array_equal(dprobs, dprobs2)
    # and masked positions carry exactly zero gradient
    np.testing.assert_array_equal(dprobs[:, :burn], 0.0)


def test_full_burn_in_zeroes_all_gradients():
    (m, ls), _ = feature_label_day(n=400, k=10)
    x, y, mask = make_sequence_windows([(m, ls)], window=100)
    loss_mask = np.zeros_like(mask)
    probs = np.full(y.shape + (3,), 1 / 3.0)
    loss, dprobs, n, _ = weighted_cross_entropy(probs, y, np.ones(3), loss_mask)
    assert loss == 0.0 and n == 0
    np.testing.assert_array_equal(dprobs, 0.0)


def test_zero_learning_rate_constant_metrics():
    day_a, stats = feature_label_day(seed=1, n=700)
    day_b, _ = feature_label_day(seed=2, n=700, stats=stats)
    cfg = TrainConfig(architecture="lstm", horizon=20, alpha=1e-4, window=120,
                      burn_in=30, epochs=3, batch_size=4, lr=0.0, seed=0)
    result = train_model([day_a], [day_b], cfg)
    tests = [r for r in result.records if r.split == "test"]
    assert len(tests) == 3
    assert len({r.kappa for r in tests}) == 1
    assert len({r.loss for r in tests}) == 1


def test_absent_class_raises():
    (m, ls), _ = feature_label_day(n=500, k=20)
    ls.labels[:] = 0
    cfg = TrainConfig(architecture="lstm", horizon=20, alpha=1e-4, window=100,
                      burn_in=10, epochs=1, batch_size=4, seed=0)
    with pytest.raises(LabelError, match="absent"):
        train_model([(m, ls)], [(m, ls)], cfg)


def test_window_must_exceed_burn_in():
    with pytest.raises(TrainError, match="exceed"):
        TrainConfig(architecture="lstm", window=50, burn_in=100)


def test_records_line_format(tmp_path):
    rec = EpochRecord(epoch=3, split="test", kappa=0.5, recall=0.6,
                      precision=0.7, f1=0.65, f1_macro_pr=0.646, loss=1.234)
    line = rec.to_line()
    assert line.startswith("3,test,0.500000")
    path = tmp_path / "m.csv"
    write_records([rec], path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == EpochRecord.header()
    assert lines[1] == line


def test_training_determinism_same_seed(tmp_path):
    day_a, stats = feature_label_day(seed=3, n=600)
    day_b, _ = feature_label_day(seed=4, n=600, stats=stats)
    cfg = TrainConfig(architecture="cnn_lstm", horizon=20, alpha=1e-4,
                      window=100, burn_in=20, epochs=2, batch_size=4,
                      seed=11, strict=True)
    r1 = train_model([day_a], [day_b], cfg)
    r2 = train_model([day_a], [day_b], cfg)
    p1, p2 = tmp_path / "r1.ckpt", tmp_path / "r2.ckpt"
    save_checkpoint(p1, r1.graph, r1.optimizer)
    save_checkpoint(p2, r2.graph, r2.optimizer)
    assert p1.read_bytes() == p2.read_bytes()
    assert [r.to_line() for r in r1.records] == [r.to_line() for r in r2.records]


def test_overlapping_training_windows():
    (m, ls), _ = feature_label_day(n=500, k=20)
    x1, _, _ = make_sequence_windows([(m, ls)], window=100)
    x2, _, _ = make_sequence_windows([(m, ls)], window=100, stride=50)
    assert x1.shape[0] == 4
    assert x2.shape[0] == 8
    np.testing.assert_array_equal(x2[0], x1[0])
    np.testing.assert_array_equal(x2[2], x1[1])
    # eval path inside train_model stays non-overlapping
    cfg = TrainConfig(architecture="lstm", horizon=20, alpha=1e-4, window=100,
                      window_stride=25, burn_in=20, epochs=1, batch_size=4,
                      seed=0)
    result = train_model([(m, ls)], [(m, ls)], cfg)
    assert len([r for r in result.records if r.split == "train"]) == 1
