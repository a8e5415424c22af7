import io

import numpy as np
import pytest

from lobtrend.book import mid_prices, write_snapshot_stream
from lobtrend.datagen import ConfigError, Regime, SynthConfig, generate
from lobtrend.labels import label_series


def simple_cfg(**kw):
    defaults = dict(n_events=200, regimes=[Regime(length=200, drift=0.0)],
                    tick_size=0.01, base_price=10.0, seed=42)
    defaults.update(kw)
    return SynthConfig(**defaults)


def test_zero_drift_zero_noise_constant_mid():
    series = generate(simple_cfg())
    mids = mid_prices(series)
    assert np.all(mids == mids[0])
    assert np.all(np.diff(mids) == 0)


def test_unit_tick_drift_walks_the_grid():
    cfg = simple_cfg(regimes=[Regime(length=200, drift=0.01)])
    mids = mid_prices(generate(cfg))
    expected = 10.0 + 0.01 * np.arange(200)
    np.testing.assert_allclose(mids, expected, rtol=0, atol=1e-12)


def test_identical_seed_bit_identical_output():
    a = generate(simple_cfg(regimes=[Regime(200, 0.002, 0.01)]))
    b = generate(simple_cfg(regimes=[Regime(200, 0.002, 0.01)]))
    buf_a, buf_b = io.StringIO(), io.StringIO()
    write_snapshot_stream(a, buf_a)
    write_snapshot_stream(b, buf_b)
    assert buf_a.getvalue() == buf_b.getvalue()


def test_generated_series_passes_validation():
    cfg = simple_cfg(regimes=[Regime(100, 0.01, 0.02), Regime(100, -0.01, 0.02)],
                     persistent_volume=0.8)
    generate(cfg).validate()


def test_regime_length_mismatch_names_field():
    with pytest.raises(ConfigError, match="regime lengths"):
        simple_cfg(regimes=[Regime(length=150, drift=0.0)]).validate()


def test_invalid_tick_size():
    with pytest.raises(ConfigError, match="tick_size"):
        simple_cfg(tick_size=0.0).validate()


def test_base_price_vs_tick_guard():
    with pytest.raises(ConfigError, match="base_price"):
        simple_cfg(base_price=0.05).validate()


def test_positive_drift_labels_up_at_regime_start():
    # analytic bound: ratio - 1 = d*(k+1) / (2*p_m(t)) for a noiseless drift
    k = 50
    drift = 0.01
    base = 10.0
    cfg = simple_cfg(n_events=400, regimes=[Regime(400, drift)], base_price=base)
    mids = mid_prices(generate(cfg))
    alpha_bound = drift * (k + 1) / (2 * base)
    for alpha in (0.0, alpha_bound * 0.5, alpha_bound * 0.99):
        ls = label_series(mids, k, alpha)
        assert ls.labels[0] == 1
    ls = label_series(mids, k, alpha_bound * 1.5)
    assert ls.labels[0] == 0


def test_empirical_return_mean_converges_to_drift_over_base():
    # total drift kept small vs base so drift/base approximates E[drift/p]
    n = 100_000
    drift, noise, base = 2e-4, 0.05, 100.0
    cfg = simple_cfg(n_events=n, regimes=[Regime(n, drift, noise)],
                     base_price=base, seed=9)
    mids = mid_prices(generate(cfg))
    rets = mids[1:] / mids[:-1] - 1.0
    target = drift / base
    se = rets.std() / np.sqrt(rets.size)
    assert abs(rets.mean() - target) < 3 * se


def test_volume_law_positive_and_persistent_option():
    cfg = simple_cfg(persistent_volume=0.95, volume_dispersion=1.0)
    series = generate(cfg)
    assert (series.ask_volumes > 0).all() and (series.bid_volumes > 0).all()
    # AR carry induces positive lag-1 autocorrelation in level-1 volume
    v = series.ask_volumes[:, 0]
    r = np.corrcoef(v[:-1], v[1:])[0, 1]
    assert r > 0.5
