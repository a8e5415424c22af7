"""Synthetic LOB snapshot generator with controllable trend regimes.

The mid-price follows a random walk with per-regime drift and noise,
rounded to the tick grid. Book levels are laid out symmetrically around
the mid at one-tick spacing; volumes come from a lognormal law with an
optional autoregressive carry so depth features have autocorrelation.
Identical seed -> bit-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .book import DEPTH, SnapshotSeries


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Regime:
    length: int
    drift: float            # mid-price change per event, currency units
    noise_std: float = 0.0  # gaussian noise on the latent walk, currency units


@dataclass
class SynthConfig:
    n_events: int
    regimes: Sequence[Regime]
    tick_size: float = 0.01
    base_price: float = 10.0
    volume_mean: float = 5.0
    volume_dispersion: float = 0.5   # sigma of the lognormal draw
    persistent_volume: float = 0.0   # AR(1) carry in [0, 1); 0 = independent
    flow_imbalance: float = 0.0      # strength of the volume cue below
    imbalance_mode: str = "level"    # how the cue encodes the regime:
                                     #   level - bid-heavy book in up-trends
                                     #   pulse - the level cue only in sparse bursts
                                     #   motif - bursts of two opposite halves
                                     #           whose order encodes the trend
                                     #   corr  - both sides wobble; only their
                                     #           cross-side correlation carries
                                     #           the trend (no linear signal)
    imbalance_pulse_period: int = 16
    imbalance_pulse_width: int = 4
    imbalance_pulse_lag: int = 0     # motif mode: gap between the two halves
    spread_ticks: int = 2
    seed: int = 0
    stock_id: str = "SYNTH"
    day_id: str = "d0"

    def validate(self) -> None:
        if self.n_events <= 0:
            raise ConfigError("n_events must be positive")
        if self.tick_size <= 0:
            raise ConfigError("tick_size must be positive")
        if self.base_price <= 10 * self.tick_size:
            raise ConfigError("base_price must exceed 10 * tick_size")
        if not self.regimes:
            raise ConfigError("regimes must be non-empty")
        total = sum(r.length for r in self.regimes)
        if total != self.n_events:
            raise ConfigError(
                f"regime lengths sum to {total}, expected n_events={self.n_events}")
        for i, r in enumerate(self.regimes):
            if r.length <= 0:
                raise ConfigError(f"regimes[{i}].length must be positive")
            if r.noise_std < 0:
                raise ConfigError(f"regimes[{i}].noise_std must be non-negative")
        if self.volume_mean <= 0:
            raise ConfigError("volume_mean must be positive")
        if self.volume_dispersion <= 0:
            raise ConfigError("volume_dispersion must be positive")
        if not (0.0 <= self.persistent_volume < 1.0):
            raise ConfigError("persistent_volume must be in [0, 1)")
        if not (0.0 <= self.flow_imbalance < 1.0):
            raise ConfigError("flow_imbalance must be in [0, 1)")
        if self.imbalance_mode not in ("level", "pulse", "motif", "corr"):
            raise ConfigError(f"unknown imbalance_mode '{self.imbalance_mode}'")
        if self.imbalance_pulse_period <= 0 or self.imbalance_pulse_width <= 0:
            raise ConfigError("imbalance pulse period/width must be positive")
        if self.spread_ticks < 1:
            raise ConfigError("spread_ticks must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        regimes = [Regime(**r) for r in d.pop("regimes")]
        try:
            return cls(regimes=regimes, **d)
        except TypeError as exc:
            raise ConfigError(str(exc))

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def drift_per_event(cfg: SynthConfig) -> np.ndarray:
    out = np.empty(cfg.n_events)
    pos = 0
    for r in cfg.regimes:
        out[pos:pos + r.length] = r.drift
        pos += r.length
    return out


def noise_std_per_event(cfg: SynthConfig) -> np.ndarray:
    out = np.empty(cfg.n_events)
    pos = 0
    for r in cfg.regimes:
        out[pos:pos + r.length] = r.noise_std
        pos += r.length
    return out


def generate(cfg: SynthConfig) -> SnapshotSeries:
    """Generate one synthetic stock-day satisfying all snapshot invariants."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_events
    tick = cfg.tick_size

    drift = drift_per_event(cfg)
    noise = rng.standard_normal(n) * noise_std_per_event(cfg)
    # event 0 sits at base_price; first drift applies to event 1
    steps = drift + noise
    steps[0] = 0.0
    latent = cfg.base_price + np.cumsum(steps)
    mid = np.round(latent / tick) * tick
    # keep the book 10 levels deep above zero even in a long down-regime
    floor = (DEPTH + cfg.spread_ticks) * tick
    mid = np.maximum(mid, floor + tick)

    half_spread = 0.5 * cfg.spread_ticks * tick
    offsets = half_spread + np.arange(DEPTH) * tick     # level k at mid +/- offset
    ask_prices = mid[:, None] + offsets[None, :]
    bid_prices = mid[:, None] - offsets[None, :]

    sigma = cfg.volume_dispersion
    mu = np.log(cfg.volume_mean) - 0.5 * sigma * sigma
    fresh = np.exp(mu + sigma * rng.standard_normal((n, 2 * DEPTH)))
    if cfg.flow_imbalance > 0.0:
        s = cfg.flow_imbalance
        trend = np.sign(drift)
        if cfg.imbalance_mode == "corr":
            # both sides wobble every event with identical marginals; the
            # wobbles agree/disagree/decouple with the regime, so only the
            # cross-side correlation carries direction
            u = rng.choice([-1.0, 1.0], size=n)
            w_bid = np.where(trend != 0.0, u * trend,
                             rng.choice([-1.0, 1.0], size=n))
            fresh[:, :DEPTH] *= (1.0 + s * u)[:, None]
            fresh[:, DEPTH:] *= (1.0 + s * w_bid)[:, None]
        else:
            if cfg.imbalance_mode in ("pulse", "motif"):
                # sparse bursts; in motif mode a burst is two opposite
                # halves whose order encodes the trend, so single-step
                # statistics carry no direction at all
                w_pulse = cfg.imbalance_pulse_width
                gate = np.zeros(n)
                pos = int(rng.integers(cfg.imbalance_pulse_period))
                while pos < n:
                    if cfg.imbalance_mode == "motif":
                        half = max(1, w_pulse // 2)
                        lag = cfg.imbalance_pulse_lag
                        gate[pos:pos + half] = 1.0
                        gate[pos + half + lag:pos + 2 * half + lag] = -1.0
                        pos += 2 * half + lag
                    else:
                        gate[pos:pos + w_pulse] = 1.0
                        pos += w_pulse
                    pos += int(rng.integers(1, 2 * cfg.imbalance_pulse_period))
                trend = trend * gate
            fresh[:, :DEPTH] *= 1.0 - s * trend[:, None]
            fresh[:, DEPTH:] *= 1.0 + s * trend[:, None]
    rho = cfg.persistent_volume
    if rho > 0.0:
        vols = np.empty_like(fresh)
        vols[0] = fresh[0]
        for t in range(1, n):
            vols[t] = rho * vols[t - 1] + (1.0 - rho) * fresh[t]
    else:
        vols = fresh

    return SnapshotSeries(
        timestamps=np.arange(n, dtype=np.int64),
        ask_prices=ask_prices,
        ask_volumes=vols[:, :DEPTH].copy(),
        bid_prices=bid_prices,
        bid_volumes=vols[:, DEPTH:].copy(),
        stock_id=cfg.stock_id,
        day_id=cfg.day_id,
    )
