import numpy as np
import pytest

from lobtrend.book import DEPTH, BookSnapshot, SnapshotSeries


def random_snapshot(rng: np.random.Generator, base: float = 10.0) -> BookSnapshot:
    tick = 0.01
    mid = base + rng.integers(-50, 50) * tick
    ask = mid + tick * (1 + np.arange(DEPTH)) + rng.uniform(0, 0.5 * tick)
    bid = mid - tick * (1 + np.arange(DEPTH)) - rng.uniform(0, 0.5 * tick)
    return BookSnapshot(
        timestamp=0,
        ask_prices=ask,
        ask_volumes=rng.uniform(0.5, 20.0, DEPTH),
        bid_prices=bid,
        bid_volumes=rng.uniform(0.5, 20.0, DEPTH),
    )


def random_series(rng: np.random.Generator, n: int, base: float = 10.0,
                  drift: float = 0.0, noise: float = 0.02) -> SnapshotSeries:
    tick = 0.01
    mid = base + np.cumsum(drift + noise * rng.standard_normal(n))
    mid = np.maximum(np.round(mid / tick) * tick, 1.0)
    offsets = tick * (1 + np.arange(DEPTH))
    return SnapshotSeries(
        timestamps=np.arange(n, dtype=np.int64),
        ask_prices=mid[:, None] + offsets,
        ask_volumes=rng.uniform(0.5, 20.0, (n, DEPTH)),
        bid_prices=mid[:, None] - offsets,
        bid_volumes=rng.uniform(0.5, 20.0, (n, DEPTH)),
        stock_id="TEST", day_id="d0",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
