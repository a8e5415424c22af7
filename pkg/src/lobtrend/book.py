"""Limit order book snapshots: parsing, validation, mid-price.

A snapshot is the book state after one state-altering event: 10 (price,
volume) levels per side, best levels first. Timestamps are event indices,
not wall-clock times.

File format (one record per line, comma separated):
    timestamp, ask_price_1..10, ask_volume_1..10, bid_price_1..10, bid_volume_1..10
An optional header line is detected by a non-numeric first field.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, TextIO, Union

import numpy as np

DEPTH = 10
FIELDS_PER_RECORD = 1 + 4 * DEPTH


class BookError(ValueError):
    """Base class for snapshot parsing/validation failures."""


class ParseError(BookError):
    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ValidationError(BookError):
    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


@dataclass(frozen=True)
class BookSnapshot:
    """One LOB state: 10 ask and 10 bid (price, volume) pairs plus an event index."""

    timestamp: int
    ask_prices: np.ndarray
    ask_volumes: np.ndarray
    bid_prices: np.ndarray
    bid_volumes: np.ndarray

    @property
    def best_ask(self) -> float:
        return float(self.ask_prices[0])

    @property
    def best_bid(self) -> float:
        return float(self.bid_prices[0])

    def validate(self) -> None:
        _validate_levels(
            self.ask_prices, self.ask_volumes, self.bid_prices, self.bid_volumes
        )


def _validate_levels(ap, av, bp, bv, line_number: int | None = None) -> None:
    for name, arr in (("ask price", ap), ("ask volume", av),
                      ("bid price", bp), ("bid volume", bv)):
        if len(arr) != DEPTH:
            raise ValidationError(
                f"expected {DEPTH} {name} levels, got {len(arr)}", line_number)
    for side, prices in (("ask", ap), ("bid", bp)):
        bad = np.flatnonzero(prices <= 0)
        if bad.size:
            raise ValidationError(
                f"non-positive {side} price at level {bad[0] + 1}", line_number)
    for side, vols in (("ask", av), ("bid", bv)):
        bad = np.flatnonzero(vols <= 0)
        if bad.size:
            raise ValidationError(
                f"non-positive {side} volume at level {bad[0] + 1}", line_number)
    bad = np.flatnonzero(np.diff(ap) <= 0)
    if bad.size:
        raise ValidationError(
            f"ask prices not strictly increasing at level {bad[0] + 2}", line_number)
    bad = np.flatnonzero(np.diff(bp) >= 0)
    if bad.size:
        raise ValidationError(
            f"bid prices not strictly decreasing at level {bad[0] + 2}", line_number)
    if ap[0] <= bp[0]:
        raise ValidationError("crossed book at level 1", line_number)


@dataclass
class SnapshotSeries:
    """Ordered snapshots for one stock-day, stored as dense per-side arrays."""

    timestamps: np.ndarray          # (n,) int64, strictly increasing
    ask_prices: np.ndarray          # (n, 10) float64
    ask_volumes: np.ndarray         # (n, 10) float64
    bid_prices: np.ndarray          # (n, 10) float64
    bid_volumes: np.ndarray         # (n, 10) float64
    stock_id: str = ""
    day_id: str = ""
    n_dropped: int = 0              # invalid records skipped in lenient parsing

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    def snapshot(self, i: int) -> BookSnapshot:
        return BookSnapshot(
            timestamp=int(self.timestamps[i]),
            ask_prices=self.ask_prices[i],
            ask_volumes=self.ask_volumes[i],
            bid_prices=self.bid_prices[i],
            bid_volumes=self.bid_volumes[i],
        )

    def __iter__(self) -> Iterator[BookSnapshot]:
        for i in range(len(self)):
            yield self.snapshot(i)

    def validate(self) -> None:
        if len(self) == 0:
            raise ValidationError("empty series")
        diffs = np.diff(self.timestamps)
        bad = np.flatnonzero(diffs <= 0)
        if bad.size:
            raise ValidationError(
                f"timestamps not strictly increasing at record {int(bad[0]) + 1}")
        for i in range(len(self)):
            _validate_levels(self.ask_prices[i], self.ask_volumes[i],
                             self.bid_prices[i], self.bid_volumes[i])


def mid_price(s: BookSnapshot) -> float:
    """Midpoint of the best bid and best ask."""
    return (s.best_ask + s.best_bid) / 2.0


def mid_prices(series: SnapshotSeries) -> np.ndarray:
    """Vectorized mid-price over a series, shape (n,)."""
    return (series.ask_prices[:, 0] + series.bid_prices[:, 0]) / 2.0


def _looks_numeric(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def parse_snapshot_stream(
    source: Union[str, Path, TextIO, Iterable[str]],
    stock_id: str = "",
    day_id: str = "",
    lenient: bool = False,
) -> SnapshotSeries:
    """Parse a line-delimited snapshot stream into a validated series.

    In strict mode (default) the first malformed or invariant-violating
    record raises with its line number. With ``lenient=True`` invalid
    records are dropped and counted in ``SnapshotSeries.n_dropped``.
    """
    close_after = False
    if isinstance(source, (str, Path)):
        handle: TextIO = open(source, "r")
        close_after = True
        lines: Iterable[str] = handle
    else:
        lines = source

    rows: list[np.ndarray] = []
    n_dropped = 0
    try:
        for line_number, line in enumerate(lines, start=1):
            text = line.strip()
            if not text:
                continue
            tokens = [t.strip() for t in text.split(",")]
            if line_number == 1 and not _looks_numeric(tokens[0]):
                continue  # header
            try:
                if len(tokens) != FIELDS_PER_RECORD:
                    raise ParseError(
                        f"expected {FIELDS_PER_RECORD} fields, got {len(tokens)}",
                        line_number)
                try:
                    values = np.array([float(t) for t in tokens], dtype=np.float64)
                except ValueError as exc:
                    raise ParseError(f"non-numeric field: {exc}", line_number)
                _validate_levels(values[1:11], values[11:21],
                                 values[21:31], values[31:41], line_number)
            except BookError:
                if lenient:
                    n_dropped += 1
                    continue
                raise
            rows.append(values)
    finally:
        if close_after:
            handle.close()

    if not rows:
        raise ParseError("empty series")
    data = np.stack(rows)
    series = SnapshotSeries(
        timestamps=data[:, 0].astype(np.int64),
        ask_prices=data[:, 1:11].copy(),
        ask_volumes=data[:, 11:21].copy(),
        bid_prices=data[:, 21:31].copy(),
        bid_volumes=data[:, 31:41].copy(),
        stock_id=stock_id,
        day_id=day_id,
        n_dropped=n_dropped,
    )
    diffs = np.diff(series.timestamps)
    bad = np.flatnonzero(diffs <= 0)
    if bad.size:
        raise ValidationError(
            f"timestamps not strictly increasing at record {int(bad[0]) + 1}")
    return series


def write_snapshot_stream(series: SnapshotSeries, dest: Union[str, Path, TextIO]) -> None:
    """Write a series in the snapshot file format; floats round-trip exactly."""
    close_after = False
    if isinstance(dest, (str, Path)):
        handle: TextIO = open(dest, "w")
        close_after = True
    else:
        handle = dest
    try:
        for i in range(len(series)):
            fields = [str(int(series.timestamps[i]))]
            for block in (series.ask_prices[i], series.ask_volumes[i],
                          series.bid_prices[i], series.bid_volumes[i]):
                fields.extend(repr(float(v)) for v in block)
            handle.write(",".join(fields))
            handle.write("\n")
    finally:
        if close_after:
            handle.close()
