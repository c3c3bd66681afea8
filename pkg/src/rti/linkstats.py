"""RSS link statistics: calibration, mean/variance statistics, and
attenuation classification.

Streams
-------
A stream is one RSS time series: an (ordered link, channel-or-pattern)
combination. Omni traffic has one stream per link, multichannel traffic one
per (link, channel), directional traffic one per (link, pattern pair).
Stream keys are tuples (tx_id, rx_id, channel, tx_dir, rx_dir) with None in
the unused slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import PatternPair

StreamKey = tuple  # (tx_id, rx_id, channel | None, tx_dir | None, rx_dir | None)


class MissingCalibrationError(KeyError):
    """A required stream has no calibration mean."""


class InsufficientWindowError(ValueError):
    """A statistic window holds fewer than two usable values."""


@dataclass(frozen=True)
class RssRecord:
    """One packet reception attempt as logged by the collector."""

    tick: int
    tx_id: int
    rx_id: int
    mode: str  # "omni" | "multichannel" | "directional"
    channel: int | None
    tx_dir: int | None
    rx_dir: int | None
    tx_power_dbm: float
    seq: int
    received: bool
    rssi_dbm: float | None

    def __post_init__(self) -> None:
        has_channel = self.channel is not None
        has_pattern = self.tx_dir is not None or self.rx_dir is not None
        if has_channel and has_pattern:
            raise ValueError("record cannot carry both channel and pattern fields")
        if has_pattern and (self.tx_dir is None or self.rx_dir is None):
            raise ValueError("pattern records need both tx_dir and rx_dir")
        if self.received and self.rssi_dbm is None:
            raise ValueError("received record without rssi")
        if not self.received and self.rssi_dbm is not None:
            raise ValueError("lost record must not carry rssi")

    @property
    def stream(self) -> StreamKey:
        return (self.tx_id, self.rx_id, self.channel, self.tx_dir, self.rx_dir)


def omni_stream(link: tuple[int, int]) -> StreamKey:
    return (link[0], link[1], None, None, None)

def channel_stream(link: tuple[int, int], channel: int) -> StreamKey:
    return (link[0], link[1], channel, None, None)

def pattern_stream(link: tuple[int, int], pair: PatternPair) -> StreamKey:
    return (link[0], link[1], None, pair.tx_direction, pair.rx_direction)


def format_stream(stream: StreamKey) -> str:
    tx, rx, channel, tx_dir, rx_dir = stream
    tag = f"{tx}->{rx}"
    if channel is not None:
        return f"{tag} channel {channel}"
    if tx_dir is not None:
        return f"{tag} pair ({tx_dir},{rx_dir})"
    return f"{tag} omni"


@dataclass(frozen=True)
class LinkStatVector:
    """Per-link statistic values for one tick, in layout link order."""

    time: int
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("link statistics must form a 1-D vector")
        if np.any(values < 0):
            raise ValueError("link statistics are nonnegative by construction")
        object.__setattr__(self, "values", values)


@dataclass
class RssTrace:
    """An ordered list of reception attempts."""

    records: list[RssRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def num_ticks(self) -> int:
        return max((r.tick for r in self.records), default=-1) + 1

    def in_window(self, t1: int, t2: int) -> Iterable[RssRecord]:
        """Records with t1 <= tick <= t2."""
        return (r for r in self.records if t1 <= r.tick <= t2)

    def streams(self) -> list[StreamKey]:
        seen: dict[StreamKey, None] = {}
        for r in self.records:
            seen.setdefault(r.stream, None)
        return list(seen)


@dataclass(frozen=True)
class CalibrationTable:
    """Per-stream mean RSS over an empty-area calibration window."""

    window: tuple[int, int]
    means: Mapping[StreamKey, float]

    def mean(self, stream: StreamKey) -> float:
        try:
            return self.means[stream]
        except KeyError:
            raise MissingCalibrationError(
                f"no calibration mean for stream {format_stream(stream)}"
            ) from None


def calibrate(
    trace: RssTrace,
    window: tuple[int, int],
    streams: Sequence[StreamKey] | None = None,
) -> CalibrationTable:
    """Mean received RSS per stream over the calibration window.

    When ``streams`` is given only those streams are calibrated; otherwise
    every stream appearing in the window is. A candidate stream with zero
    received packets in the window raises MissingCalibrationError.
    """
    t1, t2 = window
    if t2 < t1:
        raise ValueError(f"empty calibration window ({t1}, {t2})")
    sums: dict[StreamKey, float] = {}
    counts: dict[StreamKey, int] = {}
    seen: dict[StreamKey, None] = {}
    for rec in trace.in_window(t1, t2):
        seen.setdefault(rec.stream, None)
        if rec.received:
            sums[rec.stream] = sums.get(rec.stream, 0.0) + rec.rssi_dbm
            counts[rec.stream] = counts.get(rec.stream, 0) + 1
    wanted = list(streams) if streams is not None else list(seen)
    if not wanted:
        raise ValueError("no streams in calibration window")
    missing = [s for s in wanted if counts.get(s, 0) == 0]
    if missing:
        raise MissingCalibrationError(
            "streams with zero received packets in calibration window: "
            + ", ".join(format_stream(s) for s in missing)
        )
    means = {s: sums[s] / counts[s] for s in wanted}
    return CalibrationTable(window=(t1, t2), means=means)


# ------------------------------------------------------------ statistics


def mrti_stat(rssi: float, mean_rssi: float) -> float:
    """Absolute RSS deviation from the calibration mean."""
    return abs(rssi - mean_rssi)


def vrti_stat(window: Sequence[float]) -> float:
    """Sample variance (divisor n-1) of a window of RSS values."""
    values = np.asarray(window, dtype=float)
    if values.size < 2 or np.isnan(values).any():
        raise InsufficientWindowError(
            f"variance window needs >= 2 usable values, got {values.size}"
        )
    return float(np.var(values, ddof=1))


def drti_mean_stat(
    link: tuple[int, int],
    pairs: Sequence[PatternPair],
    current: Mapping[PatternPair, float],
    calibration: CalibrationTable,
) -> float:
    """Sum over selected pattern pairs of |current RSS - calibration mean|."""
    if not pairs:
        raise ValueError("no pattern pairs selected")
    total = 0.0
    for pair in pairs:
        total += abs(current[pair] - calibration.mean(pattern_stream(link, pair)))
    return total


def drti_var_stat(
    pairs: Sequence[PatternPair],
    windows: Mapping[PatternPair, Sequence[float]],
) -> float:
    """Sum over selected pattern pairs of their window sample variances."""
    if not pairs:
        raise ValueError("no pattern pairs selected")
    return sum(vrti_stat(windows[pair]) for pair in pairs)


def crti_mean_stat(
    link: tuple[int, int],
    channels: Sequence[int],
    current: Mapping[int, float],
    calibration: CalibrationTable,
) -> float:
    """Sum over configured channels of the per-channel mean statistic."""
    if not channels:
        raise ValueError("no channels configured")
    total = 0.0
    for ch in channels:
        total += abs(current[ch] - calibration.mean(channel_stream(link, ch)))
    return total


def crti_var_stat(
    channels: Sequence[int],
    windows: Mapping[int, Sequence[float]],
) -> float:
    """Sum over configured channels of the per-channel window variance."""
    if not channels:
        raise ValueError("no channels configured")
    return sum(vrti_stat(windows[ch]) for ch in channels)


# ------------------------------------------------------- classification


def classify_link_attenuation(stat: float, threshold: float, obstructed: bool) -> str:
    """TP/FP/TN/FN for one link observation against a detection threshold."""
    if stat > threshold:
        return "TP" if obstructed else "FP"
    return "FN" if obstructed else "TN"


def fn_fp_sweep(
    stats: np.ndarray,
    obstructed: np.ndarray,
    thresholds: Sequence[float],
) -> list[tuple[float, float, float]]:
    """Sweep a threshold over link observations.

    Returns (threshold, fn_rate, fp_rate) triples where both rates divide by
    the total number of observations. fn_rate is non-decreasing and fp_rate
    non-increasing in the threshold.
    """
    stats = np.asarray(stats, dtype=float).ravel()
    mask = np.asarray(obstructed, dtype=bool).ravel()
    if stats.shape != mask.shape:
        raise ValueError("stats and obstructed must have matching shapes")
    total = stats.size
    if total == 0:
        raise ValueError("no observations to sweep")
    out = []
    for tau in sorted(thresholds):
        detected = stats > tau
        fn = int(np.count_nonzero(~detected & mask))
        fp = int(np.count_nonzero(detected & ~mask))
        out.append((float(tau), fn / total, fp / total))
    return out


# ------------------------------------------------------ stream machinery


class StreamSeries:
    """Tick-aligned RSS values for one stream with carry-forward filling.

    Lost packets repeat the last received RSS; ticks before the first
    reception stay NaN and never produce usable windows.
    """

    def __init__(self, num_ticks: int):
        self.raw = np.full(num_ticks, np.nan)
        self.received = np.zeros(num_ticks, dtype=bool)
        self._filled: np.ndarray | None = None

    def record(self, tick: int, rssi: float | None) -> None:
        if rssi is not None:
            self.raw[tick] = rssi
            self.received[tick] = True
        self._filled = None

    @property
    def filled(self) -> np.ndarray:
        if self._filled is None:
            self._filled = forward_fill(self.raw)
        return self._filled

    def value(self, tick: int) -> float:
        v = self.filled[tick]
        if math.isnan(v):
            raise InsufficientWindowError(
                f"no reception on or before tick {tick}"
            )
        return float(v)

    def window(self, tick: int, v: int) -> np.ndarray:
        """The v filled values ending at ``tick`` (inclusive)."""
        if v < 2:
            raise InsufficientWindowError("window length must be >= 2")
        start = tick - v + 1
        if start < 0:
            raise InsufficientWindowError(
                f"window of {v} does not fit before tick {tick}"
            )
        values = self.filled[start : tick + 1]
        if np.isnan(values).any():
            raise InsufficientWindowError(
                f"window ending at tick {tick} has unfilled values"
            )
        return values.copy()


def forward_fill(values: np.ndarray) -> np.ndarray:
    """Propagate the last non-NaN value forward; leading NaNs stay NaN."""
    values = np.asarray(values, dtype=float)
    idx = np.where(~np.isnan(values), np.arange(values.size), 0)
    np.maximum.accumulate(idx, out=idx)
    return values[idx]


def extract_streams(trace: RssTrace, num_ticks: int | None = None) -> dict[StreamKey, StreamSeries]:
    """Group a trace into per-stream tick-aligned series."""
    if num_ticks is None:
        num_ticks = trace.num_ticks
    series: dict[StreamKey, StreamSeries] = {}
    for rec in trace.records:
        s = series.get(rec.stream)
        if s is None:
            s = series[rec.stream] = StreamSeries(num_ticks)
        s.record(rec.tick, rec.rssi_dbm)
    return series


def batch_window_variance(filled: np.ndarray, v: int) -> np.ndarray:
    """Sample variance of the window ending at each tick, for stacked streams.

    filled: (S, T) carry-forward matrix. Output (S, T) with NaN where the
    window does not fit or contains unfilled values.
    """
    if v < 2:
        raise InsufficientWindowError("window length must be >= 2")
    s, t = filled.shape
    out = np.full((s, t), np.nan)
    if t >= v:
        windows = np.lib.stride_tricks.sliding_window_view(filled, v, axis=1)
        out[:, v - 1 :] = np.var(windows, axis=2, ddof=1)
    return out
