"""CSV serialisation of RSS traces and ground-truth tracks.

Trace files carry one row per reception attempt. Fields that do not apply
to the record's mode are left empty (channel on omni rows, direction columns
on multichannel rows, RSSI on lost packets). Floats are written with repr so
a write/read cycle is exact.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .linkstats import RssRecord, RssTrace

TRACE_HEADER = [
    "tick",
    "tx_id",
    "rx_id",
    "mode",
    "channel",
    "tx_dir",
    "rx_dir",
    "tx_power_dbm",
    "seq",
    "received",
    "rssi_dbm",
]

TRUTH_HEADER = ["tick", "x", "y"]


class TraceParseError(ValueError):
    """A trace or truth file does not follow the expected format."""


def _opt(value) -> str:
    return "" if value is None else repr(value)


def write_trace_file(path, trace: RssTrace) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for r in trace:
            writer.writerow(
                [
                    r.tick,
                    r.tx_id,
                    r.rx_id,
                    r.mode,
                    "" if r.channel is None else r.channel,
                    "" if r.tx_dir is None else r.tx_dir,
                    "" if r.rx_dir is None else r.rx_dir,
                    repr(r.tx_power_dbm),
                    r.seq,
                    "true" if r.received else "false",
                    _opt(r.rssi_dbm),
                ]
            )


def _parse_record(row: list[str], line: int) -> RssRecord:
    def opt_int(text: str) -> int | None:
        return None if text == "" else int(text)

    def opt_float(text: str) -> float | None:
        return None if text == "" else float(text)

    received_text = row[9].strip().lower()
    if received_text not in ("true", "false"):
        raise TraceParseError(
            f"line {line}: received must be true or false, got {row[9]!r}"
        )
    return RssRecord(
        tick=int(row[0]),
        tx_id=int(row[1]),
        rx_id=int(row[2]),
        mode=row[3],
        channel=opt_int(row[4]),
        tx_dir=opt_int(row[5]),
        rx_dir=opt_int(row[6]),
        tx_power_dbm=float(row[7]),
        seq=int(row[8]),
        received=received_text == "true",
        rssi_dbm=opt_float(row[10]),
    )


def read_trace_file(path) -> RssTrace:
    path = Path(path)
    records: list[RssRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceParseError(f"{path}: empty trace file") from None
        if header != TRACE_HEADER:
            raise TraceParseError(
                f"{path}: bad header {header!r}, expected {TRACE_HEADER!r}"
            )
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRACE_HEADER):
                raise TraceParseError(
                    f"line {line}: expected {len(TRACE_HEADER)} fields, got {len(row)}"
                )
            try:
                records.append(_parse_record(row, line))
            except (ValueError, TypeError) as exc:
                if isinstance(exc, TraceParseError):
                    raise
                raise TraceParseError(f"line {line}: {exc}") from exc
    return RssTrace(records)


def write_truth_file(path, truth: np.ndarray, first_tick: int = 0) -> None:
    """Persist the walker's true position per tick. `truth` is (T, 2); row i
    is stamped with tick first_tick + i."""
    truth = np.asarray(truth, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRUTH_HEADER)
        for i, (x, y) in enumerate(truth):
            writer.writerow([first_tick + i, repr(float(x)), repr(float(y))])


def read_truth_file(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (ticks, positions) with positions shaped (T, 2)."""
    path = Path(path)
    ticks: list[int] = []
    rows: list[tuple[float, float]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceParseError(f"{path}: empty truth file") from None
        if header != TRUTH_HEADER:
            raise TraceParseError(
                f"{path}: bad header {header!r}, expected {TRUTH_HEADER!r}"
            )
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ticks.append(int(row[0]))
                rows.append((float(row[1]), float(row[2])))
            except (ValueError, IndexError) as exc:
                raise TraceParseError(f"line {line}: {exc}") from exc
    return np.asarray(ticks, dtype=int), np.asarray(rows, dtype=float).reshape(-1, 2)
