"""Pattern pair selection: Location, Fade Level, and PRR methods.

All tie-breaks order pairs ascending lexicographically by
(tx_direction, rx_direction).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .geometry import NetworkLayout, PatternPair, angle_to_link
from .linkstats import RssTrace

Link = tuple[int, int]


@dataclass(frozen=True)
class FadeLevelTable:
    """Accumulated normalised RSS per (link, pattern pair).

    h is the sum over received packets in the window of (rssi - tx_power);
    larger h means a shallower fade. Pairs with zero receptions in the window
    carry no entry and are ineligible for selection.
    """

    window: tuple[int, int]
    levels: Mapping[Link, Mapping[PatternPair, float]]

    def level(self, link: Link, pair: PatternPair) -> float:
        return self.levels[link][pair]


@dataclass
class SelectionResult:
    """Selected pattern pairs per link, in selection-preference order."""

    method: str
    params: dict = field(default_factory=dict)
    pairs_by_link: dict[Link, list[PatternPair]] = field(default_factory=dict)

    def pairs(self, link: Link) -> list[PatternPair]:
        return self.pairs_by_link[link]


def _sorted_directions(node, other, n: int) -> list[int]:
    """The n directions with the smallest angle to the line toward ``other``.

    Angles are rounded to 1e-12 rad before comparison so that symmetric
    directions tie exactly and fall back to the lower direction index.
    """
    if not 1 <= n <= node.num_directions:
        raise ValueError(f"n must be in [1, {node.num_directions}], got {n}")
    keyed = [
        (round(angle_to_link(node, d, other), 12), d)
        for d in range(1, node.num_directions + 1)
    ]
    keyed.sort()
    return [d for _, d in keyed[:n]]


def select_location(
    layout: NetworkLayout,
    link: Link,
    n_transmitter: int,
    n_receiver: int,
) -> list[PatternPair]:
    """Geometry-only selection: the Cartesian product of the n_transmitter
    transmit directions and n_receiver receive directions best aligned with
    the link line. Needs no calibration traffic."""
    tx = layout.node(link[0])
    rx = layout.node(link[1])
    tx_dirs = _sorted_directions(tx, rx, n_transmitter)
    rx_dirs = _sorted_directions(rx, tx, n_receiver)
    return [PatternPair(t, r) for t in tx_dirs for r in rx_dirs]


def all_pairs(num_directions: int = 6) -> list[PatternPair]:
    """Every pattern pair in lexicographic order."""
    return [
        PatternPair(t, r)
        for t in range(1, num_directions + 1)
        for r in range(1, num_directions + 1)
    ]


def compute_fade_levels(trace: RssTrace, window: tuple[int, int]) -> FadeLevelTable:
    """Accumulate per-pair normalised RSS over the calibration window."""
    t1, t2 = window
    if t2 < t1:
        raise ValueError(f"empty fade-level window ({t1}, {t2})")
    levels: dict[Link, dict[PatternPair, float]] = {}
    saw_directional = False
    for rec in trace.in_window(t1, t2):
        if rec.tx_dir is None:
            continue
        saw_directional = True
        if not rec.received:
            continue
        link = (rec.tx_id, rec.rx_id)
        pair = PatternPair(rec.tx_dir, rec.rx_dir)
        per_link = levels.setdefault(link, {})
        per_link[pair] = per_link.get(pair, 0.0) + (rec.rssi_dbm - rec.tx_power_dbm)
    if not saw_directional:
        raise ValueError("no directional records in fade-level window")
    return FadeLevelTable(window=(t1, t2), levels=levels)


def select_fade_level(table: FadeLevelTable, link: Link, k: int) -> list[PatternPair]:
    """Top-k pairs by accumulated normalised RSS, descending; ties ascending
    lexicographic."""
    if link not in table.levels or not table.levels[link]:
        raise ValueError(f"no eligible pairs for link {link[0]}->{link[1]}")
    eligible = table.levels[link]
    if not 1 <= k <= len(eligible):
        raise ValueError(
            f"k must be in [1, {len(eligible)}] for link {link[0]}->{link[1]}, got {k}"
        )
    ranked = sorted(eligible.items(), key=lambda item: (-item[1], item[0]))
    return [pair for pair, _ in ranked[:k]]


def select_prr(
    trace: RssTrace,
    window: tuple[int, int],
    link: Link,
    k: int,
) -> list[PatternPair]:
    """Top-k pairs by packet reception ratio over the window.

    PRR divides received packets by transmission attempts (every record of the
    pair counts as one attempt). Pairs with zero receptions are ineligible.
    Ties rank ascending lexicographic.
    """
    t1, t2 = window
    if t2 < t1:
        raise ValueError(f"empty PRR window ({t1}, {t2})")
    sent: dict[PatternPair, int] = {}
    got: dict[PatternPair, int] = {}
    for rec in trace.in_window(t1, t2):
        if rec.tx_dir is None or (rec.tx_id, rec.rx_id) != link:
            continue
        pair = PatternPair(rec.tx_dir, rec.rx_dir)
        sent[pair] = sent.get(pair, 0) + 1
        if rec.received:
            got[pair] = got.get(pair, 0) + 1
    eligible = {pair: got[pair] / sent[pair] for pair in got}
    if not eligible:
        raise ValueError(f"no eligible pairs for link {link[0]}->{link[1]}")
    if not 1 <= k <= len(eligible):
        raise ValueError(
            f"k must be in [1, {len(eligible)}] for link {link[0]}->{link[1]}, got {k}"
        )
    ranked = sorted(eligible.items(), key=lambda item: (-item[1], item[0]))
    return [pair for pair, _ in ranked[:k]]


def select_for_layout(
    layout: NetworkLayout,
    method: str,
    *,
    trace: RssTrace | None = None,
    window: tuple[int, int] | None = None,
    n_transmitter: int = 2,
    n_receiver: int = 2,
    k: int = 9,
    num_directions: int = 6,
) -> SelectionResult:
    """Apply one selection method to every link of a layout."""
    pairs_by_link: dict[Link, list[PatternPair]] = {}
    if method == "all":
        params = {}
        for link in layout.links:
            pairs_by_link[link] = all_pairs(num_directions)
    elif method == "location":
        params = {"n_transmitter": n_transmitter, "n_receiver": n_receiver}
        for link in layout.links:
            pairs_by_link[link] = select_location(layout, link, n_transmitter, n_receiver)
    elif method == "fadelevel":
        if trace is None or window is None:
            raise ValueError("fadelevel selection needs a calibration trace and window")
        params = {"k": k}
        table = compute_fade_levels(trace, window)
        for link in layout.links:
            pairs_by_link[link] = select_fade_level(table, link, k)
    elif method == "prr":
        if trace is None or window is None:
            raise ValueError("prr selection needs a calibration trace and window")
        params = {"k": k}
        for link in layout.links:
            pairs_by_link[link] = select_prr(trace, window, link, k)
    else:
        raise ValueError(f"unknown selection method {method!r}")
    return SelectionResult(method=method, params=params, pairs_by_link=pairs_by_link)


# ------------------------------------------------------------ file format
# One line per link:
#   link <tx> <rx> method <name> pairs (t1,r1) (t2,r2) ...


def format_selection(result: SelectionResult) -> str:
    lines = []
    for (tx, rx), pairs in result.pairs_by_link.items():
        pair_text = " ".join(f"({p.tx_direction},{p.rx_direction})" for p in pairs)
        lines.append(f"link {tx} {rx} method {result.method} pairs {pair_text}")
    return "\n".join(lines) + "\n"


def parse_selection(text: str) -> SelectionResult:
    pairs_by_link: dict[Link, list[PatternPair]] = {}
    method: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if (
            len(parts) < 7
            or parts[0] != "link"
            or parts[3] != "method"
            or parts[5] != "pairs"
        ):
            raise ValueError(
                f"line {lineno}: expected 'link <tx> <rx> method <name> pairs ...'"
            )
        try:
            tx, rx = int(parts[1]), int(parts[2])
        except ValueError:
            raise ValueError(f"line {lineno}: malformed node id") from None
        if method is None:
            method = parts[4]
        elif method != parts[4]:
            raise ValueError(f"line {lineno}: mixed selection methods in one file")
        pairs = []
        for token in parts[6:]:
            if not (token.startswith("(") and token.endswith(")")):
                raise ValueError(f"line {lineno}: malformed pair {token!r}")
            try:
                t, r = (int(v) for v in token[1:-1].split(","))
            except ValueError:
                raise ValueError(f"line {lineno}: malformed pair {token!r}") from None
            pairs.append(PatternPair(t, r))
        if not pairs:
            raise ValueError(f"line {lineno}: link with no pairs")
        pairs_by_link[(tx, rx)] = pairs
    if method is None:
        raise ValueError("selection file contains no links")
    return SelectionResult(method=method, params={}, pairs_by_link=pairs_by_link)


def write_selection_file(path, result: SelectionResult) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_selection(result))


def read_selection_file(path) -> SelectionResult:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_selection(fh.read())
