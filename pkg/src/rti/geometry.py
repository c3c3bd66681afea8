"""Voxel grids, node layouts, and the elliptical link weight model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

TAU = 2.0 * math.pi


class LayoutError(ValueError):
    """Raised for malformed layouts or layout files."""


class PatternPair(NamedTuple):
    """A transmit/receive antenna direction pair. Directions are 1-based."""

    tx_direction: int
    rx_direction: int


@dataclass(frozen=True)
class NodeSpec:
    """One radio node: position in metres, antenna zero bearing in radians."""

    id: int
    x: float
    y: float
    antenna_zero_bearing: float = 0.0
    num_directions: int = 6

    def __post_init__(self) -> None:
        if self.num_directions < 1:
            raise ValueError(f"node {self.id}: num_directions must be >= 1")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class VoxelGrid:
    """Rectangular voxel grid over the area of interest.

    ``origin`` is the south-west corner. Voxel indices are row-major
    (index = row * width_voxels + col) with rows growing northward.
    """

    origin: tuple[float, float]
    width_voxels: int
    height_voxels: int
    voxel_width: float

    def __post_init__(self) -> None:
        if self.width_voxels < 1 or self.height_voxels < 1:
            raise ValueError("grid must contain at least one voxel")
        if self.voxel_width <= 0:
            raise ValueError("voxel_width must be positive")

    @property
    def num_voxels(self) -> int:
        return self.width_voxels * self.height_voxels

    @property
    def width_m(self) -> float:
        return self.width_voxels * self.voxel_width

    @property
    def height_m(self) -> float:
        return self.height_voxels * self.voxel_width

    def voxel_rowcol(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.num_voxels:
            raise ValueError(f"voxel index {index} outside [0, {self.num_voxels})")
        return divmod(index, self.width_voxels)

    def voxel_index(self, row: int, col: int) -> int:
        if not (0 <= row < self.height_voxels and 0 <= col < self.width_voxels):
            raise ValueError(f"voxel (row={row}, col={col}) outside grid")
        return row * self.width_voxels + col

    def voxel_center(self, index: int) -> tuple[float, float]:
        row, col = self.voxel_rowcol(index)
        x0, y0 = self.origin
        w = self.voxel_width
        return (x0 + (col + 0.5) * w, y0 + (row + 0.5) * w)

    def centers(self) -> np.ndarray:
        """All voxel centers as an (N, 2) array in index order."""
        x0, y0 = self.origin
        w = self.voxel_width
        cols = np.arange(self.width_voxels)
        rows = np.arange(self.height_voxels)
        xs = x0 + (cols + 0.5) * w
        ys = y0 + (rows + 0.5) * w
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def contains(self, point: Sequence[float]) -> bool:
        x0, y0 = self.origin
        return (x0 <= point[0] <= x0 + self.width_m) and (
            y0 <= point[1] <= y0 + self.height_m
        )


def build_grid(
    origin: tuple[float, float],
    width_m: float,
    height_m: float,
    voxel_width: float,
) -> VoxelGrid:
    """Cover a width_m x height_m area with square voxels of side voxel_width.

    Voxel counts round up so the grid never under-covers the requested area.
    """
    if width_m <= 0 or height_m <= 0 or voxel_width <= 0:
        raise ValueError("grid dimensions and voxel width must be positive")
    # Guard against float noise pushing an exact multiple over the next integer.
    width_voxels = math.ceil(width_m / voxel_width - 1e-9)
    height_voxels = math.ceil(height_m / voxel_width - 1e-9)
    return VoxelGrid(origin, width_voxels, height_voxels, voxel_width)


class NetworkLayout:
    """A set of nodes plus the derived list of directed links.

    Links are every ordered pair of distinct nodes, enumerated in node order:
    (n0->n1, n0->n2, ..., n1->n0, n1->n2, ...). Weight matrix rows and link
    statistic vectors follow this order.
    """

    def __init__(self, nodes: Sequence[NodeSpec]):
        if len(nodes) < 2:
            raise LayoutError("a layout needs at least two nodes")
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            raise LayoutError("duplicate node ids in layout")
        for i, a in enumerate(nodes):
            for b in nodes[i + 1 :]:
                if a.x == b.x and a.y == b.y:
                    raise LayoutError(
                        f"nodes {a.id} and {b.id} share position ({a.x}, {a.y})"
                    )
        self.nodes: list[NodeSpec] = list(nodes)
        self._by_id = {n.id: n for n in nodes}
        self.links: list[tuple[int, int]] = [
            (a.id, b.id) for a in nodes for b in nodes if a.id != b.id
        ]
        self._link_index = {link: i for i, link in enumerate(self.links)}

    @property
    def num_links(self) -> int:
        return len(self.links)

    def node(self, node_id: int) -> NodeSpec:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise LayoutError(f"no node with id {node_id}") from None

    def link_index(self, tx_id: int, rx_id: int) -> int:
        try:
            return self._link_index[(tx_id, rx_id)]
        except KeyError:
            raise LayoutError(f"no link {tx_id}->{rx_id} in layout") from None

    def link_distance(self, tx_id: int, rx_id: int) -> float:
        a, b = self.node(tx_id), self.node(rx_id)
        return math.hypot(b.x - a.x, b.y - a.y)


def direction_bearing(node: NodeSpec, direction: int) -> float:
    """Absolute bearing (radians) of one antenna direction of a node."""
    if not 1 <= direction <= node.num_directions:
        raise ValueError(
            f"direction {direction} outside [1, {node.num_directions}]"
        )
    return node.antenna_zero_bearing + (direction - 1) * TAU / node.num_directions


def angle_to_link(node: NodeSpec, direction: int, other: NodeSpec) -> float:
    """Magnitude of the angle between an antenna direction and the line to
    the other node, wrapped to [0, pi]."""
    bearing = direction_bearing(node, direction)
    to_other = math.atan2(other.y - node.y, other.x - node.x)
    return abs(math.remainder(bearing - to_other, TAU))


def ellipse_contains(
    p1: Sequence[float],
    p2: Sequence[float],
    point: Sequence[float],
    lam: float,
) -> bool:
    """Strict elliptical membership test with foci p1, p2 and excess lam."""
    d = math.hypot(p2[0] - p1[0], p2[1] - p1[1])
    d1 = math.hypot(point[0] - p1[0], point[1] - p1[1])
    d2 = math.hypot(point[0] - p2[0], point[1] - p2[1])
    return d1 + d2 < d + lam


@dataclass(frozen=True)
class WeightMatrix:
    """Link-to-voxel weights; rows follow NetworkLayout.links order."""

    entries: np.ndarray
    lam: float

    @property
    def num_links(self) -> int:
        return self.entries.shape[0]

    @property
    def num_voxels(self) -> int:
        return self.entries.shape[1]


def build_weight_matrix(
    grid: VoxelGrid, layout: NetworkLayout, lam: float
) -> WeightMatrix:
    """Weight matrix of the elliptical shadowing model.

    A voxel contributes to a link when the sum of the distances from its
    center to the two nodes is strictly less than the node distance plus lam;
    contributing voxels weigh 1/sqrt(link distance).
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    centers = grid.centers()
    entries = np.zeros((layout.num_links, grid.num_voxels))
    for i, (tx_id, rx_id) in enumerate(layout.links):
        tx, rx = layout.node(tx_id), layout.node(rx_id)
        d = math.hypot(rx.x - tx.x, rx.y - tx.y)
        d1 = np.hypot(centers[:, 0] - tx.x, centers[:, 1] - tx.y)
        d2 = np.hypot(centers[:, 0] - rx.x, centers[:, 1] - rx.y)
        inside = (d1 + d2) < (d + lam)
        entries[i, inside] = 1.0 / math.sqrt(d)
    return WeightMatrix(entries=entries, lam=lam)


def segments_intersect(
    p1: Sequence[float],
    p2: Sequence[float],
    q1: Sequence[float],
    q2: Sequence[float],
) -> bool:
    """True when segment p1-p2 intersects segment q1-q2 (touching counts)."""

    def orient(a, b, c) -> float:
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_segment(a, b, c) -> bool:
        return (
            min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
        )

    o1 = orient(p1, p2, q1)
    o2 = orient(p1, p2, q2)
    o3 = orient(q1, q2, p1)
    o4 = orient(q1, q2, p2)
    if o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        return (o1 > 0) != (o2 > 0) and (o3 > 0) != (o4 > 0)
    if o1 == 0 and on_segment(p1, p2, q1):
        return True
    if o2 == 0 and on_segment(p1, p2, q2):
        return True
    if o3 == 0 and on_segment(q1, q2, p1):
        return True
    return o4 == 0 and on_segment(q1, q2, p2)


# Layout file format: one node per line, "node <id> <x> <y> <zero_bearing_deg>".


def parse_layout(text: str) -> list[NodeSpec]:
    nodes = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5 or parts[0] != "node":
            raise LayoutError(f"line {lineno}: expected 'node <id> <x> <y> <bearing_deg>'")
        try:
            node_id = int(parts[1])
            x, y, bearing_deg = (float(p) for p in parts[2:5])
        except ValueError:
            raise LayoutError(f"line {lineno}: malformed number") from None
        nodes.append(NodeSpec(node_id, x, y, math.radians(bearing_deg)))
    if not nodes:
        raise LayoutError("layout file contains no nodes")
    return nodes


def format_layout(nodes: Sequence[NodeSpec]) -> str:
    lines = [
        f"node {n.id} {n.x!r} {n.y!r} {math.degrees(n.antenna_zero_bearing)!r}"
        for n in nodes
    ]
    return "\n".join(lines) + "\n"


def read_layout_file(path) -> list[NodeSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_layout(fh.read())


def write_layout_file(path, nodes: Sequence[NodeSpec]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_layout(nodes))
