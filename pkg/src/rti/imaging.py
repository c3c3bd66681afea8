"""Regularized image reconstruction from link statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import VoxelGrid, WeightMatrix

REGULARIZERS = ("identity", "difference")


class ReconstructionError(RuntimeError):
    """Raised when the regularized system cannot be solved reliably."""


@dataclass(frozen=True)
class ImageFrame:
    """Voxel attenuation estimates for one tick (index order of the grid)."""

    time: int
    values: np.ndarray


@dataclass(frozen=True)
class Reconstructor:
    """Precomputed linear map from link statistics to a voxel image."""

    pi: np.ndarray  # (num_voxels, num_links)
    alpha: float
    regularizer: str

    @property
    def num_links(self) -> int:
        return self.pi.shape[1]

    @property
    def num_voxels(self) -> int:
        return self.pi.shape[0]


def difference_operator(height: int, width: int) -> np.ndarray:
    """First-difference operator over a row-major grid.

    Stacks horizontal neighbour differences over all rows, then vertical
    neighbour differences over all columns.
    """
    n = height * width
    rows = height * (width - 1) + width * (height - 1)
    L = np.zeros((rows, n))
    k = 0
    for r in range(height):
        for c in range(width - 1):
            L[k, r * width + c + 1] = 1.0
            L[k, r * width + c] = -1.0
            k += 1
    for r in range(height - 1):
        for c in range(width):
            L[k, (r + 1) * width + c] = 1.0
            L[k, r * width + c] = -1.0
            k += 1
    return L


def build_reconstructor(
    weights: WeightMatrix | np.ndarray,
    alpha: float,
    regularizer: str = "difference",
    grid: VoxelGrid | None = None,
) -> Reconstructor:
    """Precompute the regularized pseudo-inverse of the weight matrix.

    The difference regularizer penalises spatial gradients and needs the grid
    to know the row layout; the identity regularizer penalises magnitude.
    """
    A = weights.entries if isinstance(weights, WeightMatrix) else np.asarray(weights, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise ValueError("weight matrix must be a nonempty 2-D array")
    if not np.any(A):
        raise ValueError("weight matrix has no nonzero entries")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if regularizer not in REGULARIZERS:
        raise ValueError(f"regularizer must be one of {REGULARIZERS}")
    n = A.shape[1]
    if regularizer == "identity":
        Q = np.eye(n)
    else:
        if grid is None:
            raise ValueError("difference regularizer needs the voxel grid")
        if grid.num_voxels != n:
            raise ValueError(
                f"grid has {grid.num_voxels} voxels but weight matrix has {n} columns"
            )
        L = difference_operator(grid.height_voxels, grid.width_voxels)
        Q = L.T @ L
    system = A.T @ A + alpha * Q
    try:
        pi = np.linalg.solve(system, A.T)
    except np.linalg.LinAlgError as exc:
        raise ReconstructionError(f"regularized system is singular: {exc}") from exc
    residual = float(np.max(np.abs(system @ pi - A.T)))
    if not np.isfinite(residual) or residual > 1e-6:
        raise ReconstructionError(
            f"solve residual {residual:.3e} exceeds 1e-6; system is ill-conditioned"
        )
    return Reconstructor(pi=pi, alpha=float(alpha), regularizer=regularizer)


def reconstruct(rec: Reconstructor, stats: np.ndarray, time: int = 0) -> ImageFrame:
    """Map one tick's link statistic vector to a voxel image."""
    y = np.asarray(stats, dtype=float)
    if y.shape != (rec.num_links,):
        raise ValueError(f"expected {rec.num_links} link statistics, got {y.shape}")
    return ImageFrame(time=time, values=rec.pi @ y)


def argmax_voxel(frame: ImageFrame, grid: VoxelGrid) -> tuple[float, float]:
    """Centre of the brightest voxel; ties resolve to the lowest index."""
    values = np.asarray(frame.values)
    if values.shape != (grid.num_voxels,):
        raise ValueError("frame size does not match grid")
    return grid.voxel_center(int(np.argmax(values)))


# ------------------------------------------------------------- exporters


def frame_to_csv(frame: ImageFrame, grid: VoxelGrid) -> str:
    """Row-major CSV: one line per grid row, southernmost row first."""
    values = np.asarray(frame.values, dtype=float)
    lines = []
    for r in range(grid.height_voxels):
        row = values[r * grid.width_voxels : (r + 1) * grid.width_voxels]
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def frame_to_pgm(frame: ImageFrame, grid: VoxelGrid) -> bytes:
    """8-bit binary PGM heat map, min-max normalised per frame.

    Image rows run north to south so the picture is map-oriented; a flat
    frame renders black.
    """
    values = np.asarray(frame.values, dtype=float).reshape(
        grid.height_voxels, grid.width_voxels
    )
    lo = float(values.min())
    hi = float(values.max())
    if hi > lo:
        scaled = np.round((values - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(values)
    pixels = scaled.astype(np.uint8)[::-1, :]  # top row = northernmost
    header = f"P5 {grid.width_voxels} {grid.height_voxels} 255\n".encode("ascii")
    return header + pixels.tobytes()


def write_frame_csv(path, frame: ImageFrame, grid: VoxelGrid) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(frame_to_csv(frame, grid))


def write_frame_pgm(path, frame: ImageFrame, grid: VoxelGrid) -> None:
    with open(path, "wb") as fh:
        fh.write(frame_to_pgm(frame, grid))
