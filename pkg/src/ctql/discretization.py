"""Nonuniform state and action grids.

Each grid is built from the negative half-line as a sequence of segments:
the outermost segment ``[a, b]`` includes both endpoints, every inner
segment ``(a, b]`` drops its left endpoint. The positive side mirrors the
negative side and the shared level 0 appears once.
"""
from __future__ import annotations

import hashlib
import math

import numpy as np

from ._jit import jit


class Grid:
    """Immutable, strictly increasing array of representative levels."""

    def __init__(self, levels):
        levels = np.array(levels, dtype=np.float64)
        if levels.ndim != 1 or levels.size == 0:
            raise ValueError("grid levels must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(levels)) or np.any(np.diff(levels) <= 0):
            raise ValueError("grid levels must be finite and strictly increasing")
        levels.setflags(write=False)
        self.levels = levels

    def __len__(self):
        return self.levels.size

    def __eq__(self, other):
        return isinstance(other, Grid) and np.array_equal(self.levels, other.levels)

    def __hash__(self):
        return hash(self.levels.tobytes())

    def __repr__(self):
        return f"Grid(n={len(self)}, range=[{self.levels[0]:.4g}, {self.levels[-1]:.4g}])"

    def checksum(self) -> str:
        return hashlib.sha256(self.levels.tobytes()).hexdigest()


def symmetric_grid(segments) -> Grid:
    """Build a grid from ``[(left, right, count), ...]`` on the negative side.

    Segments are ordered outward-in and must tile ``[left_0, 0]``.
    """
    negative = []
    for i, (left, right, count) in enumerate(segments):
        if i == 0:
            pts = np.linspace(left, right, count)
        else:
            # (left, right]: count equal steps, left endpoint excluded
            pts = np.linspace(left, right, count + 1)[1:]
        negative.extend(pts)
    if negative[-1] != 0.0:
        raise ValueError("segments must end at 0")
    negative = np.array(negative)
    positive = -negative[-2::-1]
    return Grid(np.concatenate([negative, positive]))


def build_angle_grid() -> Grid:
    pi = math.pi
    return symmetric_grid([(-pi, -pi / 9, 8), (-pi / 9, -pi / 36, 7), (-pi / 36, 0.0, 5)])


def build_velocity_grid() -> Grid:
    return symmetric_grid([(-8.0, -1.0, 10), (-1.0, 0.0, 9)])


def build_action_grid() -> Grid:
    return symmetric_grid([(-2.0, -0.2, 9), (-0.2, 0.0, 4)])


@jit
def nearest_index(levels, value):
    """Index of the level closest to ``value``; exact midpoints go to the lower index."""
    n = levels.shape[0]
    i = np.searchsorted(levels, value)
    if i <= 0:
        return 0
    if i >= n:
        return n - 1
    if value - levels[i - 1] <= levels[i] - value:
        return i - 1
    return i


def quantize(value: float, grid: Grid) -> int:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"cannot quantize non-finite value {value!r}")
    return int(nearest_index(grid.levels, value))


def level_of(index: int, grid: Grid) -> float:
    if not 0 <= index < len(grid):
        raise IndexError(f"index {index} out of bounds for grid of {len(grid)} levels")
    return float(grid.levels[index])
