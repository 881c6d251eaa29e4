"""Tile-level light intensity confidence.

The frame is split into square tiles and every tile carries a confidence
value that rises only under *sustained* brightness and collapses as soon as
the tile darkens. The per-tile recursion is

    p[t] = min( (b * m)^p[t-1] / b * (s + p[t-1]), 1 )

with m the tile's mean intensity mapped to [0, 1], growth base b and floor s.
A fresh map starts at p = 0, so the first update lands at s/b for every tile
regardless of input; only repeated bright frames push a tile toward 1.
Short-lived glare (1 or 2 frames) therefore never clears the gate threshold.

A running-average alternative (`softmax_update`) is kept for benchmarking:
    p[t] = clamp(m + w * p[t-1], 0, 1)
It reacts instantly to brightness, which is exactly its weakness around
reflections.

Classification thresholds apply to the map normalized by its maximum; the
raw (pre-normalization) values are what the recursion carries forward and
what the benchmark counts, since normalizing an all-equal early map would
mark every tile high.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GrayFrame
from .errors import ShapeMismatch

DEFAULT_GROWTH_BASE = 4.5
DEFAULT_FLOOR = 1.0
DEFAULT_SOFTMAX_WEIGHT = 0.01
HIGH_THRESHOLD = 0.95
MEDIUM_THRESHOLD = 0.65

CLASS_LOW = 0
CLASS_MEDIUM = 1
CLASS_HIGH = 2


@dataclass
class TileGrid:
    """Mean intensity per tile, [0, 255] floats of shape (rows, cols)."""

    means: np.ndarray
    tile_size: int

    @property
    def rows(self) -> int:
        return int(self.means.shape[0])

    @property
    def cols(self) -> int:
        return int(self.means.shape[1])


@dataclass
class ConfidenceMap:
    """Per-tile confidence in [0, 1] plus the parameters that produced it."""

    p: np.ndarray
    tile_size: int
    growth_base: float = DEFAULT_GROWTH_BASE
    floor: float = DEFAULT_FLOOR

    @property
    def rows(self) -> int:
        return int(self.p.shape[0])

    @property
    def cols(self) -> int:
        return int(self.p.shape[1])

    def to_wire(self) -> dict:
        """Compact wire form: dimensions plus the flat map at 6 digits."""
        flat = [float(f"{v:.6g}") for v in self.p.ravel()]
        return {"rows": self.rows, "cols": self.cols,
                "tile_size": self.tile_size, "p": flat}


def partition_tiles(frame: GrayFrame, tile_size: int = 32) -> TileGrid:
    """Average the frame over a tile grid; edge tiles may be partial."""
    if tile_size < 1:
        raise ValueError("tile_size must be positive")
    px = frame.pixels.astype(np.float64)
    h, w = px.shape
    row_idx = np.arange(0, h, tile_size)
    col_idx = np.arange(0, w, tile_size)
    sums = np.add.reduceat(np.add.reduceat(px, row_idx, axis=0), col_idx, axis=1)
    row_counts = np.diff(np.append(row_idx, h))
    col_counts = np.diff(np.append(col_idx, w))
    counts = np.outer(row_counts, col_counts)
    return TileGrid(means=sums / counts, tile_size=tile_size)


def _check_shapes(grid: TileGrid, prev: np.ndarray) -> np.ndarray:
    prev = np.asarray(prev, dtype=np.float64)
    if prev.shape != grid.means.shape:
        raise ShapeMismatch(
            f"confidence state {prev.shape} does not match grid {grid.means.shape}")
    return prev


def update_confidence(grid: TileGrid, prev: np.ndarray,
                      growth_base: float = DEFAULT_GROWTH_BASE,
                      floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """One recursion step over the whole grid. prev holds raw p[t-1].

    0^0 evaluates to 1 here, so a dark tile with zero history still lands at
    floor/growth_base on the first update.
    """
    prev = _check_shapes(grid, prev)
    m = grid.means / 255.0
    out = np.power(growth_base * m, prev) / growth_base * (floor + prev)
    return np.minimum(out, 1.0)


def softmax_update(grid: TileGrid, prev: np.ndarray,
                   weight: float = DEFAULT_SOFTMAX_WEIGHT) -> np.ndarray:
    """Benchmark baseline: weighted running sum, clamped to [0, 1]."""
    prev = _check_shapes(grid, prev)
    return np.clip(grid.means / 255.0 + weight * prev, 0.0, 1.0)


def normalize_map(p: np.ndarray) -> np.ndarray:
    """Scale by the map maximum; an all-zero map is returned unchanged."""
    p = np.asarray(p, dtype=np.float64)
    peak = p.max()
    if peak <= 0.0:
        return p.copy()
    return p / peak


def classify_tiles(p_normalized: np.ndarray,
                   high: float = HIGH_THRESHOLD,
                   medium: float = MEDIUM_THRESHOLD) -> np.ndarray:
    """Label each tile 0/1/2 for low/medium/high confidence."""
    p = np.asarray(p_normalized)
    out = np.full(p.shape, CLASS_LOW, dtype=np.int8)
    out[p >= medium] = CLASS_MEDIUM
    out[p >= high] = CLASS_HIGH
    return out


class ConfidenceTracker:
    """Stateful convenience wrapper: feed frames, read maps.

    Keeps the raw recursion state; `normalized` is derived on demand.
    """

    def __init__(self, tile_size: int = 32,
                 growth_base: float = DEFAULT_GROWTH_BASE,
                 floor: float = DEFAULT_FLOOR):
        self.tile_size = tile_size
        self.growth_base = growth_base
        self.floor = floor
        self.raw: np.ndarray | None = None

    def update(self, frame: GrayFrame) -> ConfidenceMap:
        grid = partition_tiles(frame, self.tile_size)
        if self.raw is None:
            self.raw = np.zeros_like(grid.means)
        self.raw = update_confidence(grid, self.raw, self.growth_base, self.floor)
        return ConfidenceMap(p=self.raw.copy(), tile_size=self.tile_size,
                             growth_base=self.growth_base, floor=self.floor)

    @property
    def normalized(self) -> np.ndarray:
        if self.raw is None:
            raise ValueError("tracker has not seen a frame yet")
        return normalize_map(self.raw)
