"""Shared value types and small numeric helpers.

Conventions used everywhere downstream:

* image pixels are uint8 in [0, 255], frames are row-major (height, width)
* image coordinates are (x, y) with x = column, y = row, origin top-left
* cloud coordinates are millimetres in the camera frame, z is depth along
  the optical axis and is positive in front of the camera
* angles are degrees; line orientations live in [-90, 90)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ImagePoint:
    """Sub-pixel 2D image location."""

    x: float
    y: float

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass
class GrayFrame:
    """Single-channel 8-bit frame plus a monotonically increasing timestamp."""

    pixels: np.ndarray
    timestamp: int = 0

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise ValueError("frame must be a non-empty 2D array")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise ValueError("intensities must be within [0, 255]")
            px = px.astype(np.uint8)
        self.pixels = px

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model: u = fx*x/z + cx, v = fy*y/z + cy."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def project(self, points: np.ndarray) -> np.ndarray:
        """Project (n, 3) camera-frame mm points to (n, 2) pixel coords."""
        pts = np.asarray(points, dtype=float)
        z = pts[:, 2]
        if np.any(z <= 0):
            raise ValueError("points must lie in front of the camera (z > 0)")
        u = self.fx * pts[:, 0] / z + self.cx
        v = self.fy * pts[:, 1] / z + self.cy
        return np.column_stack([u, v])

    def back_project(self, u: float, v: float, z: float) -> np.ndarray:
        """Lift a pixel at known depth back to a 3D camera-frame point."""
        return np.array([(u - self.cx) / self.fx * z,
                         (v - self.cy) / self.fy * z,
                         z])


@dataclass
class PointCloud:
    """Unordered 3D samples (mm, camera frame) with the capturing camera."""

    points: np.ndarray
    intrinsics: CameraIntrinsics

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ValueError("cloud must be a non-empty (n, 3) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("cloud coordinates must be finite")
        self.points = pts

    def __len__(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class LineSegment:
    """2D segment with derived length and orientation.

    Orientation is the undirected angle of the carrier line in degrees,
    normalized to [-90, 90); swapping the endpoints leaves it unchanged.
    """

    a: ImagePoint
    b: ImagePoint
    length: float = field(init=False)
    orientation: float = field(init=False)

    def __post_init__(self) -> None:
        dx = self.b.x - self.a.x
        dy = self.b.y - self.a.y
        object.__setattr__(self, "length", math.hypot(dx, dy))
        ang = math.degrees(math.atan2(dy, dx))
        object.__setattr__(self, "orientation", ((ang + 90.0) % 180.0) - 90.0)

    @property
    def endpoints(self) -> tuple[ImagePoint, ImagePoint]:
        return (self.a, self.b)


def normalize_intensity(value) -> np.ndarray | float:
    """Map raw 8-bit intensity onto [0, 1]. Rejects out-of-range input."""
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0) or np.any(arr > 255):
        raise ValueError("intensity outside [0, 255]")
    out = arr / 255.0
    return float(out) if out.ndim == 0 else out


def euclidean_distance(a, b) -> float:
    ax, ay = (a.x, a.y) if isinstance(a, ImagePoint) else (a[0], a[1])
    bx, by = (b.x, b.y) if isinstance(b, ImagePoint) else (b[0], b[1])
    return math.hypot(ax - bx, ay - by)
