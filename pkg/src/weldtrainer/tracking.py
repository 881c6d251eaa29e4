"""Arc spot detection and tracking on binarized HDR frames.

Stages, in the order a frame flows through them:

1. binarize at a fixed intensity threshold
2. trace one closed boundary per 8-connected blob (Moore neighborhood walk)
3. reject blobs whose enclosed area is outside the plausible arc range
4. reject blobs whose bounding box touches no confident tile
5. fit the minimum enclosing circle of each survivor
6. pick the largest circle near the previous arc position, smooth with a
   constant-velocity Kalman filter

The enclosing-circle fit is what makes partial occlusion by the torch body
survivable: as long as part of the rim is visible the circle, and with it
the center, barely moves, while a plain centroid drifts into the visible
part.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .core import GrayFrame, ImagePoint, euclidean_distance
from .errors import DegenerateContour, NoArcDetected
from .confidence import MEDIUM_THRESHOLD

DEFAULT_BINARIZE_THRESHOLD = 220
DEFAULT_MIN_AREA = 30.0
DEFAULT_MAX_AREA = 20000.0
# 40 px at 640x480; scaled by the actual frame diagonal when tracking
GATE_DIAGONAL_FRACTION = 40.0 / 800.0
DEFAULT_PROCESS_NOISE = 1.0
DEFAULT_MEASUREMENT_NOISE = 4.0

_EIGHT = [(-1, -1), (-1, 0), (-1, 1), (0, 1),
          (1, 1), (1, 0), (1, -1), (0, -1)]


@dataclass
class Contour:
    """Closed pixel boundary; the edge points[-1] -> points[0] is implicit.

    Points are (x, y) and ordered counter-clockwise in the mathematical
    sense (positive shoelace sum when treating x, y as standard axes).
    """

    points: np.ndarray

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1) inclusive bounds."""
        xs, ys = self.points[:, 0], self.points[:, 1]
        return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())


@dataclass(frozen=True)
class CircleFit:
    center: ImagePoint
    radius: float


@dataclass
class ArcEstimate:
    """Per-frame tracker output. valid=False means no acceptable candidate;
    the smoothed center then carries the motion-model prediction if one
    exists."""

    center: ImagePoint | None
    radius: float
    smoothed: ImagePoint | None
    valid: bool


def binarize(frame: GrayFrame, threshold: int = DEFAULT_BINARIZE_THRESHOLD) -> np.ndarray:
    """Boolean mask of pixels at or above the threshold."""
    if not 0 <= threshold <= 255:
        raise ValueError("threshold outside [0, 255]")
    return frame.pixels >= threshold


def _trace_boundary(mask: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    # Moore-neighbor walk with (pixel, backtrack) state cycle detection: the
    # walk stops when a state repeats and the emitted window between the two
    # occurrences is exactly one period of the boundary cycle. `start` is the
    # first set pixel in raster order, so its west neighbor is clear and
    # serves as the initial backtrack.
    h, w = mask.shape

    def is_set(r: int, c: int) -> bool:
        return 0 <= r < h and 0 <= c < w and mask[r, c]

    cur = start
    back = (start[0], start[1] - 1)
    boundary: list[tuple[int, int]] = []
    seen: dict[tuple[tuple[int, int], tuple[int, int]], int] = {}
    while True:
        state = (cur, back)
        if state in seen:
            return boundary[seen[state]:]
        seen[state] = len(boundary)
        boundary.append(cur)

        bi = _EIGHT.index((back[0] - cur[0], back[1] - cur[1]))
        nxt = None
        prev = back
        for k in range(1, 9):
            dr, dc = _EIGHT[(bi + k) % 8]
            cand = (cur[0] + dr, cur[1] + dc)
            if is_set(*cand):
                nxt = cand
                break
            prev = cand
        if nxt is None:
            return boundary  # isolated pixel
        cur, back = nxt, prev


def extract_contours(mask: np.ndarray) -> list[Contour]:
    """One boundary per 8-connected component, in raster scan order."""
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    contours: list[Contour] = []
    if count == 0:
        return contours
    starts = ndimage.find_objects(labels)
    for idx in range(1, count + 1):
        sl = starts[idx - 1]
        sub = labels[sl] == idx
        rows, cols = np.nonzero(sub)  # raster order already
        r0, c0 = rows[0], cols[0]
        trace = _trace_boundary(sub, (int(r0), int(c0)))
        pts = np.array([(c + sl[1].start, r + sl[0].start) for r, c in trace],
                       dtype=float)
        if len(pts) >= 3 and _signed_area(pts) < 0:
            pts = pts[::-1]
        contours.append(Contour(points=pts))
    return contours


def _signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def contour_area(contour: Contour) -> float:
    """Shoelace area of the closed boundary polygon."""
    if len(contour) < 3:
        raise DegenerateContour(f"contour with {len(contour)} points has no area")
    return abs(_signed_area(contour.points))


def dimension_filter(contours: list[Contour],
                     min_area: float = DEFAULT_MIN_AREA,
                     max_area: float = DEFAULT_MAX_AREA) -> list[Contour]:
    """Keep contours with min_area < area < max_area (strict on both sides).

    Contours too small to enclose area (fewer than 3 points) are dropped.
    """
    if not 0 < min_area < max_area:
        raise ValueError("need 0 < min_area < max_area")
    kept = []
    for c in contours:
        if len(c) < 3:
            continue
        if min_area < contour_area(c) < max_area:
            kept.append(c)
    return kept


def confidence_gate(contours: list[Contour], p_normalized: np.ndarray,
                    tile_size: int,
                    threshold: float = MEDIUM_THRESHOLD) -> list[Contour]:
    """Keep contours whose bounding box overlaps at least one tile at or
    above the threshold. Expects the normalized map."""
    rows, cols = p_normalized.shape
    kept = []
    for c in contours:
        x0, y0, x1, y1 = c.bbox
        tc0 = max(0, min(cols - 1, int(x0 // tile_size)))
        tc1 = max(0, min(cols - 1, int(x1 // tile_size)))
        tr0 = max(0, min(rows - 1, int(y0 // tile_size)))
        tr1 = max(0, min(rows - 1, int(y1 // tile_size)))
        if np.any(p_normalized[tr0:tr1 + 1, tc0:tc1 + 1] >= threshold):
            kept.append(c)
    return kept


# --- minimum enclosing circle (Welzl, move-to-front via fixed shuffle) ---

_EPS = 1e-10


def _circle_two(a, b) -> tuple[float, float, float]:
    cx = (a[0] + b[0]) / 2.0
    cy = (a[1] + b[1]) / 2.0
    r = math.hypot(a[0] - b[0], a[1] - b[1]) / 2.0
    return cx, cy, r


def _circumcircle(a, b, c) -> tuple[float, float, float] | None:
    ax, ay = a; bx, by = b; cx, cy = c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < _EPS:
        return None
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    return ux, uy, math.hypot(ax - ux, ay - uy)


def _contains(circle: tuple[float, float, float], p, slack: float = 1e-7) -> bool:
    return math.hypot(p[0] - circle[0], p[1] - circle[1]) <= circle[2] * (1 + 1e-12) + slack


def min_enclosing_circle(points) -> CircleFit:
    """Smallest circle containing every input point.

    Incremental Welzl on a deterministically shuffled copy; expected linear
    time, exact up to floating point.
    """
    pts = [(float(p[0]), float(p[1])) for p in np.asarray(points, dtype=float).reshape(-1, 2)]
    if not pts:
        raise ValueError("no points to enclose")
    shuffled = pts[:]
    random.Random(0x5EED).shuffle(shuffled)

    circle: tuple[float, float, float] | None = None
    for i, p in enumerate(shuffled):
        if circle is not None and _contains(circle, p):
            continue
        # p must sit on the boundary
        circle = (p[0], p[1], 0.0)
        for j in range(i):
            q = shuffled[j]
            if _contains(circle, q):
                continue
            # p and q on the boundary
            circle = _circle_two(p, q)
            for k in range(j):
                s = shuffled[k]
                if _contains(circle, s):
                    continue
                cc = _circumcircle(p, q, s)
                if cc is not None:
                    circle = cc
                else:
                    # collinear triple: stretch over the farthest pair
                    pairs = [(p, q), (p, s), (q, s)]
                    circle = max((_circle_two(u, v) for u, v in pairs),
                                 key=lambda c: c[2])
    return CircleFit(center=ImagePoint(circle[0], circle[1]), radius=circle[2])


# --- constant-velocity smoothing ---

class Kalman2D:
    """Constant-velocity filter over [x, y, vx, vy], dt = 1 frame."""

    def __init__(self, process_noise: float = DEFAULT_PROCESS_NOISE,
                 measurement_noise: float = DEFAULT_MEASUREMENT_NOISE):
        self.F = np.array([[1, 0, 1, 0],
                           [0, 1, 0, 1],
                           [0, 0, 1, 0],
                           [0, 0, 0, 1]], dtype=float)
        self.H = np.array([[1, 0, 0, 0],
                           [0, 1, 0, 0]], dtype=float)
        q = process_noise
        self.Q = np.diag([q / 4.0, q / 4.0, q, q])
        self.R = np.eye(2) * measurement_noise
        self.x: np.ndarray | None = None
        self.P: np.ndarray | None = None
        self._r0 = measurement_noise

    def start(self, mx: float, my: float) -> None:
        self.x = np.array([mx, my, 0.0, 0.0])
        self.P = np.diag([self._r0, self._r0, 25.0, 25.0])

    def predict(self) -> None:
        if self.x is None:
            return
        self.x = self.F @ self.x
        self.P = self.F @ self.P @ self.F.T + self.Q

    def update(self, mx: float, my: float) -> None:
        if self.x is None:
            self.start(mx, my)
            return
        z = np.array([mx, my])
        y = z - self.H @ self.x
        S = self.H @ self.P @ self.H.T + self.R
        K = self.P @ self.H.T @ np.linalg.inv(S)
        self.x = self.x + K @ y
        self.P = (np.eye(4) - K @ self.H) @ self.P

    @property
    def position(self) -> ImagePoint | None:
        if self.x is None:
            return None
        return ImagePoint(float(self.x[0]), float(self.x[1]))


DEFAULT_MAX_COAST_FRAMES = 3


@dataclass
class TrackerState:
    """Single-consumer tracking state carried across frames."""

    prev_center: ImagePoint | None = None
    gate_px: float | None = None
    kalman: Kalman2D = field(default_factory=Kalman2D)
    misses: int = 0
    max_coast: int = DEFAULT_MAX_COAST_FRAMES

    def gate_for(self, frame_diagonal: float) -> float:
        if self.gate_px is not None:
            return self.gate_px
        return GATE_DIAGONAL_FRACTION * frame_diagonal

    def reset(self) -> None:
        self.prev_center = None
        self.kalman = Kalman2D()
        self.misses = 0


def track_arc(contours: list[Contour], state: TrackerState,
              frame_diagonal: float = 800.0) -> ArcEstimate:
    """Pick the largest plausible circle near the previous position.

    Candidates are the enclosing circles of the given contours, tried in
    descending radius order (ties broken by input order). The first one
    within the gate distance of the previous center wins. With no prior
    center the largest candidate bootstraps the track. When every candidate
    is gated out the estimate is invalid and the motion model coasts on
    prediction alone; after max_coast consecutive misses the extrapolation
    is stale and the whole track is dropped, so the next gated detection
    re-seeds it (recovers from a bootstrap onto a transient glare blob).
    """
    gate = state.gate_for(frame_diagonal)
    fits: list[CircleFit] = [min_enclosing_circle(c.points) for c in contours]
    order = sorted(range(len(fits)), key=lambda i: (-fits[i].radius, i))

    chosen: CircleFit | None = None
    if state.prev_center is None:
        if order:
            chosen = fits[order[0]]
    else:
        for i in order:
            if euclidean_distance(fits[i].center, state.prev_center) <= gate:
                chosen = fits[i]
                break

    state.kalman.predict()
    if chosen is None:
        smoothed = state.kalman.position
        state.misses += 1
        if state.misses > state.max_coast:
            state.reset()
        return ArcEstimate(center=None, radius=0.0,
                           smoothed=smoothed, valid=False)

    state.misses = 0
    state.prev_center = chosen.center
    state.kalman.update(chosen.center.x, chosen.center.y)
    return ArcEstimate(center=chosen.center, radius=chosen.radius,
                       smoothed=state.kalman.position, valid=True)


# --- benchmark baselines ---

def baseline_contour_center(contours: list[Contour]) -> ImagePoint:
    """Centroid of the maximum-area contour; ties go to scan order."""
    best = None
    best_area = -1.0
    for c in contours:
        if len(c) < 3:
            continue
        a = contour_area(c)
        if a > best_area:
            best, best_area = c, a
    if best is None:
        raise NoArcDetected("no contour with measurable area")
    return _polygon_centroid(best.points)


def _polygon_centroid(points: np.ndarray) -> ImagePoint:
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < _EPS:
        return ImagePoint(float(x.mean()), float(y.mean()))
    cx = float(((x + xn) * cross).sum() / (6.0 * a))
    cy = float(((y + yn) * cross).sum() / (6.0 * a))
    return ImagePoint(cx, cy)


def baseline_intensity_centers(mask: np.ndarray) -> list[ImagePoint]:
    """Pixel-mass centroid of every connected bright region, unfiltered."""
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return []
    centers = ndimage.center_of_mass(mask, labels, range(1, count + 1))
    return [ImagePoint(float(c), float(r)) for r, c in centers]
