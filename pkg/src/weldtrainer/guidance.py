"""Moving-target scheduling, cue colors, and trial scoring.

The target point Q advances along the localized seam at a constant
recommended speed.  Each frame the trainee's arc center C is compared
against Q: close means green, trailing along the travel direction means
red, running ahead means blue.  The trial error averages per-sample
relative offsets |Cx-Qx|/Qx + |Cy-Qy|/Qy, so frames must be composed with
the seam away from the image origin (the simulator guarantees Q >= 1 px
on both axes; anything else raises DegenerateTarget rather than silently
producing garbage scores).

Image convention: x grows right, y grows down, so MINUS_Y motion is
upward on screen.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .core import ImagePoint
from .errors import DegenerateTarget, InsufficientMotion

DIRECTION_WINDOW = 20
START_SAMPLES = 5
MOTION_FLOOR_PX = 5.0
DEFAULT_TOLERANCE_PX = 12.0
DEFAULT_SPEED_MM_S = 4.0


class Direction(Enum):
    PLUS_X = "plus_x"
    MINUS_X = "minus_x"
    PLUS_Y = "plus_y"
    MINUS_Y = "minus_y"

    @property
    def axis(self) -> int:
        return 0 if self in (Direction.PLUS_X, Direction.MINUS_X) else 1

    @property
    def sign(self) -> float:
        return 1.0 if self in (Direction.PLUS_X, Direction.PLUS_Y) else -1.0

    @property
    def unit(self) -> np.ndarray:
        vec = np.zeros(2)
        vec[self.axis] = self.sign
        return vec


class CueColor(Enum):
    GREEN = "green"
    RED = "red"
    BLUE = "blue"


@dataclass(frozen=True)
class Cue:
    color: CueColor
    relative_motion: np.ndarray  # Q - C, px
    instant_error: float  # ||Q - C||, px


@dataclass(frozen=True)
class DirectionEstimate:
    direction: Direction
    start: ImagePoint  # robust start of the observation window
    displacement: np.ndarray  # C_last - start


def _as_points(points: Iterable) -> np.ndarray:
    rows = []
    for p in points:
        if isinstance(p, ImagePoint):
            rows.append((p.x, p.y))
        else:
            rows.append((float(p[0]), float(p[1])))
    return np.asarray(rows, dtype=np.float64)


def estimate_direction(centers: Iterable) -> DirectionEstimate:
    """Dominant travel axis over a 20-center observation window.

    The start point is the per-axis median of the first 5 centers, which
    shrugs off one or two bad detections at trial start.  Displacement is
    measured from there to the last center; ties between axes go to x.
    """
    pts = _as_points(centers)
    if pts.shape != (DIRECTION_WINDOW, 2):
        raise ValueError(
            f"direction window needs exactly {DIRECTION_WINDOW} centers, got {pts.shape[0]}")
    start = np.median(pts[:START_SAMPLES], axis=0)
    disp = pts[-1] - start
    if float(np.hypot(disp[0], disp[1])) < MOTION_FLOOR_PX:
        raise InsufficientMotion(
            f"displacement {disp} below {MOTION_FLOOR_PX} px floor")
    if abs(disp[0]) >= abs(disp[1]):
        direction = Direction.PLUS_X if disp[0] >= 0 else Direction.MINUS_X
    else:
        direction = Direction.PLUS_Y if disp[1] >= 0 else Direction.MINUS_Y
    return DirectionEstimate(direction=direction,
                             start=ImagePoint(float(start[0]), float(start[1])),
                             displacement=disp)


@dataclass
class TargetSchedule:
    """Constant-speed parameterization of the seam, oriented to the welder.

    points_2d/points_3d are the ordered seam samples (px / mm).  Arc length
    is measured on the 3D path so the schedule speed is true mm/s even when
    the projection forshortens.  start_offset_mm lets the schedule begin at
    the trainee's current position instead of the seam end.
    """

    points_2d: np.ndarray
    points_3d: np.ndarray
    speed_mm_s: float
    start_time: int
    frame_rate: float
    start_offset_mm: float = 0.0
    _cum_mm: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.points_2d = np.asarray(self.points_2d, dtype=np.float64)
        self.points_3d = np.asarray(self.points_3d, dtype=np.float64)
        if self.speed_mm_s <= 0:
            raise ValueError("speed must be positive")
        if self.frame_rate <= 0:
            raise ValueError("frame rate must be positive")
        if len(self.points_2d) < 2 or len(self.points_2d) != len(self.points_3d):
            raise ValueError("schedule needs matched 2D/3D seam samples")
        steps = np.linalg.norm(np.diff(self.points_3d, axis=0), axis=1)
        self._cum_mm = np.concatenate([[0.0], np.cumsum(steps)])

    @property
    def length_mm(self) -> float:
        return float(self._cum_mm[-1])

    def arc_length_at(self, t: int) -> float:
        if t < self.start_time:
            raise ValueError(f"frame {t} precedes schedule start {self.start_time}")
        s = self.start_offset_mm + self.speed_mm_s * (t - self.start_time) / self.frame_rate
        return float(min(max(s, 0.0), self.length_mm))

    def point_at_arc_length(self, s: float) -> ImagePoint:
        cum = self._cum_mm
        s = min(max(s, 0.0), float(cum[-1]))
        i = int(np.searchsorted(cum, s, side="right")) - 1
        i = min(max(i, 0), len(cum) - 2)
        seg = cum[i + 1] - cum[i]
        frac = 0.0 if seg <= 0 else (s - cum[i]) / seg
        p = self.points_2d[i] + frac * (self.points_2d[i + 1] - self.points_2d[i])
        return ImagePoint(float(p[0]), float(p[1]))


def oriented_path(points_2d: np.ndarray, points_3d: np.ndarray,
                  direction: Direction) -> tuple[np.ndarray, np.ndarray]:
    """Reverse the seam samples when they run against the travel direction."""
    p2 = np.asarray(points_2d, dtype=np.float64)
    p3 = np.asarray(points_3d, dtype=np.float64)
    if float(np.dot(p2[-1] - p2[0], direction.unit)) < 0:
        return p2[::-1].copy(), p3[::-1].copy()
    return p2, p3


def project_arc_length(points_2d: np.ndarray, points_3d: np.ndarray,
                       point: ImagePoint) -> float:
    """3D arc length of the seam sample closest to `point` in the image.

    Used to seed start_offset_mm so Q spawns on top of the trainee.
    """
    p2 = np.asarray(points_2d, dtype=np.float64)
    p3 = np.asarray(points_3d, dtype=np.float64)
    steps = np.linalg.norm(np.diff(p3, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    q = np.array([point.x, point.y]) if isinstance(point, ImagePoint) else np.asarray(point, float)

    best_s = 0.0
    best_d = np.inf
    for i in range(len(p2) - 1):
        a, b = p2[i], p2[i + 1]
        ab = b - a
        denom = float(np.dot(ab, ab))
        frac = 0.0 if denom <= 0 else float(np.clip(np.dot(q - a, ab) / denom, 0.0, 1.0))
        d = float(np.linalg.norm(a + frac * ab - q))
        if d < best_d:
            best_d = d
            best_s = float(cum[i] + frac * (cum[i + 1] - cum[i]))
    return best_s


def target_point(schedule: TargetSchedule, t: int) -> ImagePoint:
    return schedule.point_at_arc_length(schedule.arc_length_at(t))


def cue(q: ImagePoint, c: ImagePoint, direction: Direction,
        tolerance: float = DEFAULT_TOLERANCE_PX) -> Cue:
    """Green within tolerance; otherwise red = trailing, blue = ahead."""
    qv = np.array([q.x, q.y], dtype=np.float64)
    cv = np.array([c.x, c.y], dtype=np.float64)
    rel = qv - cv
    err = float(np.linalg.norm(rel))
    if err <= tolerance:
        color = CueColor.GREEN
    else:
        lead = float(np.dot(cv - qv, direction.unit))
        color = CueColor.BLUE if lead > 0 else CueColor.RED
    return Cue(color=color, relative_motion=rel, instant_error=err)


def average_error(trajectory: Sequence) -> float:
    """Mean per-sample relative offset; the empty trajectory is an error."""
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    total = 0.0
    for c, q in trajectory:
        qx, qy = (q.x, q.y) if isinstance(q, ImagePoint) else (float(q[0]), float(q[1]))
        cx, cy = (c.x, c.y) if isinstance(c, ImagePoint) else (float(c[0]), float(c[1]))
        if qx < 1.0 or qy < 1.0:
            raise DegenerateTarget(f"target ({qx}, {qy}) too close to the frame origin")
        total += abs(cx - qx) / qx + abs(cy - qy) / qy
    return total / len(trajectory)


def score(avg_error: float) -> float:
    if avg_error < 0:
        raise ValueError("average error cannot be negative")
    return float(np.clip(100.0 * (1.0 - avg_error), 0.0, 100.0))


@dataclass(frozen=True)
class TrialReport:
    trajectory: tuple  # ordered (C, Q) pairs
    start_point: ImagePoint
    direction: Direction
    avg_error: float
    score: float
    n: int
    invalid_count: int = 0

    def __post_init__(self):
        if self.n != len(self.trajectory):
            raise ValueError("sample count disagrees with trajectory length")
