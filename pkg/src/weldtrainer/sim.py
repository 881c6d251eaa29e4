"""Synthetic sensor rig: workpiece clouds, arc-glare frames, scripted trials.

Everything downstream is tested against this module's ground truth, so
determinism is the contract: a scenario (including its seed) fixes every
frame byte and every truth entry.  Per-frame randomness comes from
numpy's PCG64 seeded with [seed, frame, stream] so frames can be rendered
independently and in any order; stream 0 feeds torch jitter, stream 1
feeds pixel noise.

Geometry: two plates meeting along a straight joint.  The cloud is a
regular lateral grid (pitch_mm) in a seam-aligned frame (a along the
joint, b across), rotated in plane, offset, then tilted about the camera
x axis and pushed out to the standoff distance.  Depth conventions:
  fillet: the standing plate's top face sits groove_depth closer to the
          camera for b >= 0 (step edge at the joint);
  butt:   plates are coplanar with a gap of gap_mm; the gap floor sits
          groove_depth farther from the camera.
The published truth separates the image-space joint line (top-surface
projection, what edge detection can see) from the 3D weld path (the
valley the torch must reach: base plane for fillet, gap floor for butt).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .core import CameraIntrinsics, GrayFrame, ImagePoint, PointCloud

DEFAULT_CAMERA = CameraIntrinsics(fx=950.0, fy=950.0, cx=320.0, cy=240.0,
                                  width=640, height=480)
DEFAULT_STANDOFF_MM = 380.0
DEFAULT_TILT_DEG = 10.0
DEFAULT_BACKGROUND = 30.0
DEFAULT_ARC_SIGMA_PX = 12.0
DEFAULT_FRAME_RATE = 10.0
NOISE_SPAN = 6.0  # uniform [0, 6): stays below any sane binarize threshold

_KINDS = ("fillet", "butt")


@dataclass(frozen=True)
class WorkpieceSpec:
    kind: str = "fillet"
    plate_thickness_mm: float = 10.0
    groove_depth_mm: float = 6.0
    orientation_deg: float = 0.0
    seam_half_length_mm: float = 90.0
    plate_half_width_mm: float = 50.0
    pitch_mm: float = 0.4
    gap_mm: float = 1.4
    center_offset_mm: tuple[float, float] = (0.0, 8.0)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.plate_thickness_mm <= 0:
            raise ValueError("plate thickness must be positive")
        if self.seam_half_length_mm <= 0:
            raise ValueError("seam endpoints must be distinct")
        if self.pitch_mm <= 0 or self.plate_half_width_mm <= 0:
            raise ValueError("bad sampling geometry")
        if self.groove_depth_mm < 0 or self.gap_mm <= 0:
            raise ValueError("bad groove geometry")


@dataclass(frozen=True)
class TrueSeam:
    """Ground-truth joint: the weld path in image and world coordinates.

    mm endpoints follow the valley the torch must reach (fillet: base
    plane at the step; butt: gap floor) and the px endpoints are their
    projections.  top_mm carries the top-surface 3D line the torch
    glides along.
    """
    p0_px: ImagePoint
    p1_px: ImagePoint
    p0_mm: np.ndarray
    p1_mm: np.ndarray
    top0_mm: np.ndarray
    top1_mm: np.ndarray

    @property
    def length_mm(self) -> float:
        return float(np.linalg.norm(self.p1_mm - self.p0_mm))

    @property
    def top_length_mm(self) -> float:
        return float(np.linalg.norm(self.top1_mm - self.top0_mm))


def _tilt_and_push(xw: np.ndarray, yw: np.ndarray, d: np.ndarray,
                   tilt_deg: float, standoff_mm: float) -> np.ndarray:
    # rotate about the camera x axis, then translate along z
    a = math.radians(tilt_deg)
    yc = yw * math.cos(a) - d * math.sin(a)
    zc = standoff_mm + yw * math.sin(a) + d * math.cos(a)
    return np.column_stack([xw, yc, zc])


def build_workpiece(spec: WorkpieceSpec,
                    camera: CameraIntrinsics = DEFAULT_CAMERA,
                    standoff_mm: float = DEFAULT_STANDOFF_MM,
                    tilt_deg: float = DEFAULT_TILT_DEG) -> tuple[PointCloud, TrueSeam]:
    half_a = spec.seam_half_length_mm
    half_b = spec.plate_half_width_mm
    a = np.arange(-half_a, half_a + spec.pitch_mm / 2, spec.pitch_mm)
    b = np.arange(-half_b, half_b + spec.pitch_mm / 2, spec.pitch_mm)
    aa, bb = np.meshgrid(a, b)
    aa = aa.ravel()
    bb = bb.ravel()

    # depth offsets along camera z (positive = farther from the camera)
    if spec.kind == "fillet":
        d = np.where(bb >= 0, -spec.groove_depth_mm, 0.0)
        valley_d = 0.0
    else:
        d = np.where(np.abs(bb) <= spec.gap_mm / 2, spec.groove_depth_mm, 0.0)
        valley_d = spec.groove_depth_mm

    theta = math.radians(spec.orientation_deg)
    ox, oy = spec.center_offset_mm
    ct, st = math.cos(theta), math.sin(theta)
    xw = aa * ct - bb * st + ox
    yw = aa * st + bb * ct + oy
    cloud = PointCloud(_tilt_and_push(xw, yw, d, tilt_deg, standoff_mm), camera)

    ends = []
    for ae in (-half_a, half_a):
        exw = ae * ct + ox
        eyw = ae * st + oy
        top = _tilt_and_push(np.array([exw]), np.array([eyw]),
                             np.array([0.0]), tilt_deg, standoff_mm)[0]
        valley = _tilt_and_push(np.array([exw]), np.array([eyw]),
                                np.array([valley_d]), tilt_deg, standoff_mm)[0]
        u, v = camera.project(valley[None, :])[0]
        ends.append((ImagePoint(float(u), float(v)), valley, top))
    seam = TrueSeam(p0_px=ends[0][0], p1_px=ends[1][0],
                    p0_mm=ends[0][1], p1_mm=ends[1][1],
                    top0_mm=ends[0][2], top1_mm=ends[1][2])
    return cloud, seam


@dataclass(frozen=True)
class FollowScript:
    """Torch rides the true seam at a multiple of the recommended speed."""
    speed_factor: float = 1.0
    jitter_px: float = 0.0
    start_mm: float = 10.0


@dataclass(frozen=True)
class HoldScript:
    x: float = 336.0
    y: float = 240.0


@dataclass(frozen=True)
class TraceScript:
    """Explicit per-frame arc positions, e.g. recorded pointer input."""
    points: tuple  # ((t, x, y), ...) covering every rendered frame

    def position(self, t: int) -> tuple[float, float]:
        for ft, x, y in self.points:
            if ft == t:
                return (x, y)
        raise ValueError(f"trace script has no entry for frame {t}")


@dataclass(frozen=True)
class ReflectionEvent:
    t0: int
    t1: int  # inclusive
    x: float
    y: float
    sigma_px: float


@dataclass
class Scenario:
    workpiece: WorkpieceSpec = field(default_factory=WorkpieceSpec)
    camera: CameraIntrinsics = DEFAULT_CAMERA
    standoff_mm: float = DEFAULT_STANDOFF_MM
    tilt_deg: float = DEFAULT_TILT_DEG
    frames: int = 300
    frame_rate: float = DEFAULT_FRAME_RATE
    seed: int = 42
    background: float = DEFAULT_BACKGROUND
    arc_sigma_px: float = DEFAULT_ARC_SIGMA_PX
    speed_mm_s: float = 4.0
    script: object = field(default_factory=FollowScript)
    events: tuple = ()
    occlusion_fraction: float = 0.0
    occlusion_phase_deg: float = 90.0  # sector start angle; default shades downward
    strike: tuple | None = None  # (x, y, ring_radius_px, ring_width_px)

    _built: tuple | None = field(default=None, init=False, repr=False)
    _grid: tuple | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("need at least one frame")
        if self.frame_rate <= 0 or self.arc_sigma_px <= 0 or self.speed_mm_s <= 0:
            raise ValueError("rates and widths must be positive")
        if not 0 <= self.background <= 255:
            raise ValueError("background outside intensity range")
        if not 0 <= self.occlusion_fraction < 1:
            raise ValueError("occlusion fraction outside [0, 1)")
        for ev in self.events:
            if not (0 <= ev.t0 <= ev.t1 < self.frames):
                raise ValueError(f"event span {ev.t0}..{ev.t1} outside stream")
            if not (0 <= ev.x < self.camera.width and 0 <= ev.y < self.camera.height):
                raise ValueError("event position outside frame")
            if ev.sigma_px <= 0:
                raise ValueError("event sigma must be positive")
        if self.strike is not None:
            sx, sy, r0, w = self.strike
            if r0 <= 0 or w <= 0:
                raise ValueError("strike ring needs positive radius and width")
            if not (0 <= sx < self.camera.width and 0 <= sy < self.camera.height):
                raise ValueError("strike position outside frame")

    def build(self) -> tuple[PointCloud, TrueSeam]:
        if self._built is None:
            self._built = build_workpiece(self.workpiece, self.camera,
                                          self.standoff_mm, self.tilt_deg)
        return self._built

    def _mesh(self):
        if self._grid is None:
            yy, xx = np.mgrid[0:self.camera.height, 0:self.camera.width]
            self._grid = (xx.astype(np.float64), yy.astype(np.float64))
        return self._grid

    def arc_center(self, t: int) -> tuple[float, float]:
        """True (float) arc position for frame t, jitter included."""
        if not 0 <= t < self.frames:
            raise ValueError(f"frame {t} outside stream")
        s = self.script
        if isinstance(s, HoldScript):
            return (s.x, s.y)
        if isinstance(s, TraceScript):
            return s.position(t)
        if isinstance(s, FollowScript):
            _, seam = self.build()
            span = seam.top_length_mm
            dist = s.start_mm + self.speed_mm_s * s.speed_factor * t / self.frame_rate
            frac = min(max(dist / span, 0.0), 1.0)
            p = seam.top0_mm + frac * (seam.top1_mm - seam.top0_mm)
            u, v = self.camera.project(p[None, :])[0]
            if s.jitter_px > 0:
                rng = np.random.default_rng([self.seed, t, 0])
                du, dv = rng.normal(0.0, s.jitter_px, 2)
                return (u + du, v + dv)
            return (u, v)
        raise TypeError(f"unknown script {type(s).__name__}")


def render_hdr_frame(scenario: Scenario, t: int) -> GrayFrame:
    """Background + radial arc glare + transient blobs, clipped and noised."""
    acx, acy = scenario.arc_center(t)
    xx, yy = scenario._mesh()
    img = np.full(xx.shape, float(scenario.background))
    sig2 = 2.0 * scenario.arc_sigma_px ** 2
    img += 255.0 * np.exp(-((xx - acx) ** 2 + (yy - acy) ** 2) / sig2)
    for ev in scenario.events:
        if ev.t0 <= t <= ev.t1:
            es2 = 2.0 * ev.sigma_px ** 2
            img += 255.0 * np.exp(-((xx - ev.x) ** 2 + (yy - ev.y) ** 2) / es2)
    if scenario.strike is not None:
        sx, sy, r0, w = scenario.strike
        r = np.hypot(xx - sx, yy - sy)
        img += 255.0 * np.exp(-((r - r0) ** 2) / (2.0 * w ** 2))
    np.clip(img, 0.0, 255.0, out=img)
    noise = np.random.default_rng([scenario.seed, t, 1]).uniform(0.0, NOISE_SPAN, xx.shape)
    img = np.clip(img + noise, 0.0, 255.0)
    if scenario.occlusion_fraction > 0:
        ang = np.arctan2(yy - acy, xx - acx)
        start = math.radians(scenario.occlusion_phase_deg)
        width = 2.0 * math.pi * scenario.occlusion_fraction
        img[np.mod(ang - start, 2.0 * math.pi) < width] = 0.0
    return GrayFrame(img)


@dataclass(frozen=True)
class GroundTruthLog:
    centers: np.ndarray  # (frames, 2) float px
    seam: TrueSeam
    events: tuple
    occlusion_fraction: float

    def __post_init__(self):
        if self.centers.ndim != 2 or self.centers.shape[1] != 2:
            raise ValueError("centers must be (n, 2)")


def run_scenario(scenario: Scenario) -> tuple[list[GrayFrame], GroundTruthLog]:
    _, seam = scenario.build()
    frames = []
    centers = np.empty((scenario.frames, 2))
    for t in range(scenario.frames):
        centers[t] = scenario.arc_center(t)
        frames.append(render_hdr_frame(scenario, t))
    truth = GroundTruthLog(centers=centers, seam=seam, events=scenario.events,
                           occlusion_fraction=scenario.occlusion_fraction)
    return frames, truth


# --- scenario file grammar -------------------------------------------------
#
# One directive per line, key followed by whitespace-separated values;
# '#' starts a comment.  Unknown keys are rejected so typos fail loudly.

def _fmt(x: float) -> str:
    return f"{x:g}"


def scenario_to_text(sc: Scenario) -> str:
    w = sc.workpiece
    lines = [
        f"kind {w.kind}",
        f"thickness_mm {_fmt(w.plate_thickness_mm)}",
        f"groove_depth_mm {_fmt(w.groove_depth_mm)}",
        f"orientation_deg {_fmt(w.orientation_deg)}",
        f"seam_half_length_mm {_fmt(w.seam_half_length_mm)}",
        f"plate_half_width_mm {_fmt(w.plate_half_width_mm)}",
        f"pitch_mm {_fmt(w.pitch_mm)}",
        f"gap_mm {_fmt(w.gap_mm)}",
        f"center_offset_mm {_fmt(w.center_offset_mm[0])} {_fmt(w.center_offset_mm[1])}",
        f"camera {_fmt(sc.camera.fx)} {_fmt(sc.camera.fy)} {_fmt(sc.camera.cx)}"
        f" {_fmt(sc.camera.cy)} {sc.camera.width} {sc.camera.height}",
        f"standoff_mm {_fmt(sc.standoff_mm)}",
        f"tilt_deg {_fmt(sc.tilt_deg)}",
        f"frames {sc.frames}",
        f"frame_rate {_fmt(sc.frame_rate)}",
        f"seed {sc.seed}",
        f"background {_fmt(sc.background)}",
        f"arc_sigma_px {_fmt(sc.arc_sigma_px)}",
        f"speed_mm_s {_fmt(sc.speed_mm_s)}",
    ]
    s = sc.script
    if isinstance(s, FollowScript):
        lines.append(f"script follow {_fmt(s.speed_factor)} {_fmt(s.jitter_px)} {_fmt(s.start_mm)}")
    elif isinstance(s, HoldScript):
        lines.append(f"script hold {_fmt(s.x)} {_fmt(s.y)}")
    elif isinstance(s, TraceScript):
        lines.append("script trace")
        for ft, x, y in s.points:
            lines.append(f"trace {ft} {_fmt(x)} {_fmt(y)}")
    else:
        raise TypeError(f"unknown script {type(s).__name__}")
    if sc.occlusion_fraction > 0:
        lines.append(f"occlusion {_fmt(sc.occlusion_fraction)} {_fmt(sc.occlusion_phase_deg)}")
    for ev in sc.events:
        lines.append(f"event {ev.t0} {ev.t1} {_fmt(ev.x)} {_fmt(ev.y)} {_fmt(ev.sigma_px)}")
    if sc.strike is not None:
        sx, sy, r0, rw = sc.strike
        lines.append(f"strike {_fmt(sx)} {_fmt(sy)} {_fmt(r0)} {_fmt(rw)}")
    return "\n".join(lines) + "\n"


def parse_scenario(text: str) -> Scenario:
    wp: dict = {}
    sc: dict = {}
    script = None
    events: list[ReflectionEvent] = []
    trace_rows: list[tuple[int, float, float]] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *vals = line.split()
        if key == "kind":
            wp["kind"] = vals[0]
        elif key == "thickness_mm":
            wp["plate_thickness_mm"] = float(vals[0])
        elif key == "groove_depth_mm":
            wp["groove_depth_mm"] = float(vals[0])
        elif key == "orientation_deg":
            wp["orientation_deg"] = float(vals[0])
        elif key == "seam_half_length_mm":
            wp["seam_half_length_mm"] = float(vals[0])
        elif key == "plate_half_width_mm":
            wp["plate_half_width_mm"] = float(vals[0])
        elif key == "pitch_mm":
            wp["pitch_mm"] = float(vals[0])
        elif key == "gap_mm":
            wp["gap_mm"] = float(vals[0])
        elif key == "center_offset_mm":
            wp["center_offset_mm"] = (float(vals[0]), float(vals[1]))
        elif key == "camera":
            sc["camera"] = CameraIntrinsics(fx=float(vals[0]), fy=float(vals[1]),
                                            cx=float(vals[2]), cy=float(vals[3]),
                                            width=int(vals[4]), height=int(vals[5]))
        elif key == "standoff_mm":
            sc["standoff_mm"] = float(vals[0])
        elif key == "tilt_deg":
            sc["tilt_deg"] = float(vals[0])
        elif key == "frames":
            sc["frames"] = int(vals[0])
        elif key == "frame_rate":
            sc["frame_rate"] = float(vals[0])
        elif key == "seed":
            sc["seed"] = int(vals[0])
        elif key == "background":
            sc["background"] = float(vals[0])
        elif key == "arc_sigma_px":
            sc["arc_sigma_px"] = float(vals[0])
        elif key == "speed_mm_s":
            sc["speed_mm_s"] = float(vals[0])
        elif key == "script":
            if vals[0] == "follow":
                script = FollowScript(speed_factor=float(vals[1]),
                                      jitter_px=float(vals[2]) if len(vals) > 2 else 0.0,
                                      start_mm=float(vals[3]) if len(vals) > 3 else 10.0)
            elif vals[0] == "hold":
                script = HoldScript(x=float(vals[1]), y=float(vals[2]))
            elif vals[0] == "trace":
                script = "trace"
            else:
                raise ValueError(f"unknown script kind {vals[0]!r}")
        elif key == "trace":
            trace_rows.append((int(vals[0]), float(vals[1]), float(vals[2])))
        elif key == "occlusion":
            sc["occlusion_fraction"] = float(vals[0])
            if len(vals) > 1:
                sc["occlusion_phase_deg"] = float(vals[1])
        elif key == "event":
            events.append(ReflectionEvent(t0=int(vals[0]), t1=int(vals[1]),
                                          x=float(vals[2]), y=float(vals[3]),
                                          sigma_px=float(vals[4])))
        elif key == "strike":
            sc["strike"] = (float(vals[0]), float(vals[1]),
                            float(vals[2]), float(vals[3]))
        else:
            raise ValueError(f"unknown scenario directive {key!r}")
    if script == "trace":
        if not trace_rows:
            raise ValueError("trace script without trace rows")
        script = TraceScript(points=tuple(trace_rows))
    elif trace_rows:
        raise ValueError("trace rows without a trace script")
    if script is None:
        script = FollowScript()
    return Scenario(workpiece=WorkpieceSpec(**wp), script=script,
                    events=tuple(events), **sc)


# --- canned scenarios ------------------------------------------------------

# three reflection sites, all at tile centers >= 120 px from the held arc
_REFLECTION_SPOTS = ((80.0, 112.0), (560.0, 368.0), (112.0, 400.0))


def preset_scenario(name: str) -> Scenario:
    base = Scenario()
    if name == "perfect":
        return base
    if name == "lagging":
        return replace(base, script=FollowScript(speed_factor=0.6))
    if name == "leading":
        return replace(base, script=FollowScript(speed_factor=1.5))
    if name == "jitter":
        return replace(base, script=FollowScript(jitter_px=3.0))
    if name == "occlusion":
        return replace(base, occlusion_fraction=0.30)
    if name == "strike":
        return replace(base, arc_sigma_px=14.0, occlusion_fraction=0.30,
                       strike=(140.0, 200.0, 4.6, 4.5))
    if name == "sheet_metal":
        return replace(base, workpiece=replace(base.workpiece, groove_depth_mm=2.0))
    if name == "reflection":
        events = []
        k = 0
        t0 = 0
        while t0 + 5 < 300:  # 6 on, 5 off
            x, y = _REFLECTION_SPOTS[k % len(_REFLECTION_SPOTS)]
            events.append(ReflectionEvent(t0=t0, t1=t0 + 5, x=x, y=y, sigma_px=20.0))
            k += 1
            t0 += 11
        return replace(base, script=HoldScript(x=336.0, y=240.0),
                       events=tuple(events))
    if name == "reflection_probe":
        ev = ReflectionEvent(t0=40, t1=41, x=80.0, y=112.0, sigma_px=20.0)
        return replace(base, frames=60, script=HoldScript(x=336.0, y=240.0),
                       events=(ev,))
    raise ValueError(f"unknown preset {name!r}")


PRESET_NAMES = ("perfect", "lagging", "leading", "jitter", "occlusion",
                "strike", "sheet_metal", "reflection", "reflection_probe")


def export_frames(scenario: Scenario, out_dir) -> int:
    """Dump frames as binary PGMs plus truth.csv; returns frame count."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    frames, truth = run_scenario(scenario)
    for t, frame in enumerate(frames):
        header = f"P5\n{frame.width} {frame.height}\n255\n".encode()
        with open(os.path.join(out_dir, f"frame_{t:05d}.pgm"), "wb") as fh:
            fh.write(header + frame.pixels.tobytes())
    with open(os.path.join(out_dir, "truth.csv"), "w") as fh:
        fh.write("frame,cx,cy\n")
        for t in range(scenario.frames):
            fh.write(f"{t},{truth.centers[t, 0]:.6g},{truth.centers[t, 1]:.6g}\n")
    return len(frames)
