"""Groove detection and seam line extraction.

Pipeline: flag depth discontinuities in the cloud, project the flagged
points to a binary image, clean it with a majority filter, find edges,
chain them into segments, keep the long mutually-parallel ones, fit the
characteristic line from endpoint clusters, and lift it back to 3D.

Depth rule for the lift: each line sample takes the deepest (largest z)
cloud point projecting within a small pixel radius.  The nearest-point
depth would oscillate between the two groove shoulders at a step joint,
which is exactly where the seam runs; the deepest point is the valley the
torch must reach and is stable on both step and gap joints.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .core import CameraIntrinsics, GrayFrame, ImagePoint, LineSegment, PointCloud
from .errors import (AmbiguousSeam, DepthHole, NoCandidateLines, NoGrooveFound)
from .tracking import extract_contours

DEFAULT_DEPTH_SLOPE = 3.0  # mm of depth drop per mm of lateral distance
DEFAULT_KNN = 80  # ~2 mm lateral reach on the nominal 0.4 mm grid
DEFAULT_MIN_GROOVE_POINTS = 50
DEFAULT_KERNEL_SIZE = 3
DEFAULT_CANNY_LOW = 50.0
DEFAULT_CANNY_HIGH = 150.0
DEFAULT_CANNY_SIGMA = 1.4
DEFAULT_MIN_LENGTH_FRAC = 0.25  # of the image diagonal
DEFAULT_CLEARANCE_DEG = 10.0
DEFAULT_LIFT_STRIDE_PX = 2.0
DEFAULT_LIFT_RADIUS_PX = 3.0
DEFAULT_MAX_HOLE_FRAC = 0.2


@dataclass(frozen=True)
class SeamConfig:
    depth_slope: float = DEFAULT_DEPTH_SLOPE
    knn: int = DEFAULT_KNN
    min_groove_points: int = DEFAULT_MIN_GROOVE_POINTS
    kernel_size: int = DEFAULT_KERNEL_SIZE
    canny_low: float = DEFAULT_CANNY_LOW
    canny_high: float = DEFAULT_CANNY_HIGH
    canny_sigma: float = DEFAULT_CANNY_SIGMA
    min_length_frac: float = DEFAULT_MIN_LENGTH_FRAC
    clearance_deg: float = DEFAULT_CLEARANCE_DEG
    lift_stride_px: float = DEFAULT_LIFT_STRIDE_PX
    lift_radius_px: float = DEFAULT_LIFT_RADIUS_PX
    max_hole_frac: float = DEFAULT_MAX_HOLE_FRAC

    def __post_init__(self):
        if self.depth_slope <= 0 or self.knn < 1:
            raise ValueError("bad groove detection parameters")
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError("kernel size must be odd and >= 3")
        if not 0 <= self.canny_low < self.canny_high <= 255:
            raise ValueError("need 0 <= low < high <= 255")
        if self.clearance_deg <= 0:
            raise ValueError("clearance must be positive")


@dataclass(frozen=True)
class GrooveSegment:
    """Cloud points flagged as groove candidates, with their source rows."""
    points: np.ndarray  # (n, 3) mm
    indices: np.ndarray  # rows into the source cloud


@dataclass(frozen=True)
class SeamLine:
    """Characteristic 2D line plus the evidence that produced it."""
    a: ImagePoint
    b: ImagePoint
    inliers: tuple
    mean_orientation: float
    clearance_deg: float


@dataclass(frozen=True)
class SeamPath:
    points_3d: np.ndarray  # ordered (n, 3) mm
    points_2d: np.ndarray  # matching (n, 2) px
    length_mm: float

    def __post_init__(self):
        if len(self.points_3d) != len(self.points_2d) or len(self.points_3d) < 2:
            raise ValueError("path needs matched 2D/3D samples")


@dataclass(frozen=True)
class SeamReport:
    path: SeamPath
    line: SeamLine
    dropped_points: int
    stage_timings: dict


def segment_groove(cloud: PointCloud, slope_threshold: float = DEFAULT_DEPTH_SLOPE,
                   knn: int = DEFAULT_KNN,
                   min_points: int = DEFAULT_MIN_GROOVE_POINTS) -> GrooveSegment:
    """Flag floor-side points whose lateral neighborhood spans a depth jump.

    The feature is a one-sided depth slope: depth drop toward the point,
    divided by lateral distance, maximized over the k nearest neighbors.
    Only the deep side of the jump is kept, so the flagged band hugs the
    weld path instead of straddling the whole jump; the raised shoulder
    never flags.  Normalizing by distance keeps the test local where the
    neighborhood stretches out, e.g. at the cloud boundary.
    """
    pts = cloud.points
    lateral = pts[:, :2]
    k = min(knn + 1, len(pts))  # +1: the query point is its own nearest hit
    tree = cKDTree(lateral)
    dist, idx = tree.query(lateral, k=k)
    if k == 1:
        raise NoGrooveFound("single-point cloud has no neighborhoods")
    dist = dist[:, 1:]  # drop self-matches
    idx = idx[:, 1:]
    drop = pts[:, 2][:, None] - pts[idx, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(dist > 0, drop / dist, 0.0)
    flagged = slope.max(axis=1) > slope_threshold
    count = int(flagged.sum())
    if count < min_points:
        raise NoGrooveFound(
            f"{count} discontinuity points below the {min_points} floor")
    which = np.nonzero(flagged)[0]
    return GrooveSegment(points=pts[which], indices=which)


def project_to_image(groove: GrooveSegment, camera: CameraIntrinsics) -> tuple[GrayFrame, int]:
    """Pinhole-project flagged points to a binary frame; count the spill."""
    if camera.fx <= 0 or camera.fy <= 0:
        raise ValueError("focal lengths must be positive")
    img = np.zeros((camera.height, camera.width), dtype=np.uint8)
    if len(groove.points) == 0:
        return GrayFrame(img), 0
    uv = np.rint(camera.project(groove.points)).astype(int)
    inside = ((uv[:, 0] >= 0) & (uv[:, 0] < camera.width)
              & (uv[:, 1] >= 0) & (uv[:, 1] < camera.height))
    img[uv[inside, 1], uv[inside, 0]] = 255
    return GrayFrame(img), int((~inside).sum())


def denoise(frame: GrayFrame, kernel_size: int = DEFAULT_KERNEL_SIZE) -> GrayFrame:
    """Majority vote over the kernel window; set pixels may only be cleared."""
    if kernel_size < 3 or kernel_size % 2 == 0:
        raise ValueError("kernel size must be odd and >= 3")
    binary = (frame.pixels > 0).astype(np.int32)
    counts = ndimage.convolve(binary, np.ones((kernel_size, kernel_size), dtype=np.int32),
                              mode="constant", cval=0)
    need = -(-(kernel_size * kernel_size) // 2)  # ceil(k^2 / 2)
    keep = binary.astype(bool) & (counts >= need)
    return GrayFrame(np.where(keep, 255, 0).astype(np.uint8), timestamp=frame.timestamp)


def detect_edges(frame: GrayFrame, low: float = DEFAULT_CANNY_LOW,
                 high: float = DEFAULT_CANNY_HIGH,
                 sigma: float = DEFAULT_CANNY_SIGMA) -> GrayFrame:
    """Gradient -> non-max suppression -> hysteresis, binary output.

    Plateau ties break asymmetrically (strict on one side, inclusive on
    the other) so a symmetric step yields a single-pixel line instead of
    twins or nothing.
    """
    if not 0 <= low < high <= 255:
        raise ValueError("need 0 <= low < high <= 255")
    img = ndimage.gaussian_filter(frame.pixels.astype(np.float64), sigma)
    gx = ndimage.sobel(img, axis=1)
    gy = ndimage.sobel(img, axis=0)
    mag = np.hypot(gx, gy)
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0

    def shifted(dr: int, dc: int) -> np.ndarray:
        out = np.zeros_like(mag)
        src = mag[max(dr, 0) or None:mag.shape[0] + min(dr, 0),
                  max(dc, 0) or None:mag.shape[1] + min(dc, 0)]
        out[max(-dr, 0) or None:mag.shape[0] + min(-dr, 0),
            max(-dc, 0) or None:mag.shape[1] + min(-dc, 0)] = src
        return out

    # gradient direction bins -> the two neighbors along the gradient
    bins = [
        ((ang < 22.5) | (ang >= 157.5), (0, 1), (0, -1)),
        ((ang >= 22.5) & (ang < 67.5), (1, 1), (-1, -1)),
        ((ang >= 67.5) & (ang < 112.5), (1, 0), (-1, 0)),
        ((ang >= 112.5) & (ang < 157.5), (1, -1), (-1, 1)),
    ]
    keep = np.zeros_like(mag, dtype=bool)
    for sel, pos, neg in bins:
        keep |= sel & (mag >= shifted(*pos)) & (mag > shifted(*neg))
    keep &= mag > 0

    weak = keep & (mag >= low)
    strong = keep & (mag >= high)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return GrayFrame(np.zeros_like(frame.pixels), timestamp=frame.timestamp)
    good = np.zeros(n + 1, dtype=bool)
    good[np.unique(labels[strong])] = True
    good[0] = False
    edges = good[labels]
    return GrayFrame(np.where(edges, 255, 0).astype(np.uint8), timestamp=frame.timestamp)


def _build_chains(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """One chain per 8-connected component: its outer boundary circuit.

    A pixel-to-pixel walk is ambiguous on rasterized shallow diagonals
    (redundant tread pixels offer several continuations and a wrong pick
    shatters a long edge into fragments), while the boundary circuit of
    the component is unique.  Thin open curves trace out and back, which
    yields two overlapping collinear segments downstream; rings trace one
    full period.
    """
    return [[(int(y), int(x)) for x, y in ct.points]
            for ct in extract_contours(mask)]


def _douglas_peucker(points: np.ndarray, epsilon: float) -> list[int]:
    if len(points) < 3:
        return list(range(len(points)))
    a = points[0]
    b = points[-1]
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0:
        dists = np.linalg.norm(points - a, axis=1)
    else:
        t = (points - a) @ ab / denom
        proj = a + t[:, None] * ab
        dists = np.linalg.norm(points - proj, axis=1)
    i = int(np.argmax(dists))
    if dists[i] <= epsilon:
        return [0, len(points) - 1]
    left = _douglas_peucker(points[:i + 1], epsilon)
    right = _douglas_peucker(points[i:], epsilon)
    return left[:-1] + [j + i for j in right]


_SEED_PX = 40.0  # pieces shorter than this may be tip caps, not edge material
_GROW_BAND_PX = 4.0  # vertex band around a seed's chord during growth
_GROW_SKIP = 3  # in-band vertices tolerated between extensions (tip caps poke)
_DUP_PX = 1.0  # retraced twin runs coincide; distinct rims sit further apart


def _grow_runs(verts: np.ndarray, closed: bool) -> list[tuple[int, int]]:
    """Grow each long polyline piece into a maximal straight run.

    A run absorbs neighboring vertices in both directions while they stay
    inside a fixed band around the seed piece's own chord and extend the
    run's span along it.  The extension test is what rejects a square end
    cap (no along-chord progress) yet accepts the oblique nub a staggered
    band tip sheds, and judging against the seed chord instead of a
    running chord keeps absorbed junk from steering the line.  A cap
    vertex may poke slightly forward before the far tip corner, so a few
    non-extending vertices are stepped over as long as they stay in band.
    Runs from fragments of the same retraced edge converge, so coincident
    runs are deduplicated.  Leftover short pieces are emitted as they
    are; the length filter downstream is what actually discards them.
    """
    m = len(verts) - 1 if closed else len(verts)
    if m < 2:
        return [(0, len(verts) - 1)] if len(verts) > 1 else []
    pieces = [(i, (i + 1) % m if closed else i + 1)
              for i in range(m if closed else m - 1)]
    plen = [float(np.linalg.norm(verts[j] - verts[i])) for i, j in pieces]

    runs: list[tuple[int, int]] = []
    for k in sorted(range(len(pieces)), key=lambda k: -plen[k]):
        if plen[k] < _SEED_PX:
            break
        i0, i1 = pieces[k]
        base = verts[i0]
        direc = (verts[i1] - base) / plen[k]

        def walk(idx: int, bound: float, sign: float) -> int:
            probe, skipped, steps = idx, 0, 0
            while steps < m and skipped <= _GROW_SKIP:
                nxt = ((probe + int(sign)) % m) if closed else probe + int(sign)
                if not closed and not 0 <= nxt < m:
                    break
                rel = verts[nxt] - base
                s = float(rel[0] * direc[0] + rel[1] * direc[1])
                if abs(rel[0] * direc[1] - rel[1] * direc[0]) > _GROW_BAND_PX:
                    break
                if sign * (s - bound) > 0:
                    idx, bound, skipped = nxt, s, 0
                else:
                    skipped += 1
                probe = nxt
                steps += 1
            return idx

        hi = walk(i1, plen[k], +1.0)
        lo = walk(i0, 0.0, -1.0)
        runs.append((lo, hi))

    out: list[tuple[int, int]] = []
    for lo, hi in runs:
        a, b = verts[lo], verts[hi]
        dup = any(
            (np.linalg.norm(a - verts[l2]) <= _DUP_PX
             and np.linalg.norm(b - verts[h2]) <= _DUP_PX)
            or (np.linalg.norm(a - verts[h2]) <= _DUP_PX
                and np.linalg.norm(b - verts[l2]) <= _DUP_PX)
            for l2, h2 in out)
        if not dup:
            out.append((lo, hi))
    out.extend(pieces[k] for k in range(len(pieces)) if plen[k] < _SEED_PX)
    return out


def extract_segments(edges: GrayFrame, epsilon: float = 1.5) -> list[LineSegment]:
    """Chain edge pixels and split each chain at corners."""
    mask = edges.pixels > 0
    segments: list[LineSegment] = []
    for chain in _build_chains(mask):
        if len(chain) < 2:
            continue
        pts = np.array([(c, r) for r, c in chain], dtype=float)  # (x, y)
        closed = (len(chain) > 8
                  and max(abs(chain[0][0] - chain[-1][0]),
                          abs(chain[0][1] - chain[-1][1])) <= 1)
        if closed:
            # rotate so the cut lands on a natural corner, not mid-edge
            centroid = pts.mean(axis=0)
            k = int(np.argmax(np.linalg.norm(pts - centroid, axis=1)))
            pts = np.vstack([pts[k:], pts[:k], pts[k:k + 1]])
        kept = _douglas_peucker(pts, epsilon)
        verts = pts[kept]
        for i, j in _grow_runs(verts, closed):
            a = ImagePoint(float(verts[i][0]), float(verts[i][1]))
            b = ImagePoint(float(verts[j][0]), float(verts[j][1]))
            if (a.x, a.y) != (b.x, b.y):
                segments.append(LineSegment(a, b))
    return segments


def _wrap_orientation(deg: float) -> float:
    return ((deg + 90.0) % 180.0) - 90.0


def circular_mean_orientation(angles_deg) -> float:
    """Mean of undirected line angles via the doubled-angle embedding.

    An arithmetic mean is meaningless for axial data: {+80, -80} should
    average to 90-ish, not 0.  Doubling maps orientation to a full circle
    where the vector mean is well defined.
    """
    ang = np.radians(np.asarray(list(angles_deg), dtype=float) * 2.0)
    s = float(np.mean(np.sin(ang)))
    c = float(np.mean(np.cos(ang)))
    if abs(s) < 1e-12 and abs(c) < 1e-12:
        raise ValueError("orientations cancel; mean undefined")
    return _wrap_orientation(np.degrees(np.arctan2(s, c)) / 2.0)


def filter_segments(segments, min_length_px: float,
                    clearance_deg: float = DEFAULT_CLEARANCE_DEG) -> list[LineSegment]:
    """Drop short segments, then slope outliers around the mean orientation."""
    long_enough = [s for s in segments if s.length >= min_length_px]
    if not long_enough:
        raise NoCandidateLines(
            f"no segment reaches {min_length_px:.1f} px (of {len(segments)} found)")
    sbar = circular_mean_orientation(s.orientation for s in long_enough)
    kept = [s for s in long_enough
            if abs(_wrap_orientation(s.orientation - sbar)) <= clearance_deg]
    if not kept:
        raise NoCandidateLines(f"all segments outside {clearance_deg} deg of {sbar:.1f} deg")
    return kept


def classify_endpoints_and_fit(inliers, width: int, height: int,
                               clearance_deg: float = DEFAULT_CLEARANCE_DEG) -> SeamLine:
    """Group endpoints by image quadrant; the two busiest define the line."""
    inliers = list(inliers)
    if not inliers:
        raise ValueError("need at least one inlier segment")
    sbar = circular_mean_orientation(s.orientation for s in inliers)
    if len(inliers) == 1:
        seg = inliers[0]
        return SeamLine(a=seg.a, b=seg.b, inliers=(seg,),
                        mean_orientation=sbar, clearance_deg=clearance_deg)

    endpoints = []
    for seg in inliers:
        endpoints.append((seg.a.x, seg.a.y))
        endpoints.append((seg.b.x, seg.b.y))
    endpoints = np.asarray(endpoints)

    # one representative per quadrant; nearest-representative == quadrant test
    cx, cy = width / 2.0, height / 2.0
    reps = np.array([(cx + sx * width / 4.0, cy + sy * height / 4.0)
                     for sy in (-1, 1) for sx in (-1, 1)])
    _, quadrant = cKDTree(reps).query(endpoints)
    counts = np.bincount(quadrant, minlength=4)
    order = np.argsort(-counts, kind="stable")
    if counts[order[1]] == counts[order[2]]:
        raise AmbiguousSeam(
            f"quadrant counts {counts.tolist()} do not single out two clusters")
    qa, qb = sorted((int(order[0]), int(order[1])))
    mean_a = endpoints[quadrant == qa].mean(axis=0)
    mean_b = endpoints[quadrant == qb].mean(axis=0)
    return SeamLine(a=ImagePoint(float(mean_a[0]), float(mean_a[1])),
                    b=ImagePoint(float(mean_b[0]), float(mean_b[1])),
                    inliers=tuple(inliers),
                    mean_orientation=sbar, clearance_deg=clearance_deg)


def lift_to_3d(line: SeamLine, cloud: PointCloud,
               stride_px: float = DEFAULT_LIFT_STRIDE_PX,
               radius_px: float = DEFAULT_LIFT_RADIUS_PX,
               max_hole_frac: float = DEFAULT_MAX_HOLE_FRAC) -> SeamPath:
    """Sample the 2D line and drop each sample onto the local valley depth.

    Depth comes from the deepest cloud point projecting within the pixel
    radius.  The plain nearest projected point is unusable here: under a
    camera tilt the shoulder rows of a gap joint interleave with the
    floor rows in image space, and nearest-point depth then jumps
    between floor and shoulder from sample to sample.
    """
    camera = cloud.intrinsics
    a = line.a.xy
    b = line.b.xy
    span = float(np.linalg.norm(b - a))
    n = max(int(span / stride_px) + 1, 2)
    ts = np.linspace(0.0, 1.0, n)
    samples = a + ts[:, None] * (b - a)

    proj = camera.project(cloud.points)
    tree = cKDTree(proj)
    hits = tree.query_ball_point(samples, r=radius_px)
    holes = sum(1 for h in hits if not h)
    if holes > max_hole_frac * n:
        raise DepthHole(f"{holes}/{n} line samples have no depth support")

    pts3 = []
    pts2 = []
    z = cloud.points[:, 2]
    for sample, h in zip(samples, hits):
        if not h:
            continue
        depth = float(z[h].max())
        pts3.append(camera.back_project(sample[0], sample[1], depth))
        pts2.append(sample)
    pts3 = np.asarray(pts3)
    pts2 = np.asarray(pts2)
    length = float(np.linalg.norm(np.diff(pts3, axis=0), axis=1).sum())
    return SeamPath(points_3d=pts3, points_2d=pts2, length_mm=length)


def localize_seam(cloud: PointCloud, config: SeamConfig = SeamConfig()) -> SeamReport:
    """Full pipeline; stage timings ride along for the session report."""
    camera = cloud.intrinsics
    timings: dict = {}

    def staged(name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        timings[name] = time.perf_counter() - t0
        return out

    groove = staged("segment_groove", segment_groove, cloud,
                    config.depth_slope, config.knn, config.min_groove_points)
    projected, dropped = staged("project_to_image", project_to_image, groove, camera)
    cleaned = staged("denoise", denoise, projected, config.kernel_size)
    edges = staged("detect_edges", detect_edges, cleaned,
                   config.canny_low, config.canny_high, config.canny_sigma)
    segments = staged("extract_segments", extract_segments, edges)
    min_len = config.min_length_frac * projected.diagonal
    inliers = staged("filter_segments", filter_segments, segments,
                     min_len, config.clearance_deg)
    line = staged("classify_endpoints", classify_endpoints_and_fit, inliers,
                  camera.width, camera.height, config.clearance_deg)
    path = staged("lift_to_3d", lift_to_3d, line, cloud,
                  config.lift_stride_px, config.lift_radius_px, config.max_hole_frac)
    return SeamReport(path=path, line=line, dropped_points=dropped,
                      stage_timings=timings)
