import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weldtrainer.core import ImagePoint
from weldtrainer.errors import DegenerateTarget, InsufficientMotion
from weldtrainer.guidance import (DIRECTION_WINDOW, CueColor, Direction,
                                  TargetSchedule, TrialReport, average_error,
                                  cue, estimate_direction, oriented_path,
                                  project_arc_length, score, target_point)


def _drift(dx, dy, n=DIRECTION_WINDOW, x0=100.0, y0=100.0):
    return [(x0 + dx * i, y0 + dy * i) for i in range(n)]


# --- direction estimation -----------------------------------------------------

def test_direction_cardinal_axes():
    assert estimate_direction(_drift(2, 0)).direction is Direction.PLUS_X
    assert estimate_direction(_drift(-2, 0)).direction is Direction.MINUS_X
    assert estimate_direction(_drift(0, 2)).direction is Direction.PLUS_Y
    assert estimate_direction(_drift(0, -2)).direction is Direction.MINUS_Y


def test_direction_tie_goes_to_x():
    est = estimate_direction(_drift(1, 1))
    assert est.direction is Direction.PLUS_X


def test_direction_start_is_median_of_first_five():
    centers = _drift(3, 0)
    centers[2] = (900.0, 900.0)  # one wild detection early on
    est = estimate_direction(centers)
    # median of {100, 103, 900, 109, 112} ignores the outlier
    assert est.start.x == pytest.approx(109.0)
    assert est.start.y == pytest.approx(100.0)


def test_direction_window_size_enforced():
    with pytest.raises(ValueError):
        estimate_direction(_drift(2, 0, n=19))
    with pytest.raises(ValueError):
        estimate_direction(_drift(2, 0, n=21))


def test_insufficient_motion():
    with pytest.raises(InsufficientMotion):
        estimate_direction(_drift(0.1, 0.0))


def test_direction_unit_vectors():
    assert Direction.PLUS_X.unit.tolist() == [1.0, 0.0]
    assert Direction.MINUS_Y.unit.tolist() == [0.0, -1.0]
    assert Direction.MINUS_X.axis == 0 and Direction.MINUS_X.sign == -1.0


# --- schedule -------------------------------------------------------------------

def _straight_schedule(**kw):
    # 2D x from 10 to 110 px; 3D x from 0 to 50 mm at z=0
    p2 = np.column_stack((np.linspace(10.0, 110.0, 11), np.full(11, 40.0)))
    p3 = np.column_stack((np.linspace(0.0, 50.0, 11), np.zeros(11), np.zeros(11)))
    defaults = dict(points_2d=p2, points_3d=p3, speed_mm_s=5.0,
                    start_time=0, frame_rate=10.0)
    defaults.update(kw)
    return TargetSchedule(**defaults)


def test_schedule_length_and_interpolation():
    sch = _straight_schedule()
    assert sch.length_mm == pytest.approx(50.0)
    # 5 mm/s at 10 fps = 0.5 mm per frame = 1 px per frame here
    q = target_point(sch, 7)
    assert q.x == pytest.approx(10.0 + 7.0)
    assert q.y == pytest.approx(40.0)


def test_schedule_clamps_at_far_end():
    sch = _straight_schedule()
    q = target_point(sch, 10000)
    assert q.x == pytest.approx(110.0)


def test_schedule_start_offset():
    sch = _straight_schedule(start_offset_mm=25.0)
    q = target_point(sch, 0)
    assert q.x == pytest.approx(60.0)  # halfway along


def test_schedule_rejects_time_before_start():
    sch = _straight_schedule(start_time=50)
    with pytest.raises(ValueError):
        sch.arc_length_at(49)


def test_schedule_validation():
    with pytest.raises(ValueError):
        _straight_schedule(speed_mm_s=0.0)
    with pytest.raises(ValueError):
        _straight_schedule(frame_rate=-1.0)
    with pytest.raises(ValueError):
        TargetSchedule(points_2d=np.zeros((1, 2)), points_3d=np.zeros((1, 3)),
                       speed_mm_s=1.0, start_time=0, frame_rate=10.0)


def test_schedule_nonuniform_segments():
    # kinked 3D path: first leg 30 mm, second 40 mm; 2D marks the kink
    p3 = np.array([[0.0, 0, 0], [30.0, 0, 0], [30.0, 40.0, 0]])
    p2 = np.array([[0.0, 0.0], [30.0, 0.0], [30.0, 40.0]])
    sch = TargetSchedule(points_2d=p2, points_3d=p3, speed_mm_s=1.0,
                         start_time=0, frame_rate=1.0)
    q = sch.point_at_arc_length(50.0)  # 20 mm into the second leg
    assert (q.x, q.y) == (pytest.approx(30.0), pytest.approx(20.0))


# --- orientation and projection -------------------------------------------------

def test_oriented_path_reverses_against_direction():
    p2 = np.array([[0.0, 0.0], [10.0, 0.0]])
    p3 = np.array([[0.0, 0, 0], [5.0, 0, 0]])
    o2, o3 = oriented_path(p2, p3, Direction.MINUS_X)
    assert o2[0].tolist() == [10.0, 0.0]
    assert o3[0].tolist() == [5.0, 0.0, 0.0]
    same2, same3 = oriented_path(p2, p3, Direction.PLUS_X)
    assert same2[0].tolist() == [0.0, 0.0]


def test_project_arc_length_midpoint():
    p2 = np.array([[0.0, 0.0], [100.0, 0.0]])
    p3 = np.array([[0.0, 0, 0], [50.0, 0, 0]])
    s = project_arc_length(p2, p3, ImagePoint(40.0, 3.0))
    assert s == pytest.approx(20.0)


def test_project_arc_length_clamps_to_ends():
    p2 = np.array([[0.0, 0.0], [100.0, 0.0]])
    p3 = np.array([[0.0, 0, 0], [50.0, 0, 0]])
    assert project_arc_length(p2, p3, ImagePoint(-30.0, 0.0)) == 0.0
    assert project_arc_length(p2, p3, ImagePoint(400.0, 0.0)) == pytest.approx(50.0)


# --- cue -------------------------------------------------------------------------

def test_cue_green_within_tolerance():
    sig = cue(ImagePoint(100, 100), ImagePoint(105, 100), Direction.PLUS_X, 12.0)
    assert sig.color is CueColor.GREEN
    assert sig.instant_error == pytest.approx(5.0)


def test_cue_red_when_trailing():
    sig = cue(ImagePoint(100, 100), ImagePoint(60, 100), Direction.PLUS_X, 12.0)
    assert sig.color is CueColor.RED


def test_cue_blue_when_ahead():
    sig = cue(ImagePoint(100, 100), ImagePoint(140, 100), Direction.PLUS_X, 12.0)
    assert sig.color is CueColor.BLUE


def test_cue_follows_travel_axis_not_image_axis():
    # moving up the frame (MINUS_Y): smaller y is ahead
    ahead = cue(ImagePoint(100, 100), ImagePoint(100, 60), Direction.MINUS_Y, 12.0)
    behind = cue(ImagePoint(100, 100), ImagePoint(100, 140), Direction.MINUS_Y, 12.0)
    assert ahead.color is CueColor.BLUE
    assert behind.color is CueColor.RED


@given(cx=st.floats(-500, 500), cy=st.floats(-500, 500),
       tol=st.floats(0.5, 50))
def test_cue_trichotomy(cx, cy, tol):
    q = ImagePoint(0.0, 0.0)
    sig = cue(q, ImagePoint(cx, cy), Direction.PLUS_X, tol)
    err = math.hypot(cx, cy)
    if err <= tol:
        assert sig.color is CueColor.GREEN
    elif cx > 0:
        assert sig.color is CueColor.BLUE
    else:
        assert sig.color is CueColor.RED
    assert sig.instant_error == pytest.approx(err, abs=1e-9)


# --- scoring ---------------------------------------------------------------------

def test_average_error_brute_force(rng):
    traj = []
    expected = 0.0
    for _ in range(50):
        qx, qy = rng.uniform(50, 400, 2)
        cx = qx + rng.normal(0, 5)
        cy = qy + rng.normal(0, 5)
        traj.append((ImagePoint(cx, cy), ImagePoint(qx, qy)))
        expected += abs(cx - qx) / qx + abs(cy - qy) / qy
    assert average_error(traj) == pytest.approx(expected / 50, abs=1e-12)


def test_average_error_degenerate_target():
    with pytest.raises(DegenerateTarget):
        average_error([(ImagePoint(5, 5), ImagePoint(0.5, 40.0))])


def test_average_error_empty():
    with pytest.raises(ValueError):
        average_error([])


def test_score_anchors():
    assert score(0.0) == 100.0
    assert score(0.2) == pytest.approx(80.0, abs=1e-12)
    assert score(1.5) == 0.0


@given(a=st.floats(0, 2), b=st.floats(0, 2))
def test_score_monotone_nonincreasing(a, b):
    lo, hi = sorted((a, b))
    assert score(hi) <= score(lo)


def test_score_rejects_negative():
    with pytest.raises(ValueError):
        score(-0.1)


def test_trial_report_count_validation():
    traj = ((ImagePoint(1, 1), ImagePoint(2, 2)),)
    with pytest.raises(ValueError):
        TrialReport(trajectory=traj, start_point=ImagePoint(0, 0),
                    direction=Direction.PLUS_X, avg_error=0.0, score=100.0,
                    n=2)
