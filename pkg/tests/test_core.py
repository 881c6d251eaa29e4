import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weldtrainer.core import (CameraIntrinsics, GrayFrame, ImagePoint,
                              LineSegment, PointCloud, euclidean_distance,
                              normalize_intensity)

CAM = CameraIntrinsics(fx=950.0, fy=950.0, cx=320.0, cy=240.0,
                       width=640, height=480)


def test_image_point_unpacks():
    p = ImagePoint(3.0, 4.0)
    x, y = p
    assert (x, y) == (3.0, 4.0)
    assert p.xy.tolist() == [3.0, 4.0]


def test_gray_frame_dimensions():
    f = GrayFrame(pixels=np.zeros((480, 640), dtype=np.uint8))
    assert f.width == 640 and f.height == 480
    assert f.diagonal == pytest.approx(800.0)


def test_gray_frame_rejects_empty_and_wrong_rank():
    with pytest.raises(ValueError):
        GrayFrame(pixels=np.zeros((0, 10), dtype=np.uint8))
    with pytest.raises(ValueError):
        GrayFrame(pixels=np.zeros((4, 4, 3), dtype=np.uint8))


@given(x=st.floats(-100, 100), y=st.floats(-100, 100),
       z=st.floats(10.0, 2000.0))
def test_project_back_project_roundtrip(x, y, z):
    uv = CAM.project(np.array([[x, y, z]]))
    back = CAM.back_project(float(uv[0, 0]), float(uv[0, 1]), z)
    assert np.allclose(back, [x, y, z], atol=1e-9)


def test_project_requires_positive_depth():
    with pytest.raises(ValueError):
        CAM.project(np.array([[0.0, 0.0, 0.0]]))


def test_point_cloud_len_and_validation():
    pts = np.zeros((7, 3))
    cloud = PointCloud(points=pts, intrinsics=CAM)
    assert len(cloud) == 7
    bad = pts.copy()
    bad[0, 2] = np.nan
    with pytest.raises(ValueError):
        PointCloud(points=bad, intrinsics=CAM)


def test_line_segment_orientation_range():
    flat = LineSegment(a=ImagePoint(0, 0), b=ImagePoint(10, 0))
    assert flat.orientation == pytest.approx(0.0)
    up = LineSegment(a=ImagePoint(0, 0), b=ImagePoint(0, 10))
    assert up.orientation == pytest.approx(-90.0)
    # orientation is direction-free: swapping endpoints changes nothing
    fwd = LineSegment(a=ImagePoint(3, 1), b=ImagePoint(9, 5))
    rev = LineSegment(a=ImagePoint(9, 5), b=ImagePoint(3, 1))
    assert fwd.orientation == pytest.approx(rev.orientation)
    assert -90.0 <= fwd.orientation < 90.0
    assert fwd.length == pytest.approx(math.hypot(6, 4))


def test_euclidean_distance_mixed_types():
    assert euclidean_distance(ImagePoint(0, 0), (3.0, 4.0)) == pytest.approx(5.0)
    assert euclidean_distance((1.0, 1.0), ImagePoint(1.0, 1.0)) == 0.0


def test_normalize_intensity_range():
    px = np.array([[0, 128, 255]], dtype=np.uint8)
    out = normalize_intensity(px)
    assert out.dtype == np.float64
    assert out[0, 0] == 0.0
    assert out[0, 2] == 1.0
    assert 0.5 - 0.01 < out[0, 1] < 0.51
