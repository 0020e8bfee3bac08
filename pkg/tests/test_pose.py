import math

import numpy as np
import pytest

from tacgrasp.errors import EstimationError, InvalidInputError
from tacgrasp.pose import (AffineCalib, camera_to_robot, pose_from_moments,
                           segment_object, select_grasp_rotation)
from tacgrasp.tactile import Rect


def flat_tray(depth_mm=1000, h=120, w=160):
    return np.full((h, w), depth_mm, dtype=np.uint16)


def tray_with_box(height_mm, x0=40, y0=30, w_px=50, h_px=20, depth_mm=1000):
    depth = flat_tray(depth_mm)
    depth[y0 : y0 + h_px, x0 : x0 + w_px] = depth_mm - height_mm
    return depth


def rect_mask(h, w, cx, cy, half_w, half_h, angle=0.0):
    ys, xs = np.mgrid[0:h, 0:w]
    xr = (xs - cx) * math.cos(angle) + (ys - cy) * math.sin(angle)
    yr = -(xs - cx) * math.sin(angle) + (ys - cy) * math.cos(angle)
    return (np.abs(xr) <= half_w) & (np.abs(yr) <= half_h)


# ---------------------------------------------------------------------------
# segmentation


def test_segment_flat_tray_empty():
    assert segment_object(flat_tray()).sum() == 0


def test_segment_box_footprint_exact():
    depth = tray_with_box(30)
    mask = segment_object(depth)
    expected = np.zeros_like(mask)
    expected[30:50, 40:90] = True
    assert np.array_equal(mask, expected)


def test_segment_below_offset_suppressed():
    # 5 mm proud is inside the 10 mm noise margin
    assert segment_object(tray_with_box(5)).sum() == 0


def test_segment_uniform_depth_shift_invariance():
    a = segment_object(tray_with_box(30, depth_mm=1000))
    b = segment_object(tray_with_box(30, depth_mm=1500))
    assert np.array_equal(a, b)


def test_segment_ignores_invalid_pixels():
    depth = tray_with_box(30)
    depth[0:5, 0:5] = 0  # invalid
    mask = segment_object(depth)
    assert not mask[0:5, 0:5].any()


def test_segment_errors():
    depth = flat_tray()
    with pytest.raises(InvalidInputError):
        segment_object(depth, Rect(0, 0, 1000, 1000))
    with pytest.raises(EstimationError):
        segment_object(np.zeros((10, 10), dtype=np.uint16))


# ---------------------------------------------------------------------------
# moments


def test_pose_axis_aligned_rectangle():
    mask = rect_mask(120, 160, 80, 60, 30, 10)
    pose = pose_from_moments(mask, flat_tray())
    assert pose.centroid[0] == pytest.approx(80, abs=0.5)
    assert pose.centroid[1] == pytest.approx(60, abs=0.5)
    assert abs(pose.theta) < math.radians(1.0)
    assert pose.aspect_ratio == pytest.approx(3.0, abs=0.1)


def test_pose_rotated_rectangle():
    angle = math.radians(30)
    mask = rect_mask(200, 200, 100, 100, 45, 15, angle)
    pose = pose_from_moments(mask, flat_tray(h=200, w=200))
    assert abs(pose.theta - angle) < math.radians(1.0)


def test_pose_rotation_equivariance():
    base = rect_mask(220, 220, 110, 110, 50, 16, 0.0)
    pose0 = pose_from_moments(base, flat_tray(h=220, w=220))
    for deg in (10, 40, 70):
        phi = math.radians(deg)
        rotated = rect_mask(220, 220, 110, 110, 50, 16, phi)
        pose = pose_from_moments(rotated, flat_tray(h=220, w=220))
        delta = (pose.theta - pose0.theta - phi + math.pi / 2) % math.pi \
            - math.pi / 2
        assert abs(delta) < math.radians(1.0)


def test_pose_translation_equivariance():
    mask = rect_mask(120, 160, 60, 50, 20, 8)
    pose_a = pose_from_moments(mask, flat_tray())
    shifted = np.roll(np.roll(mask, 7, axis=1), -5, axis=0)
    pose_b = pose_from_moments(shifted, flat_tray())
    assert pose_b.centroid[0] - pose_a.centroid[0] == pytest.approx(7.0)
    assert pose_b.centroid[1] - pose_a.centroid[1] == pytest.approx(-5.0)


def test_pose_scale_invariant_aspect():
    small = rect_mask(120, 160, 80, 60, 20, 8)
    large = rect_mask(240, 320, 160, 120, 40, 16)
    ra = pose_from_moments(small, flat_tray()).aspect_ratio
    rb = pose_from_moments(large, flat_tray(h=240, w=320)).aspect_ratio
    assert rb == pytest.approx(ra, rel=0.02)


def test_pose_disc_degenerate():
    ys, xs = np.mgrid[0:120, 0:160]
    mask = (xs - 80) ** 2 + (ys - 60) ** 2 <= 35**2
    pose = pose_from_moments(mask, flat_tray())
    assert pose.degenerate
    assert pose.theta == 0.0
    assert pose.aspect_ratio == pytest.approx(1.0, abs=0.05)


def test_pose_z_is_min_depth():
    depth = tray_with_box(30)
    depth[35, 45] = 950  # a closer point on the object
    mask = segment_object(depth)
    assert pose_from_moments(mask, depth).z == 950.0


def test_pose_empty_and_single_pixel():
    with pytest.raises(EstimationError):
        pose_from_moments(np.zeros((10, 10), dtype=bool), flat_tray(h=10, w=10))
    mask = np.zeros((10, 10), dtype=bool)
    mask[4, 7] = True
    pose = pose_from_moments(mask, flat_tray(h=10, w=10))
    assert pose.degenerate and pose.aspect_ratio == 1.0 and pose.theta == 0.0


# ---------------------------------------------------------------------------
# grasp rotation & calibration


def test_grasp_rotation_anchors():
    assert select_grasp_rotation(1.0) == 45.0
    assert select_grasp_rotation(3.0) == 0.0
    assert select_grasp_rotation(2.0) == 22.5
    assert select_grasp_rotation(10.0) == 0.0


def test_grasp_rotation_monotone_and_clamped():
    ratios = np.linspace(1.0, 5.0, 41)
    rotations = [select_grasp_rotation(r) for r in ratios]
    assert all(b <= a for a, b in zip(rotations, rotations[1:]))
    assert all(0.0 <= r <= 45.0 for r in rotations)
    with pytest.raises(InvalidInputError):
        select_grasp_rotation(0.5)


def make_pose(cx=10.0, cy=20.0, z=950.0, theta=0.3):
    from tacgrasp.pose import ObjectPose
    return ObjectPose((cx, cy), z, theta, 10.0, 5.0, 2.0)


def test_camera_to_robot_identity():
    x, y, z, theta = camera_to_robot(make_pose(), AffineCalib())
    assert (x, y) == (10.0, 20.0)
    assert z == pytest.approx(970.0)  # raised by 20 mm
    assert theta == pytest.approx(0.3)


def test_camera_to_robot_translation():
    calib = AffineCalib(tx=100.0, ty=-50.0)
    x, y, _, theta = camera_to_robot(make_pose(), calib)
    assert (x, y) == (110.0, -30.0)
    assert theta == pytest.approx(0.3)


def test_calib_roundtrip():
    calib = AffineCalib(a=0.8, b=0.2, c=-0.1, d=1.1, tx=30.0, ty=-12.0)
    inv = calib.inverse()
    for px, py in [(0, 0), (15.5, 42.0), (-3.0, 7.7)]:
        rx, ry = calib.apply(px, py)
        bx, by = inv.apply(rx, ry)
        assert abs(bx - px) < 1e-6 and abs(by - py) < 1e-6


def test_singular_calibration_rejected():
    calib = AffineCalib(a=1.0, b=2.0, c=2.0, d=4.0)
    with pytest.raises(InvalidInputError):
        calib.inverse()
    with pytest.raises(InvalidInputError):
        camera_to_robot(make_pose(), calib)
