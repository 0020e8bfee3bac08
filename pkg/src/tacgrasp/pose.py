"""Object localization from overhead depth images.

Segments the object proud of the tray plane, summarizes it with image
moments (centroid, best-fit-ellipse axes and orientation), and maps the
elongation to a finger-rotation angle: round objects get the 45-degree
spherical grasp, elongated ones (aspect >= 3) the 0-degree cylindrical
grasp, with linear interpolation in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, InvalidInputError
from .frames import DepthImage, validate_depth
from .tactile import Rect

# depth margin (mm) below the tray plane that counts as "object", absorbing
# sensor noise on the tray surface
TRAY_DEPTH_OFFSET_MM = 10.0

# approach height (mm) above the object top for the grasp target
GRASP_CLEARANCE_MM = 20.0

# aspect ratios at or below this are treated as rotationally degenerate
DEGENERATE_ASPECT = 1.05


@dataclass(frozen=True)
class ObjectPose:
    """Planar pose summary of a segmented object."""

    centroid: tuple  # (x, y) pixels
    z: float  # mm, minimum (closest) object depth
    theta: float  # radians in (-pi/2, pi/2], major-axis angle from image x
    major_axis: float  # pixels
    minor_axis: float  # pixels
    aspect_ratio: float  # major / minor, >= 1
    degenerate: bool = False


@dataclass(frozen=True)
class AffineCalib:
    """2-D affine map from camera pixels to robot mm: [a b; c d] + (tx, ty)."""

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def apply(self, x: float, y: float) -> tuple:
        return (self.a * x + self.b * y + self.tx,
                self.c * x + self.d * y + self.ty)

    def apply_direction(self, dx: float, dy: float) -> tuple:
        return (self.a * dx + self.b * dy, self.c * dx + self.d * dy)

    def inverse(self) -> "AffineCalib":
        det = self.det
        if abs(det) < 1e-12:
            raise InvalidInputError("calibration matrix is singular")
        ia, ib = self.d / det, -self.b / det
        ic, id_ = -self.c / det, self.a / det
        return AffineCalib(ia, ib, ic, id_,
                           -(ia * self.tx + ib * self.ty),
                           -(ic * self.tx + id_ * self.ty))


def segment_object(depth: DepthImage, tray_region: Rect | None = None) -> np.ndarray:
    """Binary mask of pixels closer than the tray plane minus the offset.

    The tray depth is the mean of all valid (nonzero) depths inside
    ``tray_region`` (defaults to the whole image); an object occupying a
    small fraction of the tray barely biases it.
    """
    depth = validate_depth(depth)
    h, w = depth.shape
    if tray_region is None:
        tray_region = Rect(0, 0, w, h)
    x, y, rw, rh = tray_region
    if x < 0 or y < 0 or rw <= 0 or rh <= 0 or x + rw > w or y + rh > h:
        raise InvalidInputError(f"tray region {tray_region} not within {w}x{h}")
    window = depth[y : y + rh, x : x + rw]
    valid = window > 0
    if not valid.any():
        raise EstimationError("no valid depth pixels in the tray region")
    tray_depth = float(window[valid].mean())
    return (depth > 0) & (depth.astype(np.float64) < tray_depth - TRAY_DEPTH_OFFSET_MM)


def pose_from_moments(mask: np.ndarray, depth: DepthImage) -> ObjectPose:
    """Centroid, orientation and ellipse axes of a segmented object.

    Raw moments give the centroid; the eigen-decomposition of the central
    second-moment matrix gives the best-fit ellipse (semi-axis = 2 sqrt of
    eigenvalue).  theta is the major-axis angle wrapped to (-pi/2, pi/2].
    z is the minimum masked depth.  Near-circular masks are flagged
    degenerate with theta forced to 0.
    """
    mask = np.asarray(mask, dtype=bool)
    depth = validate_depth(depth)
    if mask.shape != depth.shape:
        raise InvalidInputError("mask and depth image shapes differ")
    ys, xs = np.nonzero(mask)
    m00 = xs.size
    if m00 == 0:
        raise EstimationError("empty object mask")

    cx = float(xs.mean())
    cy = float(ys.mean())
    masked_depths = depth[mask]
    valid = masked_depths[masked_depths > 0]
    z = float(valid.min()) if valid.size else 0.0

    if m00 == 1:
        return ObjectPose((cx, cy), z, 0.0, 1.0, 1.0, 1.0, degenerate=True)

    dx = xs - cx
    dy = ys - cy
    mu20 = float(np.dot(dx, dx)) / m00
    mu02 = float(np.dot(dy, dy)) / m00
    mu11 = float(np.dot(dx, dy)) / m00

    theta = 0.5 * math.atan2(2.0 * mu11, mu20 - mu02)
    mean = (mu20 + mu02) / 2.0
    half = math.hypot((mu20 - mu02) / 2.0, mu11)
    lam_major = max(mean + half, 0.0)
    lam_minor = max(mean - half, 0.0)
    major = 2.0 * math.sqrt(lam_major)
    minor = 2.0 * math.sqrt(lam_minor)
    if minor <= 1e-9:
        # collinear pixels: treat thickness as one pixel
        minor = 1.0
        major = max(major, 1.0)
    aspect = max(major / minor, 1.0)

    theta = _wrap_half_pi(theta)
    degenerate = aspect <= DEGENERATE_ASPECT
    if degenerate:
        theta = 0.0
    return ObjectPose((cx, cy), z, theta, major, minor, aspect, degenerate)


def _wrap_half_pi(theta: float) -> float:
    while theta <= -math.pi / 2.0:
        theta += math.pi
    while theta > math.pi / 2.0:
        theta -= math.pi
    return theta


def select_grasp_rotation(aspect_ratio: float) -> float:
    """Finger rotation (degrees) for an object of the given elongation.

    1:1 -> 45 (spherical), 3:1 or higher -> 0 (cylindrical), linear in
    between; always clamped to [0, 45].
    """
    if aspect_ratio < 1.0:
        raise InvalidInputError(f"aspect ratio must be >= 1, got {aspect_ratio}")
    return float(np.clip(45.0 * (3.0 - aspect_ratio) / 2.0, 0.0, 45.0))


def camera_to_robot(pose: ObjectPose, calib: AffineCalib) -> tuple:
    """Grasp target (x, y, z, theta) in the robot frame.

    The centroid maps through the affine calibration; theta maps through
    its linear part (re-wrapped to (-pi/2, pi/2]); z clears the object top
    by GRASP_CLEARANCE_MM.
    """
    if abs(calib.det) < 1e-12:
        raise InvalidInputError("calibration matrix is singular")
    x, y = calib.apply(*pose.centroid)
    dx, dy = calib.apply_direction(math.cos(pose.theta), math.sin(pose.theta))
    theta = _wrap_half_pi(math.atan2(dy, dx))
    return (x, y, pose.z + GRASP_CLEARANCE_MM, theta)
