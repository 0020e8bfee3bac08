"""Deterministic tactile-image primitives.

Everything here is a pure function of its inputs: the structural similarity
score used by the grasp-success detector, the mean absolute pixel difference
used as a deformation measure, contact-frame detection, the
crop / downsample / concatenate preprocessing pipeline, and bright-pin
detection.  Frames are 2-D uint8 arrays (see :mod:`tacgrasp.frames`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .frames import GrayFrame, validate_frame

# Raw capture resolution and the preprocessing geometry applied to it.
CAPTURE_WIDTH = 320
CAPTURE_HEIGHT = 240
CROP_WIDTH = 160
CROP_HEIGHT = 220
NET_FRAME_WIDTH = 40
NET_FRAME_HEIGHT = 60

# Fraction of a video's peak deformation that counts as object contact.
CONTACT_FRACTION = 0.25


@dataclass(frozen=True)
class SsimParams:
    """Window size and regularization constants for :func:`ssim`.

    c1 = (k1*L)^2 and c2 = (k2*L)^2 where L is the dynamic range of the
    pixel values.
    """

    window_n: int = 7
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range_l: float = 255.0

    def __post_init__(self):
        if self.window_n < 3 or self.window_n % 2 == 0:
            raise InvalidInputError(f"window_n must be odd and >= 3, got {self.window_n}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise InvalidInputError("k1 and k2 must be positive")
        if self.dynamic_range_l <= 0:
            raise InvalidInputError("dynamic_range_l must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range_l) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range_l) ** 2


class Rect(NamedTuple):
    """Pixel rectangle: top-left corner (x, y) plus width and height."""

    x: int
    y: int
    w: int
    h: int


class PinDetection(NamedTuple):
    centroids: np.ndarray  # (n, 2) float64, (x, y) sub-pixel, sorted by (y, x)
    areas: np.ndarray  # (n,) int64 pixel counts


def _box_sums(img: np.ndarray, n: int) -> np.ndarray:
    """Sum of every fully-contained n x n window (stride 1) via integral image."""
    s = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(img, axis=0, dtype=np.float64), axis=1, out=s[1:, 1:])
    return s[n:, n:] - s[:-n, n:] - s[n:, :-n] + s[:-n, :-n]


def _window_stats(frame: GrayFrame, n: int):
    """(float image, per-window mean, per-window variance), population
    convention.  Exact in float64 for 8-bit inputs at these sizes."""
    f = frame.astype(np.float64)
    area = float(n * n)
    mu = _box_sums(f, n) / area
    var = _box_sums(f * f, n) / area - mu * mu
    return f, mu, var


def _ssim_from_stats(u_stats, v_stats, params: SsimParams) -> float:
    uf, mu_u, var_u = u_stats
    vf, mu_v, var_v = v_stats
    n = params.window_n
    cov_uv = _box_sums(uf * vf, n) / float(n * n) - mu_u * mu_v
    c1, c2 = params.c1, params.c2
    num = (2.0 * mu_u * mu_v + c1) * (2.0 * cov_uv + c2)
    den = (mu_u * mu_u + mu_v * mu_v + c1) * (var_u + var_v + c2)
    return float(np.mean(num / den))


def _check_pair(u, v, n):
    if u.shape != v.shape:
        raise InvalidInputError(f"frame dimensions differ: {u.shape} vs {v.shape}")
    if u.shape[0] < n or u.shape[1] < n:
        raise InvalidInputError(
            f"frames of shape {u.shape} are smaller than the {n}x{n} window"
        )


def ssim(u: GrayFrame, v: GrayFrame, params: SsimParams = SsimParams()) -> float:
    """Mean structural similarity between two equally-sized frames.

    The SSIM map is computed over every fully-contained window_n x window_n
    window at stride 1 (no padding) and averaged.  Window statistics use the
    population convention (divide by N^2).  The result lies in [-1, 1] and
    equals 1 exactly when u and v are identical.
    """
    u = validate_frame(u, "u")
    v = validate_frame(v, "v")
    _check_pair(u, v, params.window_n)
    n = params.window_n
    return _ssim_from_stats(_window_stats(u, n), _window_stats(v, n), params)


def ssim_sequence(frames: Sequence[GrayFrame], reference: GrayFrame,
                  params: SsimParams = SsimParams()) -> list:
    """SSIM of every frame against one reference (its stats are reused)."""
    reference = validate_frame(reference, "reference")
    n = params.window_n
    ref_stats = _window_stats(reference, n)
    out = []
    for frame in frames:
        frame = validate_frame(frame)
        _check_pair(frame, reference, n)
        out.append(_ssim_from_stats(_window_stats(frame, n), ref_stats, params))
    return out


def abs_pixel_diff(frame: GrayFrame, reference: GrayFrame) -> float:
    """Mean absolute intensity difference between two equally-sized frames.

    The per-pixel mean (not the sum) keeps the value comparable across
    resolutions.
    """
    frame = validate_frame(frame, "frame")
    reference = validate_frame(reference, "reference")
    if frame.shape != reference.shape:
        raise InvalidInputError(
            f"frame dimensions differ: {frame.shape} vs {reference.shape}"
        )
    return float(
        np.mean(np.abs(frame.astype(np.int16) - reference.astype(np.int16)))
    )


def first_crossing(series: Sequence[float], fraction: float = CONTACT_FRACTION) -> int:
    """Index of the first value >= fraction * max(series); 0 if the max is 0."""
    values = np.asarray(series, dtype=np.float64)
    if values.size == 0:
        raise InvalidInputError("empty deformation series")
    peak = float(values.max())
    if peak <= 0.0:
        return 0
    return int(np.argmax(values >= fraction * peak))


def contact_frame_index(
    video: Sequence[GrayFrame],
    reference: GrayFrame,
    fraction: float = CONTACT_FRACTION,
) -> int:
    """First frame whose deformation reaches ``fraction`` of the video peak.

    Deformation is :func:`abs_pixel_diff` against ``reference``.  A video
    with zero peak deformation returns index 0.
    """
    if len(video) == 0:
        raise InvalidInputError("video must contain at least one frame")
    diffs = [abs_pixel_diff(frame, reference) for frame in video]
    return first_crossing(diffs, fraction)


def default_crop_region(width: int, height: int) -> Rect:
    """Centered CROP_WIDTH x CROP_HEIGHT rectangle inside a width x height frame."""
    return Rect((width - CROP_WIDTH) // 2, (height - CROP_HEIGHT) // 2,
                CROP_WIDTH, CROP_HEIGHT)


def crop(frame: GrayFrame, region: Rect | None = None) -> GrayFrame:
    """Copy the pixels of ``region`` out of ``frame``.

    With ``region=None`` the centered 160 x 220 rectangle is used (the raw
    320 x 240 capture keeps its central tactile area).
    """
    frame = validate_frame(frame)
    h, w = frame.shape
    if region is None:
        region = default_crop_region(w, h)
    x, y, rw, rh = region
    if rw <= 0 or rh <= 0:
        raise InvalidInputError(f"region must have positive size, got {region}")
    if x < 0 or y < 0 or x + rw > w or y + rh > h:
        raise InvalidInputError(f"region {region} not within {w}x{h} frame")
    return frame[y : y + rh, x : x + rw].copy()


def _bin_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) row-stochastic matrix of box-overlap weights.

    Output bin i covers the source interval [i*src/dst, (i+1)*src/dst);
    each source pixel contributes the length of its overlap with the bin,
    normalized so rows sum to 1.  Exact area-average resampling for any
    (src, dst) pair, fractional bins included.
    """
    scale = src / dst
    weights = np.zeros((dst, src), dtype=np.float64)
    for i in range(dst):
        lo = i * scale
        hi = (i + 1) * scale
        j0 = int(np.floor(lo))
        j1 = int(np.ceil(hi))
        for j in range(j0, min(j1, src)):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                weights[i, j] = overlap / scale
    return weights


def downsample(frame: GrayFrame, target_w: int, target_h: int) -> GrayFrame:
    """Area-average ``frame`` down to target_w x target_h.

    Box averaging with fractional-bin weighting; output intensities are
    rounded half-up to the nearest integer in [0, 255].
    """
    frame = validate_frame(frame)
    h, w = frame.shape
    if target_w <= 0 or target_h <= 0:
        raise InvalidInputError("target dimensions must be positive")
    if target_w > w or target_h > h:
        raise InvalidInputError(
            f"target {target_w}x{target_h} exceeds source {w}x{h}"
        )
    out = downsample_float(frame, target_w, target_h)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def downsample_float(frame: GrayFrame, target_w: int, target_h: int) -> np.ndarray:
    """Unrounded area-average map backing :func:`downsample`."""
    wh = _bin_weights(frame.shape[0], target_h)
    ww = _bin_weights(frame.shape[1], target_w)
    return wh @ frame.astype(np.float64) @ ww.T


def concat_horizontal(frames: Sequence[GrayFrame]) -> GrayFrame:
    """Concatenate exactly three equally-sized frames left to right."""
    if len(frames) != 3:
        raise InvalidInputError(f"expected exactly 3 frames, got {len(frames)}")
    frames = [validate_frame(f, f"frame {i}") for i, f in enumerate(frames)]
    if not (frames[0].shape == frames[1].shape == frames[2].shape):
        raise InvalidInputError(
            f"frame dimensions differ: {[f.shape for f in frames]}"
        )
    return np.hstack(frames)


def detect_pins(
    frame: GrayFrame,
    threshold: int = 120,
    min_area: int = 4,
    max_area: int = 400,
) -> PinDetection:
    """Find bright pin blobs and their intensity-weighted centroids.

    The frame is binarized at ``threshold`` (foreground = intensity >=
    threshold), 4-connected components with area inside
    [min_area, max_area] are kept, and each component's centroid is the
    intensity-weighted mean pixel position.  Centroids are sorted by (y, x)
    so detections are deterministic.  An empty result is valid.
    """
    frame = validate_frame(frame)
    if not 0 < threshold < 255:
        raise InvalidInputError(f"threshold must be in (0, 255), got {threshold}")
    mask = frame >= threshold
    four_conn = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    labels, n = ndimage.label(mask, structure=four_conn)
    if n == 0:
        return PinDetection(np.empty((0, 2)), np.empty((0,), dtype=np.int64))

    ids = np.arange(1, n + 1)
    areas = ndimage.sum_labels(mask, labels, ids).astype(np.int64)
    keep = (areas >= min_area) & (areas <= max_area)
    if not keep.any():
        return PinDetection(np.empty((0, 2)), np.empty((0,), dtype=np.int64))
    ids = ids[keep]
    areas = areas[keep]

    weights = frame.astype(np.float64)
    mass = ndimage.sum_labels(weights, labels, ids)
    ys, xs = np.mgrid[0 : frame.shape[0], 0 : frame.shape[1]]
    cx = ndimage.sum_labels(weights * xs, labels, ids) / mass
    cy = ndimage.sum_labels(weights * ys, labels, ids) / mass

    order = np.lexsort((cx, cy))
    centroids = np.column_stack([cx[order], cy[order]])
    return PinDetection(centroids, areas[order])


def preprocess_frame(frame: GrayFrame, region: Rect | None = None) -> GrayFrame:
    """Crop and downsample one raw capture to the 40 x 60 network size."""
    return downsample(crop(frame, region), NET_FRAME_WIDTH, NET_FRAME_HEIGHT)


def preprocess_sensors(frames: Sequence[GrayFrame]) -> GrayFrame:
    """Full per-timestep pipeline: crop, downsample, concatenate 3 sensors."""
    return concat_horizontal([preprocess_frame(f) for f in frames])
