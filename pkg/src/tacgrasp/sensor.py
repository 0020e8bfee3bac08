"""Simulated rectangular optical tactile fingertip.

Models a 40 x 20 mm sensing surface carrying a 3 x 10 grid of bright pins
imaged by an internal camera.  Contact with a geometric primitive displaces
pins radially away from the contact footprint and brightens the pins it
presses on; the result renders to a 320 x 240 grayscale frame through a
fixed 6 px/mm projection.  All randomness flows from explicit seeds so any
simulated sequence is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .frames import GrayFrame

MM_TO_PX = 6.0  # fixed projection; golden images depend on it
IMAGE_WIDTH = 320
IMAGE_HEIGHT = 240

PIN_SIGMA_PX = 2.6
PIN_PEAK = 185.0
BACKGROUND_LEVEL = 20
DEFAULT_NOISE_SIGMA = 0.4

# static lens-glare disc, positioned inside the preprocessing crop window
GLARE_CENTER_PX = (100.0, 40.0)
GLARE_RADIUS_PX = 14.0
GLARE_LEVEL = 70.0

CONTACT_SHAPES = ("sphere", "box", "cylinder", "edge")


@dataclass(frozen=True)
class PinLayout:
    """Rest geometry of the pin grid on the sensing surface (mm units)."""

    rows: int = 3
    cols: int = 10
    pitch: float = 3.0
    pin_radius: float = 0.6
    surface_w: float = 40.0
    surface_h: float = 20.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidInputError("rows and cols must be >= 1")
        if self.pitch <= 2.0 * self.pin_radius:
            raise InvalidInputError("pitch must exceed twice the pin radius")
        half_x = (self.cols - 1) * self.pitch / 2.0 + self.pin_radius
        half_y = (self.rows - 1) * self.pitch / 2.0 + self.pin_radius
        if half_x > self.surface_w / 2.0 or half_y > self.surface_h / 2.0:
            raise InvalidInputError("pin grid does not fit inside the surface")

    @property
    def n_pins(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class ContactPrimitive:
    """One rigid contact pressed into the sensor surface.

    ``dims`` is shape-specific (mm): sphere -> (radius,), box -> (w, l),
    cylinder -> (radius, length), edge -> (length,).  ``pose`` is the
    (x, y) mm offset of the contact center on the surface plus an in-plane
    rotation in radians.  ``indentation`` is the pressed depth in mm.
    """

    shape: str
    dims: tuple
    pose: tuple = (0.0, 0.0, 0.0)
    indentation: float = 0.0
    max_indentation: float = 5.0

    def __post_init__(self):
        if self.shape not in CONTACT_SHAPES:
            raise InvalidInputError(f"unknown contact shape {self.shape!r}")
        if any(d <= 0 for d in self.dims):
            raise InvalidInputError("contact dimensions must be positive")
        if self.indentation < 0:
            raise InvalidInputError("indentation must be >= 0")
        if self.indentation > self.max_indentation:
            raise InvalidInputError(
                f"indentation {self.indentation} exceeds max {self.max_indentation}"
            )

    def with_indentation(self, depth: float) -> "ContactPrimitive":
        return ContactPrimitive(self.shape, self.dims, self.pose, depth,
                                self.max_indentation)

    def footprint_sigmas(self) -> tuple:
        """(sx, sy) mm spread of the contact footprint in the contact frame."""
        floor = 1.5
        if self.shape == "sphere":
            s = max(0.8 * self.dims[0], floor)
            return s, s
        if self.shape == "cylinder":
            r, length = self.dims
            return max(0.8 * length / 2.0, floor), max(0.8 * r, floor)
        if self.shape == "box":
            w, length = self.dims
            return max(0.8 * length / 2.0, floor), max(0.8 * w / 2.0, floor)
        # edge: a ridge; the soft skin spreads its press over ~2.5 mm
        return max(0.8 * self.dims[0] / 2.0, floor), 2.5


@dataclass(frozen=True)
class DeformationField:
    """Per-pin in-plane displacement (mm) and brightness gain."""

    displacements: np.ndarray  # (n, 2)
    gains: np.ndarray  # (n,)

    def __post_init__(self):
        if self.displacements.shape[0] != self.gains.shape[0]:
            raise InvalidInputError("displacement/gain length mismatch")

    @classmethod
    def zero(cls, n_pins: int) -> "DeformationField":
        return cls(np.zeros((n_pins, 2)), np.ones(n_pins))


def rest_pin_positions(layout: PinLayout) -> np.ndarray:
    """(n, 2) mm positions of the undeformed grid, centered on the surface."""
    xs = (np.arange(layout.cols) - (layout.cols - 1) / 2.0) * layout.pitch
    ys = (np.arange(layout.rows) - (layout.rows - 1) / 2.0) * layout.pitch
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def apply_contact(
    layout: PinLayout,
    contact: ContactPrimitive,
    gain_per_mm: float = 0.65,
    brightness_gain: float | None = None,
) -> DeformationField:
    """Displace pins away from the contact footprint.

    The footprint is an anisotropic Gaussian in the contact frame with
    spreads from :meth:`ContactPrimitive.footprint_sigmas`; pins move along
    the footprint gradient (radially outward; normal to the long axis for
    boxes and edges) with magnitude gain_per_mm * depth * exp(-q/2), where
    q is the squared Mahalanobis distance to the contact center.  Pressed
    pins also brighten.  Displacement magnitudes are capped at the pin
    pitch so neighbouring pins cannot cross.
    """
    if contact.indentation > contact.max_indentation:
        raise InvalidInputError("indentation exceeds maximum")
    if brightness_gain is None:
        # an edge concentrates pressure on few pins; compensate optically
        brightness_gain = 2.2 if contact.shape == "edge" else 1.5
    pins = rest_pin_positions(layout)
    depth = contact.indentation
    if depth == 0.0:
        return DeformationField.zero(layout.n_pins)

    cx, cy, theta = contact.pose
    sx, sy = contact.footprint_sigmas()
    rel = pins - np.array([cx, cy])
    ct, st = np.cos(theta), np.sin(theta)
    xr = rel[:, 0] * ct + rel[:, 1] * st
    yr = -rel[:, 0] * st + rel[:, 1] * ct

    q = (xr / sx) ** 2 + (yr / sy) ** 2
    magnitude = gain_per_mm * depth * np.exp(-q / 2.0)

    # gradient of the footprint in the contact frame, rotated back
    gx = xr / sx**2
    gy = yr / sy**2
    norm = np.hypot(gx, gy)
    norm[norm == 0.0] = 1.0
    ux = gx / norm
    uy = gy / norm
    dx = magnitude * (ux * ct - uy * st)
    dy = magnitude * (ux * st + uy * ct)

    disp = np.column_stack([dx, dy])
    mags = np.hypot(dx, dy)
    over = mags > layout.pitch
    if over.any():
        disp[over] *= (layout.pitch / mags[over])[:, None]

    gains = 1.0 + brightness_gain * (depth / contact.max_indentation) * np.exp(-q / 2.0)
    return DeformationField(disp, gains)


def _add_blob(canvas: np.ndarray, px: float, py: float, peak: float, sigma: float):
    h, w = canvas.shape
    r = int(np.ceil(4.0 * sigma))
    x0, x1 = max(int(px) - r, 0), min(int(px) + r + 1, w)
    y0, y1 = max(int(py) - r, 0), min(int(py) + r + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    dx2 = (np.arange(x0, x1) - px) ** 2
    dy2 = (np.arange(y0, y1) - py) ** 2
    canvas[y0:y1, x0:x1] += peak * np.exp(
        -(dy2[:, None] + dx2[None, :]) / (2.0 * sigma * sigma)
    )


def render_tactile_image(
    layout: PinLayout,
    deformation: DeformationField | None = None,
    width: int = IMAGE_WIDTH,
    height: int = IMAGE_HEIGHT,
    glare: bool = False,
    noise_seed=None,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
    noise_rng: np.random.Generator | None = None,
) -> GrayFrame:
    """Render the (possibly deformed) pin grid to a grayscale frame.

    One Gaussian blob per pin on a dark background; pin mm positions map
    through the fixed 6 px/mm projection with the surface centered in the
    frame.  ``glare`` adds the static bright disc; ``noise_seed`` (if not
    None) adds seeded per-pixel Gaussian noise of ``noise_sigma``
    (``noise_rng`` can supply an already-running generator instead).
    """
    if deformation is None:
        deformation = DeformationField.zero(layout.n_pins)
    if deformation.displacements.shape[0] != layout.n_pins:
        raise InvalidInputError("deformation field does not match layout")

    canvas = np.full((height, width), float(BACKGROUND_LEVEL), dtype=np.float32)
    positions = rest_pin_positions(layout) + deformation.displacements
    cx_px, cy_px = width / 2.0, height / 2.0
    for (x_mm, y_mm), gain in zip(positions, deformation.gains):
        _add_blob(canvas, cx_px + MM_TO_PX * x_mm, cy_px + MM_TO_PX * y_mm,
                  PIN_PEAK * gain, PIN_SIGMA_PX)

    if glare:
        gx, gy = GLARE_CENTER_PX
        r = GLARE_RADIUS_PX
        span = int(np.ceil(r)) + 2
        x0, x1 = max(int(gx) - span, 0), min(int(gx) + span + 1, width)
        y0, y1 = max(int(gy) - span, 0), min(int(gy) + span + 1, height)
        dx = np.arange(x0, x1) - gx
        dy = np.arange(y0, y1) - gy
        d = np.sqrt(dy[:, None] ** 2 + dx[None, :] ** 2)
        canvas[y0:y1, x0:x1] += GLARE_LEVEL * np.clip((r - d) / 2.0, 0.0, 1.0)

    if noise_rng is None and noise_seed is not None:
        noise_rng = np.random.default_rng(noise_seed)
    if noise_rng is not None and noise_sigma > 0.0:
        canvas += noise_sigma * noise_rng.standard_normal(canvas.shape,
                                                          dtype=np.float32)

    return np.clip(np.floor(canvas + 0.5), 0, 255).astype(np.uint8)


def linear_ramp(n_frames: int, target: float) -> np.ndarray:
    """Indentation ramp rising linearly from 0 to ``target`` over n frames."""
    if n_frames < 1:
        raise InvalidInputError("n_frames must be >= 1")
    if n_frames == 1:
        return np.array([target])
    return target * np.arange(n_frames) / (n_frames - 1)


def grasp_profile(
    n_frames: int,
    target: float,
    ramp_end_frac: float = 0.3,
    release_frame: int | None = None,
    release_target: float = 0.0,
    release_len: int = 8,
) -> np.ndarray:
    """Indentation timeline of one grasp: close, hold, optionally let go.

    Rises linearly to ``target`` by ``ramp_end_frac`` of the video, holds,
    and (when ``release_frame`` is given) decays linearly to
    ``release_target`` over ``release_len`` frames -- the tactile signature
    of an object slipping out after lift.
    """
    if n_frames < 1:
        raise InvalidInputError("n_frames must be >= 1")
    ramp_end = max(int(round(ramp_end_frac * n_frames)), 1)
    profile = np.full(n_frames, float(target))
    ramp = np.minimum(np.arange(n_frames) / ramp_end, 1.0)
    profile *= ramp
    if release_frame is not None and release_frame < n_frames:
        tail = np.arange(n_frames - release_frame)
        fade = np.clip(1.0 - tail / max(release_len, 1), 0.0, 1.0)
        level = profile[release_frame]
        profile[release_frame:] = release_target + (level - release_target) * fade
    return profile


def simulate_grasp_video(
    layout: PinLayout,
    contact: ContactPrimitive,
    indentations: np.ndarray,
    seed: int = 0,
    glare: bool = False,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
    jitter: float = 0.01,
) -> list:
    """Render one tactile video frame-by-frame along an indentation profile.

    Frame i uses depth ``indentations[i]`` scaled by small seeded jitter;
    per-frame pixel noise is drawn from the same generator, so the whole
    sequence is a deterministic function of ``seed``.
    """
    indentations = np.asarray(indentations, dtype=np.float64)
    if indentations.size < 1:
        raise InvalidInputError("indentation profile must have >= 1 frame")
    rng = np.random.default_rng(seed)
    factors = 1.0 + rng.normal(0.0, jitter, indentations.size) if jitter > 0 else \
        np.ones(indentations.size)
    frames = []
    for base, factor in zip(indentations, factors):
        depth = float(np.clip(base * factor, 0.0, contact.max_indentation))
        fld = apply_contact(layout, contact.with_indentation(depth))
        frames.append(
            render_tactile_image(layout, fld, glare=glare,
                                 noise_rng=rng if noise_sigma > 0 else None,
                                 noise_sigma=noise_sigma)
        )
    return frames
