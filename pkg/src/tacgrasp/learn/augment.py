"""Per-frame training augmentations.

Applied independently per frame and per sensor strip, in a fixed order:
random crop (resized back to the original size), random zoom-in,
brightness/contrast as clip(alpha*pixel + beta, 0, 255), then additive
Gaussian noise.  Noise variance is specified on intensities normalized to
[0, 1], so the 8-bit sigma is 255*sqrt(variance).  All draws come from one
seeded generator, making each augmented frame reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError


@dataclass(frozen=True)
class AugmentConfig:
    crop_frac_w: float = 0.06
    crop_frac_h: float = 0.02
    zoom_max: float = 0.02
    noise_variance: float = 1e-4
    alpha_range: tuple = (0.3, 1.0)
    beta_range: tuple = (-50.0, 50.0)

    def __post_init__(self):
        for name in ("crop_frac_w", "crop_frac_h", "zoom_max"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise InvalidInputError(f"{name} must be in [0,1), got {v}")
        if self.noise_variance < 0:
            raise InvalidInputError("noise_variance must be >= 0")
        if self.alpha_range[0] > self.alpha_range[1] or \
           self.beta_range[0] > self.beta_range[1]:
            raise InvalidInputError("range bounds must be ordered")

    @classmethod
    def identity(cls) -> "AugmentConfig":
        return cls(0.0, 0.0, 0.0, 0.0, (1.0, 1.0), (0.0, 0.0))


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with corner alignment (same-size calls are exact)."""
    h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.astype(np.float64)
    ys = np.linspace(0.0, h - 1.0, out_h) if out_h > 1 else np.array([0.0])
    xs = np.linspace(0.0, w - 1.0, out_w) if out_w > 1 else np.array([0.0])
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    img = img.astype(np.float64)
    top = img[np.ix_(y0, x0)] * (1 - fx) + img[np.ix_(y0, x1)] * fx
    bottom = img[np.ix_(y1, x0)] * (1 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bottom * fy


def augment(frame: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator):
    """Augment one uint8 frame; output stays uint8 in [0, 255]."""
    frame = np.asarray(frame)
    if frame.ndim != 2 or frame.dtype != np.uint8:
        raise InvalidInputError("augment expects a 2-D uint8 frame")
    h, w = frame.shape
    img = frame.astype(np.float64)

    # random crop, resized back
    dw = int(round(rng.uniform(0.0, cfg.crop_frac_w) * w))
    dh = int(round(rng.uniform(0.0, cfg.crop_frac_h) * h))
    ox = int(rng.integers(0, dw + 1))
    oy = int(rng.integers(0, dh + 1))
    if dw or dh:
        img = resize_bilinear(img[oy : h - dh + oy, ox : w - dw + ox], h, w)

    # zoom in by up to zoom_max
    zoom = rng.uniform(0.0, cfg.zoom_max)
    if zoom > 0.0:
        zh = max(int(round(h / (1.0 + zoom))), 1)
        zw = max(int(round(w / (1.0 + zoom))), 1)
        if (zh, zw) != (h, w):
            oy = (h - zh) // 2
            ox = (w - zw) // 2
            img = resize_bilinear(img[oy : oy + zh, ox : ox + zw], h, w)

    alpha = rng.uniform(*cfg.alpha_range)
    beta = rng.uniform(*cfg.beta_range)
    img = np.clip(alpha * img + beta, 0.0, 255.0)

    if cfg.noise_variance > 0.0:
        sigma = 255.0 * np.sqrt(cfg.noise_variance)
        img = np.clip(img + rng.normal(0.0, sigma, img.shape), 0.0, 255.0)

    return np.floor(img + 0.5).astype(np.uint8)


def augment_sequence(seq: np.ndarray, cfg: AugmentConfig, seed: int,
                     n_sensors: int = 3) -> np.ndarray:
    """Augment a (frames, H, W) stack strip-by-strip.

    The width is split into ``n_sensors`` equal strips (one per sensor) and
    every (frame, strip) pair is augmented with its own draws from a single
    generator seeded by ``seed``.
    """
    seq = np.asarray(seq)
    if seq.ndim != 3 or seq.dtype != np.uint8:
        raise InvalidInputError("sequence must be (frames, h, w) uint8")
    if seq.shape[2] % n_sensors:
        raise InvalidInputError(
            f"width {seq.shape[2]} not divisible into {n_sensors} strips"
        )
    strip_w = seq.shape[2] // n_sensors
    rng = np.random.default_rng(seed)
    out = np.empty_like(seq)
    for f in range(seq.shape[0]):
        for s in range(n_sensors):
            sl = slice(s * strip_w, (s + 1) * strip_w)
            out[f, :, sl] = augment(seq[f, :, sl], cfg, rng)
    return out
