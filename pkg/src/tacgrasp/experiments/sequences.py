"""Frame-sequence extraction from grasp videos.

Each grasp video yields up to 10 training samples: starting from the
contact frame (25% of peak deformation, averaged over the three sensors),
a sample takes every 10th frame, 8 frames long; offsetting the start by
+1..+9 frames gives the remaining samples.  Every sampled frame runs
through the crop/downsample/concatenate pipeline, so a sample is 8 frames
of 120 x 60 pixels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from ..tactile import (abs_pixel_diff, first_crossing, preprocess_frame,
                       concat_horizontal)

SEQ_LEN = 8  # frames per sample
SEQ_STRIDE = 10  # video frames between consecutive sample frames
MAX_OFFSETS = 10  # samples per grasp video

SPAN = (SEQ_LEN - 1) * SEQ_STRIDE  # last frame of offset-0 sample: contact+70


@dataclass
class SequenceSample:
    grasp_id: str
    offset: int
    frames: np.ndarray  # (SEQ_LEN, 60, 40*n_sensors) uint8
    label: int


def contact_index(videos, refs) -> int:
    """Contact frame from the sensor-mean deformation series."""
    n = len(videos[0])
    series = [
        np.mean([abs_pixel_diff(video[i], ref)
                 for video, ref in zip(videos, refs)])
        for i in range(n)
    ]
    return first_crossing(series)


def extract_sequences(videos, refs, label: int = 0,
                      grasp_id: str = "") -> list:
    """All available SequenceSamples of one grasp.

    ``videos`` holds one frame list per sensor, ``refs`` the matching
    undeformed references.  Videos long enough for fewer than MAX_OFFSETS
    offsets yield fewer samples (with a warning); too short for even one
    sample is an error.
    """
    if len(videos) != 3 or len(refs) != 3:
        raise InvalidInputError("expected 3 videos and 3 reference frames")
    n = len(videos[0])
    if any(len(v) != n for v in videos):
        raise InvalidInputError("sensor videos have different lengths")

    c = contact_index(videos, refs)
    n_offsets = min(MAX_OFFSETS, n - SPAN - c)
    if n_offsets < 1:
        raise InvalidInputError(
            f"video too short: {n} frames, contact at {c}, "
            f"need >= {c + SPAN + 1}"
        )
    if n_offsets < MAX_OFFSETS:
        warnings.warn(
            f"grasp {grasp_id!r}: only {n_offsets} of {MAX_OFFSETS} "
            f"offsets fit ({n} frames, contact at {c})"
        )

    # preprocess each needed frame once; samples reuse them
    span = range(c, c + n_offsets - 1 + SPAN + 1)
    pre = [[preprocess_frame(video[i]) for i in span] for video in videos]

    samples = []
    for k in range(n_offsets):
        frames = np.stack([
            concat_horizontal([pre[s][k + SEQ_STRIDE * j] for s in range(3)])
            for j in range(SEQ_LEN)
        ])
        samples.append(SequenceSample(grasp_id, k, frames, label))
    return samples


def sensor_columns(sensors, strip_width: int = 40) -> np.ndarray:
    """Column indices selecting the given 1-based sensor strips."""
    sensors = sorted(set(int(s) for s in sensors))
    if not sensors or any(s not in (1, 2, 3) for s in sensors):
        raise InvalidInputError(f"sensors must be a subset of {{1,2,3}}, got {sensors}")
    return np.concatenate([
        np.arange((s - 1) * strip_width, s * strip_width) for s in sensors
    ])


def select_sensors(frames: np.ndarray, sensors) -> np.ndarray:
    """Restrict (..., h, 120) sequence arrays to a sensor subset."""
    cols = sensor_columns(sensors)
    return np.ascontiguousarray(frames[..., cols])
