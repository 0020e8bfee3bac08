"""Grayscale frame containers and binary PGM (P5) serialization.

A tactile frame is a 2-D ``uint8`` array of shape ``(height, width)`` with
intensities in [0, 255]; a depth image is a 2-D ``uint16`` array holding
millimetres per pixel (0 marks an invalid pixel).  Both serialize as binary
PGM: maxval 255 for tactile frames, maxval 65535 (big-endian samples, per
the netpbm format) for depth images.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

GrayFrame = np.ndarray  # (h, w) uint8
DepthImage = np.ndarray  # (h, w) uint16, depth in mm, 0 = invalid


def validate_frame(frame: np.ndarray, name: str = "frame") -> np.ndarray:
    """Check that ``frame`` is a 2-D uint8 array and return it."""
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {frame.shape}")
    if frame.dtype != np.uint8:
        raise InvalidInputError(f"{name} must be uint8, got {frame.dtype}")
    if frame.size == 0:
        raise InvalidInputError(f"{name} is empty")
    return frame


def validate_depth(depth: np.ndarray, name: str = "depth") -> np.ndarray:
    depth = np.asarray(depth)
    if depth.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {depth.shape}")
    if depth.dtype != np.uint16:
        raise InvalidInputError(f"{name} must be uint16, got {depth.dtype}")
    if depth.size == 0:
        raise InvalidInputError(f"{name} is empty")
    return depth


def frame_from_list(width: int, height: int, data) -> GrayFrame:
    """Build a frame from row-major intensities, validating the invariants."""
    arr = np.asarray(data)
    if arr.size != width * height:
        raise InvalidInputError(
            f"data length {arr.size} != width*height = {width * height}"
        )
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise InvalidInputError("intensities must lie in [0, 255]")
    return arr.reshape(height, width).astype(np.uint8)


def _read_pgm_tokens(blob: bytes, n: int):
    """Yield the first ``n`` whitespace-separated header tokens of a PNM blob.

    Comments (# to end of line) are skipped.  Returns (tokens, offset) where
    offset points at the single whitespace byte following the last token.
    """
    tokens = []
    i = 0
    while len(tokens) < n:
        if i >= len(blob):
            raise InvalidInputError("truncated PGM header")
        c = blob[i : i + 1]
        if c == b"#":
            j = blob.find(b"\n", i)
            i = len(blob) if j < 0 else j + 1
            continue
        if c.isspace():
            i += 1
            continue
        j = i
        while j < len(blob) and not blob[j : j + 1].isspace() and blob[j : j + 1] != b"#":
            j += 1
        tokens.append(blob[i:j])
        i = j
    # exactly one whitespace byte separates the header from the raster
    if i >= len(blob) or not blob[i : i + 1].isspace():
        raise InvalidInputError("malformed PGM header")
    return tokens, i + 1


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5); returns uint8 for maxval<256 else uint16."""
    with open(path, "rb") as fh:
        blob = fh.read()
    tokens, offset = _read_pgm_tokens(blob, 4)
    if tokens[0] != b"P5":
        raise InvalidInputError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = (int(t) for t in tokens[1:4])
    if width <= 0 or height <= 0:
        raise InvalidInputError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise InvalidInputError(f"{path}: bad maxval {maxval}")
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    need = width * height * dtype.itemsize if maxval >= 256 else width * height
    if len(blob) - offset < need:
        raise InvalidInputError(f"{path}: truncated raster")
    raster = np.frombuffer(blob, dtype=dtype, count=width * height, offset=offset)
    out = raster.reshape(height, width)
    return out.astype(np.uint16) if maxval >= 256 else out.copy()


def write_pgm(path, image: np.ndarray) -> None:
    """Write ``image`` as binary PGM; uint8 -> maxval 255, uint16 -> 65535."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise InvalidInputError(f"image must be 2-D, got shape {image.shape}")
    if image.dtype == np.uint8:
        maxval, raster = 255, image.tobytes()
    elif image.dtype == np.uint16:
        maxval, raster = 65535, image.astype(">u2").tobytes()
    else:
        raise InvalidInputError(f"unsupported dtype {image.dtype}")
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(raster)
