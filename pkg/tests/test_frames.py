import numpy as np
import pytest

from tacgrasp.errors import InvalidInputError
from tacgrasp.frames import frame_from_list, read_pgm, write_pgm


def test_pgm_roundtrip_8bit(tmp_path, rng):
    img = rng.integers(0, 256, (24, 31), dtype=np.uint8)
    path = tmp_path / "img.pgm"
    write_pgm(path, img)
    assert np.array_equal(read_pgm(path), img)


def test_pgm_roundtrip_16bit(tmp_path, rng):
    depth = rng.integers(0, 65536, (17, 13), dtype=np.uint16)
    path = tmp_path / "depth.pgm"
    write_pgm(path, depth)
    back = read_pgm(path)
    assert back.dtype == np.uint16
    assert np.array_equal(back, depth)


def test_pgm_bytes_are_deterministic(tmp_path, rng):
    img = rng.integers(0, 256, (8, 9), dtype=np.uint8)
    write_pgm(tmp_path / "a.pgm", img)
    write_pgm(tmp_path / "b.pgm", img)
    assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()


def test_pgm_header_format(tmp_path):
    img = np.zeros((2, 3), dtype=np.uint8)
    write_pgm(tmp_path / "z.pgm", img)
    blob = (tmp_path / "z.pgm").read_bytes()
    assert blob.startswith(b"P5\n3 2\n255\n")
    assert len(blob) == len(b"P5\n3 2\n255\n") + 6


def test_pgm_16bit_is_big_endian(tmp_path):
    img = np.array([[0x0102]], dtype=np.uint16)
    write_pgm(tmp_path / "be.pgm", img)
    assert (tmp_path / "be.pgm").read_bytes().endswith(b"\x01\x02")


def test_pgm_reads_comments(tmp_path):
    raw = b"P5 # format\n# a comment line\n2 2\n255\n\x00\x01\x02\x03"
    (tmp_path / "c.pgm").write_bytes(raw)
    img = read_pgm(tmp_path / "c.pgm")
    assert np.array_equal(img, [[0, 1], [2, 3]])


def test_pgm_rejects_garbage(tmp_path):
    (tmp_path / "bad.pgm").write_bytes(b"P6\n2 2\n255\n" + b"\x00" * 12)
    with pytest.raises(InvalidInputError):
        read_pgm(tmp_path / "bad.pgm")
    (tmp_path / "trunc.pgm").write_bytes(b"P5\n4 4\n255\n\x00\x01")
    with pytest.raises(InvalidInputError):
        read_pgm(tmp_path / "trunc.pgm")


def test_frame_from_list_validates():
    frame = frame_from_list(3, 2, [0, 1, 2, 3, 4, 255])
    assert frame.shape == (2, 3)
    with pytest.raises(InvalidInputError):
        frame_from_list(3, 2, [0, 1, 2])
    with pytest.raises(InvalidInputError):
        frame_from_list(2, 1, [0, 300])
