import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tacgrasp.errors import InvalidInputError
from tacgrasp import tactile
from tacgrasp.tactile import (Rect, SsimParams, abs_pixel_diff, concat_horizontal,
                              contact_frame_index, crop, default_crop_region,
                              detect_pins, downsample, downsample_float,
                              first_crossing, ssim, ssim_sequence)

frames_8x8 = st.integers(0, 255).flatmap(
    lambda seed: st.just(
        np.random.default_rng(seed).integers(0, 256, (9, 11), dtype=np.uint8))
)


def constant_frame(value, h=16, w=16):
    return np.full((h, w), value, dtype=np.uint8)


# ---------------------------------------------------------------------------
# ssim


def test_ssim_identity(rng):
    x = rng.integers(0, 256, (20, 30), dtype=np.uint8)
    assert ssim(x, x) == 1.0


def test_ssim_constant_frames_match_direct_formula():
    # sigma terms vanish for constant frames, so the score reduces to the
    # luminance term; evaluate that scalar formula independently here
    a, b = 100.0, 110.0
    p = SsimParams()
    expected = ((2 * a * b + p.c1) * p.c2) / ((a * a + b * b + p.c1) * p.c2)
    got = ssim(constant_frame(100), constant_frame(110))
    assert got == pytest.approx(expected, abs=1e-9)


def test_ssim_constant_pairs_sweep():
    p = SsimParams()
    for a, b in [(0, 255), (5, 5), (17, 201), (254, 255)]:
        expected = (2 * a * b + p.c1) / (a * a + b * b + p.c1)
        assert ssim(constant_frame(a), constant_frame(b)) == pytest.approx(
            expected, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(frames_8x8, frames_8x8)
def test_ssim_symmetry_and_range(u, v):
    s_uv = ssim(u, v)
    assert s_uv == pytest.approx(ssim(v, u), abs=1e-12)
    assert -1.0 <= s_uv <= 1.0


def test_ssim_validates_inputs(rng):
    x = rng.integers(0, 256, (10, 10), dtype=np.uint8)
    with pytest.raises(InvalidInputError):
        ssim(x, rng.integers(0, 256, (10, 12), dtype=np.uint8))
    with pytest.raises(InvalidInputError):
        ssim(x[:5, :5], x[:5, :5])  # smaller than the 7x7 window
    with pytest.raises(InvalidInputError):
        SsimParams(window_n=4)
    with pytest.raises(InvalidInputError):
        SsimParams(k1=0.0)


def test_ssim_sequence_matches_single(rng):
    ref = rng.integers(0, 256, (16, 16), dtype=np.uint8)
    frames = [rng.integers(0, 256, (16, 16), dtype=np.uint8) for _ in range(4)]
    seq = ssim_sequence(frames, ref)
    for frame, value in zip(frames, seq):
        assert value == pytest.approx(ssim(frame, ref), abs=1e-12)


def test_ssim_speed_320x240(rng):
    import time
    u = rng.integers(0, 256, (240, 320), dtype=np.uint8)
    v = rng.integers(0, 256, (240, 320), dtype=np.uint8)
    ssim(u, v)  # warm up
    t0 = time.time()
    n = 5
    for _ in range(n):
        ssim(u, v)
    assert (time.time() - t0) / n < 0.05


# ---------------------------------------------------------------------------
# abs_pixel_diff


def test_abs_pixel_diff_basics(rng):
    x = rng.integers(0, 256, (12, 12), dtype=np.uint8)
    assert abs_pixel_diff(x, x) == 0.0
    assert abs_pixel_diff(constant_frame(0), constant_frame(255)) == 255.0


def test_abs_pixel_diff_ramp_oracle():
    ramp = np.arange(64, dtype=np.uint8).reshape(8, 8)
    zeros = np.zeros((8, 8), dtype=np.uint8)
    # brute-force pixel loop
    expected = sum(int(v) for row in ramp for v in row) / 64.0
    assert abs_pixel_diff(ramp, zeros) == pytest.approx(expected)


@settings(max_examples=25, deadline=None)
@given(frames_8x8, frames_8x8)
def test_abs_pixel_diff_pseudo_metric(u, v):
    d = abs_pixel_diff(u, v)
    assert d >= 0.0
    assert d == abs_pixel_diff(v, u)
    assert (d == 0.0) == np.array_equal(u, v)


# ---------------------------------------------------------------------------
# contact frame


def make_video_with_deformations(values):
    # frame i = constant value, reference 0 -> abs diff == value
    return [constant_frame(v, 8, 8) for v in values], constant_frame(0, 8, 8)


def test_contact_index_monotone_series():
    video, ref = make_video_with_deformations(range(101))
    assert contact_frame_index(video, ref) == 25


def test_contact_index_all_identical():
    video, ref = make_video_with_deformations([7] * 10)
    assert contact_frame_index(video, video[0]) == 0


def test_contact_index_step_series():
    video, ref = make_video_with_deformations([0, 10, 40, 90])
    assert contact_frame_index(video, ref) == 2  # 40 >= 0.25*90


def test_contact_index_empty_video():
    with pytest.raises(InvalidInputError):
        contact_frame_index([], constant_frame(0))


def test_first_crossing_monotone_property(rng):
    series = np.sort(rng.random(50))
    idx = first_crossing(series)
    assert series[idx] >= 0.25 * series[-1]
    assert np.all(series[:idx] < 0.25 * series[-1])


# ---------------------------------------------------------------------------
# crop / downsample / concat


def test_crop_default_region_matches_pipeline(rng):
    raw = rng.integers(0, 256, (240, 320), dtype=np.uint8)
    cropped = crop(raw)
    assert cropped.shape == (220, 160)
    region = default_crop_region(320, 240)
    assert region == Rect(80, 10, 160, 220)
    assert np.array_equal(cropped, raw[10:230, 80:240])


def test_crop_identity_and_checkerboard():
    board = np.array([[0, 255, 0, 255],
                      [255, 0, 255, 0],
                      [0, 255, 0, 255],
                      [255, 0, 255, 0]], dtype=np.uint8)
    assert np.array_equal(crop(board, Rect(0, 0, 4, 4)), board)
    inner = crop(board, Rect(1, 1, 2, 2))
    assert np.array_equal(inner, [[0, 255], [255, 0]])


def test_crop_composition_equals_single_crop(rng):
    raw = rng.integers(0, 256, (60, 80), dtype=np.uint8)
    once = crop(raw, Rect(10, 5, 40, 30))
    twice = crop(once, Rect(4, 6, 20, 12))
    assert np.array_equal(twice, crop(raw, Rect(14, 11, 20, 12)))


def test_crop_out_of_bounds(rng):
    raw = rng.integers(0, 256, (20, 20), dtype=np.uint8)
    with pytest.raises(InvalidInputError):
        crop(raw, Rect(15, 15, 10, 10))
    with pytest.raises(InvalidInputError):
        crop(raw, Rect(-1, 0, 5, 5))


def test_downsample_constant_invariance():
    for value in (0, 37, 255):
        out = downsample(constant_frame(value, 22, 16), 4, 6)
        assert np.all(out == value)


def test_downsample_2x2_rounding():
    frame = np.array([[0, 0], [255, 255]], dtype=np.uint8)
    assert downsample(frame, 1, 1)[0, 0] == 128  # 127.5 rounds half-up


def test_downsample_pipeline_shape(rng):
    raw = rng.integers(0, 256, (220, 160), dtype=np.uint8)
    assert downsample(raw, 40, 60).shape == (60, 40)


def test_downsample_matches_bruteforce_overlap_oracle(rng):
    frame = rng.integers(0, 256, (11, 7), dtype=np.uint8)
    tw, th = 3, 4
    # overlap-weighted loop: output bin (i, j) averages source pixels by
    # their box overlap with the bin
    sh, sw = 11 / th, 7 / tw
    expected = np.zeros((th, tw))
    for i in range(th):
        for j in range(tw):
            total = 0.0
            for y in range(11):
                oy = min((i + 1) * sh, y + 1) - max(i * sh, y)
                if oy <= 0:
                    continue
                for x in range(7):
                    ox = min((j + 1) * sw, x + 1) - max(j * sw, x)
                    if ox > 0:
                        total += frame[y, x] * oy * ox
            expected[i, j] = total / (sh * sw)
    assert np.allclose(downsample_float(frame, tw, th), expected, atol=1e-9)
    assert np.array_equal(
        downsample(frame, tw, th),
        np.clip(np.floor(expected + 0.5), 0, 255).astype(np.uint8))


def test_downsample_validates(rng):
    raw = rng.integers(0, 256, (10, 10), dtype=np.uint8)
    with pytest.raises(InvalidInputError):
        downsample(raw, 0, 5)
    with pytest.raises(InvalidInputError):
        downsample(raw, 20, 5)


def test_concat_horizontal_layout():
    thirds = [constant_frame(v, 6, 4) for v in (10, 20, 30)]
    out = concat_horizontal(thirds)
    assert out.shape == (6, 12)
    assert np.all(out[:, :4] == 10)
    assert np.all(out[:, 4:8] == 20)
    assert np.all(out[:, 8:] == 30)


def test_concat_recovers_inputs_bit_exact(rng):
    frames = [rng.integers(0, 256, (60, 40), dtype=np.uint8) for _ in range(3)]
    out = concat_horizontal(frames)
    for i, frame in enumerate(frames):
        assert np.array_equal(out[:, 40 * i : 40 * (i + 1)], frame)


def test_concat_validates(rng):
    f = rng.integers(0, 256, (8, 8), dtype=np.uint8)
    with pytest.raises(InvalidInputError):
        concat_horizontal([f, f])
    with pytest.raises(InvalidInputError):
        concat_horizontal([f, f, rng.integers(0, 256, (8, 9), dtype=np.uint8)])


# ---------------------------------------------------------------------------
# pin detection


def render_gaussian_blob(h, w, cx, cy, peak=220.0, sigma=2.0):
    ys, xs = np.mgrid[0:h, 0:w]
    img = peak * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma**2))
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def test_detect_pins_blank():
    det = detect_pins(np.zeros((40, 40), dtype=np.uint8))
    assert len(det.centroids) == 0


def test_detect_pins_single_blob_subpixel():
    img = render_gaussian_blob(100, 200, cx=100.0, cy=50.0)
    det = detect_pins(img, threshold=60)
    assert len(det.centroids) == 1
    cx, cy = det.centroids[0]
    assert abs(cx - 100.0) < 0.5
    assert abs(cy - 50.0) < 0.5


def test_detect_pins_sorted_and_area_filtered():
    img = np.zeros((60, 60), dtype=np.uint8)
    img += render_gaussian_blob(60, 60, 10, 40)
    img += render_gaussian_blob(60, 60, 45, 12)
    img[0, 0] = 255  # single-pixel speck, filtered by min_area
    det = detect_pins(img, threshold=60, min_area=4)
    assert len(det.centroids) == 2
    assert det.centroids[0][1] < det.centroids[1][1]  # sorted by y


def test_detect_pins_threshold_validation(rng):
    img = rng.integers(0, 256, (10, 10), dtype=np.uint8)
    with pytest.raises(InvalidInputError):
        detect_pins(img, threshold=0)
    with pytest.raises(InvalidInputError):
        detect_pins(img, threshold=255)
