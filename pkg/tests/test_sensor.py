import numpy as np
import pytest

from tacgrasp.errors import InvalidInputError
from tacgrasp.sensor import (ContactPrimitive, DeformationField, PinLayout,
                             apply_contact, grasp_profile, linear_ramp,
                             render_tactile_image, rest_pin_positions,
                             simulate_grasp_video)
from tacgrasp.tactile import abs_pixel_diff, contact_frame_index, detect_pins


def test_layout_validation():
    PinLayout()  # default is valid
    with pytest.raises(InvalidInputError):
        PinLayout(pitch=1.0)  # pitch must exceed pin diameter
    with pytest.raises(InvalidInputError):
        PinLayout(cols=20)  # grid wider than the surface


def test_rest_positions_default_grid():
    pins = rest_pin_positions(PinLayout())
    assert pins.shape == (30, 2)
    assert pins[:, 0].min() == pytest.approx(-13.5)
    assert pins[:, 0].max() == pytest.approx(13.5)
    assert pins[:, 1].min() == pytest.approx(-3.0)
    assert pins[:, 1].max() == pytest.approx(3.0)
    # pairwise minimum distance equals the pitch
    d = np.linalg.norm(pins[None] - pins[:, None], axis=-1)
    d[np.diag_indices(30)] = np.inf
    assert d.min() == pytest.approx(3.0)


def test_rest_positions_single_pin():
    layout = PinLayout(rows=1, cols=1, surface_w=10, surface_h=10)
    assert np.allclose(rest_pin_positions(layout), [[0.0, 0.0]])


def test_zero_indentation_zero_field():
    layout = PinLayout()
    field = apply_contact(layout, ContactPrimitive("sphere", (6.0,)))
    assert np.all(field.displacements == 0)
    assert np.all(field.gains == 1.0)


def test_centered_sphere_field_symmetry():
    layout = PinLayout()
    contact = ContactPrimitive("sphere", (6.0,), (0.0, 0.0, 0.0), 2.0)
    field = apply_contact(layout, contact)
    pins = rest_pin_positions(layout)
    disp = field.displacements
    by_pos = {(round(x, 6), round(y, 6)): d for (x, y), d in zip(pins, disp)}
    for (x, y), d in by_pos.items():
        mx = by_pos[(round(-x, 6), round(y, 6))]
        my = by_pos[(round(x, 6), round(-y, 6))]
        assert mx[0] == pytest.approx(-d[0]) and mx[1] == pytest.approx(d[1])
        assert my[0] == pytest.approx(d[0]) and my[1] == pytest.approx(-d[1])
    # pins on the vertical center line move straight outward in y
    for (x, y), d in by_pos.items():
        if x == 0 and y != 0:
            assert d[0] == pytest.approx(0.0, abs=1e-12)
            assert np.sign(d[1]) == np.sign(y) and abs(d[1]) > 0


def test_indentation_monotonicity():
    layout = PinLayout()
    base = ContactPrimitive("sphere", (6.0,), (2.0, 1.0, 0.3), 1.0)
    shallow = apply_contact(layout, base)
    deep = apply_contact(layout, base.with_indentation(2.0))
    m_shallow = np.hypot(*shallow.displacements.T)
    m_deep = np.hypot(*deep.displacements.T)
    nz = m_shallow > 0
    assert np.all(m_deep[nz] > m_shallow[nz])


def test_displacements_capped_at_pitch():
    layout = PinLayout()
    contact = ContactPrimitive("sphere", (20.0,), (0, 0, 0), 5.0)
    field = apply_contact(layout, contact, gain_per_mm=5.0)
    assert np.hypot(*field.displacements.T).max() <= layout.pitch + 1e-9


def test_contact_validation():
    with pytest.raises(InvalidInputError):
        ContactPrimitive("pyramid", (3.0,))
    with pytest.raises(InvalidInputError):
        ContactPrimitive("sphere", (0.0,))
    with pytest.raises(InvalidInputError):
        ContactPrimitive("sphere", (3.0,), indentation=9.0)


def test_edge_and_box_displace_normal_to_long_axis():
    layout = PinLayout()
    for shape, dims in [("edge", (16.0,)), ("box", (6.0, 18.0))]:
        contact = ContactPrimitive(shape, dims, (0.0, 0.0, 0.0), 2.0)
        field = apply_contact(layout, contact)
        pins = rest_pin_positions(layout)
        off_axis = np.abs(pins[:, 1]) > 0.1
        d = field.displacements[off_axis]
        # long axis lies along x, so motion is predominantly in y
        assert np.all(np.abs(d[:, 1]) >= np.abs(d[:, 0]) - 1e-9)


def test_render_rest_is_deterministic():
    layout = PinLayout()
    a = render_tactile_image(layout)
    b = render_tactile_image(layout)
    assert np.array_equal(a, b)
    assert a.shape == (240, 320)
    c = render_tactile_image(layout, noise_seed=3)
    d = render_tactile_image(layout, noise_seed=3)
    assert np.array_equal(c, d)
    assert not np.array_equal(c, render_tactile_image(layout, noise_seed=4))


def test_render_detect_roundtrip_rest():
    layout = PinLayout()
    img = render_tactile_image(layout)
    det = detect_pins(img)
    assert len(det.centroids) == 30
    pins = rest_pin_positions(layout)
    expected = np.column_stack([160.0 + 6.0 * pins[:, 0],
                                120.0 + 6.0 * pins[:, 1]])
    order = np.lexsort((expected[:, 0], expected[:, 1]))
    err = np.abs(det.centroids - expected[order]).max()
    assert err < 0.5


def test_render_detect_roundtrip_deformed():
    layout = PinLayout()
    contact = ContactPrimitive("sphere", (7.0,), (1.0, 0.5, 0.0), 2.5)
    field = apply_contact(layout, contact)
    img = render_tactile_image(layout, field)
    det = detect_pins(img)
    assert len(det.centroids) == 30
    pos = rest_pin_positions(layout) + field.displacements
    expected = np.column_stack([160.0 + 6.0 * pos[:, 0],
                                120.0 + 6.0 * pos[:, 1]])
    # displacement can reorder the (y, x) sort, so match by proximity
    dists = np.linalg.norm(det.centroids[:, None] - expected[None], axis=-1)
    nearest = dists.min(axis=1)
    assert sorted(dists.argmin(axis=1).tolist()) == list(range(30))
    assert nearest.mean() < 1.0


def test_glare_is_constant_across_contacts():
    layout = PinLayout()
    rest = render_tactile_image(layout, glare=True)
    contact = ContactPrimitive("box", (8.0, 14.0), (0, 0, 0.4), 2.0)
    deformed = render_tactile_image(layout, apply_contact(layout, contact),
                                    glare=True)
    plain = render_tactile_image(layout)
    glare_region = rest.astype(int) - plain.astype(int)
    ys, xs = np.nonzero(glare_region > 30)
    assert len(ys) > 50  # the disc exists
    assert np.array_equal(rest[ys, xs], deformed[ys, xs])
    # inside the preprocessing crop window of the 320x240 capture
    assert xs.min() >= 80 and xs.max() < 240
    assert ys.min() >= 10 and ys.max() < 230


def test_video_constant_zero_ramp():
    layout = PinLayout()
    contact = ContactPrimitive("sphere", (6.0,), (0, 0, 0), 0.0)
    frames = simulate_grasp_video(layout, contact, np.zeros(5), seed=1,
                                  noise_sigma=0.0, jitter=0.0)
    assert len(frames) == 5
    for f in frames[1:]:
        assert np.array_equal(f, frames[0])


def test_video_monotone_ramp_deformation():
    layout = PinLayout()
    contact = ContactPrimitive("sphere", (6.0,), (0, 0, 0), 0.0)
    ramp = linear_ramp(40, 3.0)
    frames = simulate_grasp_video(layout, contact, ramp, seed=2,
                                  noise_sigma=0.0, jitter=0.0)
    diffs = [abs_pixel_diff(f, frames[0]) for f in frames]
    assert all(b - a >= -1.0 for a, b in zip(diffs, diffs[1:]))


def test_video_contact_index_near_quarter():
    layout = PinLayout()
    contact = ContactPrimitive("sphere", (6.0,), (0, 0, 0), 0.0)
    n = 60
    frames = simulate_grasp_video(layout, contact, linear_ramp(n, 3.0),
                                  seed=3, noise_sigma=0.0, jitter=0.0)
    idx = contact_frame_index(frames, frames[0])
    assert abs(idx - 0.25 * (n - 1)) <= 2


def test_video_seed_reproducibility():
    layout = PinLayout()
    contact = ContactPrimitive("cylinder", (4.0, 26.0), (0, 0, 0.2), 0.0)
    ramp = linear_ramp(10, 2.5)
    a = simulate_grasp_video(layout, contact, ramp, seed=9)
    b = simulate_grasp_video(layout, contact, ramp, seed=9)
    for fa, fb in zip(a, b):
        assert np.array_equal(fa, fb)


def test_distinct_shapes_render_distinct_frames():
    layout = PinLayout()
    frames = {}
    for shape, dims in [("sphere", (6.0,)), ("box", (8.0, 14.0)),
                        ("cylinder", (4.0, 26.0)), ("edge", (14.0,))]:
        contact = ContactPrimitive(shape, dims, (0, 0, 0.2), 2.0)
        frames[shape] = render_tactile_image(layout,
                                             apply_contact(layout, contact))
    names = list(frames)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            assert abs_pixel_diff(frames[a], frames[b]) > 0


def test_grasp_profile_release_shape():
    profile = grasp_profile(100, 3.0, release_frame=62, release_target=0.0)
    assert profile[0] == 0.0
    assert profile[40] == pytest.approx(3.0)
    assert profile[61] == pytest.approx(3.0)
    assert profile[-1] == pytest.approx(0.0)
    assert np.all(np.diff(profile[62:75]) <= 1e-9)
