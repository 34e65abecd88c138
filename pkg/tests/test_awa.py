"""AWA feature triples, colormap, and raster determinism."""

import numpy as np
import pytest

from awapd.awa import (
    PulseFeatures,
    RenderConfig,
    auto_ranges,
    extract_features,
    render_awa,
    width_to_color,
)
from awapd.errors import InvalidArgument
from awapd.pulse_detection import Peak


def pf(amplitude, width, time=0.0):
    return PulseFeatures(amplitude=amplitude, width=width, area=amplitude * width, time=time)


def peak(height, width, time=0.0):
    return Peak(index=1, time=time, height=height, prominence=height, width=width,
                left_cross=time - width / 2, right_cross=time + width / 2)


def cfg256(**kw):
    base = dict(
        image_width=256, image_height=256,
        amplitude_range=(0.0, 1.0), area_range=(0.0, 1.0), width_range=(0.0, 1.0),
        point_radius=2, margin=8,
    )
    base.update(kw)
    return RenderConfig(**base)


# --- features ----------------------------------------------------------------

def test_extract_features_product():
    feats = extract_features([peak(4.0, 2.0, time=1.0), peak(1.0, 1.0, time=2.0)])
    assert feats[0].amplitude == 4.0 and feats[0].width == 2.0 and feats[0].area == 8.0
    assert feats[1].area == 1.0
    assert [f.time for f in feats] == [1.0, 2.0]


def test_extract_features_empty():
    assert extract_features([]) == []


def test_area_identity_is_exact():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, w = rng.uniform(1e-6, 10), rng.uniform(1e-9, 1e-3)
        f = PulseFeatures.from_peak(peak(a, w))
        assert f.area == f.amplitude * f.width  # bit-exact, same arithmetic


def test_pulse_features_invariants():
    with pytest.raises(InvalidArgument):
        PulseFeatures(amplitude=0.0, width=1.0, area=0.0, time=0.0)
    with pytest.raises(InvalidArgument):
        PulseFeatures(amplitude=1.0, width=1.0, area=1.0000001, time=0.0)


# --- colormap ----------------------------------------------------------------

def test_color_anchors():
    cfg = cfg256(width_range=(2.0, 6.0))
    assert width_to_color(2.0, cfg) == (68, 1, 84)
    assert width_to_color(4.0, cfg) == (33, 145, 140)
    assert width_to_color(6.0, cfg) == (253, 231, 37)


def test_color_quarter_point():
    # midpoint of the first segment, rounded half away from zero
    cfg = cfg256(width_range=(0.0, 1.0))
    assert width_to_color(0.25, cfg) == (51, 73, 112)


def test_color_clamps_out_of_range():
    cfg = cfg256(width_range=(2.0, 6.0))
    assert width_to_color(-5.0, cfg) == (68, 1, 84)
    assert width_to_color(99.0, cfg) == (253, 231, 37)


def test_color_parameter_monotone():
    cfg = cfg256(width_range=(0.0, 1.0))
    # increasing width never decreases the interpolation parameter: check
    # via the green channel on each segment, which is monotone per segment
    greens = [width_to_color(w, cfg)[1] for w in np.linspace(0, 1, 101)]
    assert greens == sorted(greens)


# --- rendering ---------------------------------------------------------------

def test_render_empty_is_uniform_background():
    img = render_awa([], cfg256())
    assert img.n_pulses == 0
    assert (img.pixels == 255).all()


def test_render_corner_mapping():
    cfg = cfg256()
    img = render_awa([pf(0.0 + 1e-12, 1e-12)], cfg)  # ~ (a_lo, r_lo)
    # disc centered at (x=margin, y=H-margin)
    assert tuple(img.pixels[256 - 8, 8]) != (255, 255, 255)
    assert tuple(img.pixels[256 - 8, 8]) == width_to_color(1e-12, cfg)


def test_render_center_mapping():
    # amplitude 0.5 and area 0.5 of the unit ranges -> image center
    cfg = cfg256()
    img = render_awa([pf(0.5, 1.0)], cfg)
    assert tuple(img.pixels[128, 128]) == width_to_color(1.0, cfg)


def test_render_determinism():
    rng = np.random.default_rng(3)
    pulses = [pf(rng.uniform(0.01, 1), rng.uniform(0.01, 1), time=i) for i in range(50)]
    cfg = cfg256()
    a = render_awa(pulses, cfg)
    b = render_awa(pulses, cfg)
    assert np.array_equal(a.pixels, b.pixels)
    assert a.png_bytes() == b.png_bytes()


def test_render_out_of_range_clamps_to_border():
    cfg = cfg256()
    img = render_awa([pf(50.0, 0.5)], cfg)  # amplitude far out of range
    # clamped to the right border, area = 25 also out of range -> top
    assert tuple(img.pixels[8, 256 - 8]) == width_to_color(0.5, cfg)


def test_render_pixel_count_bound():
    cfg = cfg256(point_radius=2)
    disc_px = sum(1 for dx in range(-2, 3) for dy in range(-2, 3) if dx * dx + dy * dy <= 4)
    # non-overlapping pulses: exact equality
    pulses = [pf(0.2, 0.5, time=0), pf(0.8, 0.5, time=1)]
    img = render_awa(pulses, cfg)
    fg = int((img.pixels != 255).any(axis=2).sum())
    assert fg == 2 * disc_px
    # heavily overlapping pulses: bound only
    pulses = [pf(0.5, 0.5, time=i) for i in range(10)]
    img = render_awa(pulses, cfg)
    fg = int((img.pixels != 255).any(axis=2).sum())
    assert fg <= 10 * disc_px


def test_render_painter_order():
    # a narrow width range gives two pulses on the same pixel but with
    # clearly different colors; the later pulse must win
    cfg = cfg256(width_range=(0.0999, 0.1))
    early = pf(0.5, 0.09995, time=0.0)
    late = pf(0.5, 0.09999, time=1.0)
    assert width_to_color(early.width, cfg) != width_to_color(late.width, cfg)
    img = render_awa([late, early], cfg)  # order in the list must not matter
    y = int(np.floor(256 - 8 - early.area * 240 + 0.5))
    assert tuple(img.pixels[y, 128]) == width_to_color(late.width, cfg)


def test_area_coordinate_consistency():
    # y computed from area equals y computed from amplitude*width because
    # PulseFeatures.area IS the product, enforced at construction
    f = pf(0.3, 0.4)
    assert f.area == 0.3 * 0.4


def test_render_config_validation():
    with pytest.raises(InvalidArgument):
        cfg256(image_width=32)
    with pytest.raises(InvalidArgument):
        cfg256(point_radius=0)
    with pytest.raises(InvalidArgument):
        cfg256(amplitude_range=(1.0, 1.0))


# --- auto ranges -------------------------------------------------------------

def test_auto_ranges_single_pulse():
    (a, r, w) = auto_ranges([[pf(4.0, 2.0)]])
    assert a == (0.0, pytest.approx(4.2))
    assert r == (0.0, pytest.approx(8.4))
    assert w == (0.0, pytest.approx(2.1))


def test_auto_ranges_global_max():
    (a, _, _) = auto_ranges([[pf(4.0, 1.0)], [pf(10.0, 1.0)]])
    assert a == (0.0, pytest.approx(10.5))


def test_auto_ranges_empty_rejected():
    with pytest.raises(InvalidArgument):
        auto_ranges([])
    with pytest.raises(InvalidArgument):
        auto_ranges([[], []])


def test_auto_ranges_guarantee_no_clamping():
    rng = np.random.default_rng(11)
    sets = [[pf(rng.uniform(0.1, 5), rng.uniform(0.1, 5), time=i) for i in range(20)] for _ in range(4)]
    (a_rng, r_rng, w_rng) = auto_ranges(sets)
    for pulses in sets:
        for p in pulses:
            assert a_rng[0] <= p.amplitude <= a_rng[1]
            assert r_rng[0] <= p.area <= r_rng[1]
            assert w_rng[0] <= p.width <= w_rng[1]


def test_png_roundtrip(tmp_path):
    from PIL import Image

    img = render_awa([pf(0.5, 0.5)], cfg256())
    path = tmp_path / "awa.png"
    img.save_png(path)
    back = np.asarray(Image.open(path).convert("RGB"))
    assert np.array_equal(back, img.pixels)
