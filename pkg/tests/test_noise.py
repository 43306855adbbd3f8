"""Salt-and-pepper frame corruption."""

import numpy as np
import pytest

from lanelab.simworld.camera import ImageFrame
from lanelab.simworld.noise import salt_pepper


def mid_gray_frame(w=100, h=100):
    return ImageFrame(
        width=w, height=h, pixels=np.full((h, w, 3), 128, dtype=np.uint8), horizon_row=0
    )


def test_p_zero_is_identity():
    frame = mid_gray_frame()
    out = salt_pepper(frame, 0.0, 123)
    assert out is frame


def test_p_one_all_black_or_white():
    out = salt_pepper(mid_gray_frame(), 1.0, 0)
    px = out.pixels
    assert np.all((px == 0) | (px == 255))
    # both polarities occur
    assert np.any(px == 0) and np.any(px == 255)


def test_corrupted_fraction_within_binomial_bound():
    # p=0.4 on 100x100: fraction within 0.4 +/- 4 sigma = +/- 0.02
    out = salt_pepper(mid_gray_frame(), 0.4, 7)
    corrupted = np.any(out.pixels != 128, axis=2)
    frac = corrupted.mean()
    assert abs(frac - 0.4) < 0.02


def test_whole_pixel_corruption():
    # all three channels of a corrupted pixel agree (pixel-level, not channel-level)
    out = salt_pepper(mid_gray_frame(), 0.5, 11)
    px = out.pixels
    corrupted = np.any(px != 128, axis=2)
    vals = px[corrupted]
    assert np.all((vals == 0).all(axis=1) | (vals == 255).all(axis=1))


def test_seed_reproducibility():
    a = salt_pepper(mid_gray_frame(), 0.3, 42)
    b = salt_pepper(mid_gray_frame(), 0.3, 42)
    c = salt_pepper(mid_gray_frame(), 0.3, 43)
    assert np.array_equal(a.pixels, b.pixels)
    assert not np.array_equal(a.pixels, c.pixels)


def test_source_frame_untouched():
    frame = mid_gray_frame()
    salt_pepper(frame, 0.9, 1)
    assert np.all(frame.pixels == 128)


def test_invalid_probability():
    with pytest.raises(ValueError):
        salt_pepper(mid_gray_frame(), 1.5, 0)
    with pytest.raises(ValueError):
        salt_pepper(mid_gray_frame(), -0.1, 0)
