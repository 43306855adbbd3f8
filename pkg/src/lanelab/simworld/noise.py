"""Sensor perturbation: salt-and-pepper pixel dropout."""

import numpy as np

from .camera import ImageFrame


def salt_pepper(image, p, rng_seed):
    """Replace each pixel (all 3 channels) by black or white with probability p.

    Deterministic for a given seed; p=0 returns the frame byte-for-byte.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise probability {p} outside [0,1]")
    if p == 0.0:
        return image
    rng = np.random.default_rng(rng_seed)
    H, W = image.height, image.width
    corrupt = rng.random((H, W)) < p
    white = rng.random((H, W)) < 0.5
    pixels = image.pixels.copy()
    pixels[corrupt & white] = 255
    pixels[corrupt & ~white] = 0
    return ImageFrame(width=W, height=H, pixels=pixels, horizon_row=image.horizon_row)
