"""Synthetic lesion phantoms.

Each image holds one darker elliptical lesion on a brighter background,
with a Gaussian-blurred boundary and multiplicative speckle, a desk-scale
stand-in for ultrasound frames. Geometry and noise for image i come from
the single stream (seed, phantom-namespace + i), so any image of a dataset
can be regenerated alone, and generation parallelizes trivially.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .numerics import F32, STREAM_PHANTOM, RngStream


@dataclass
class PhantomConfig:
    height: int = 256
    width: int = 256
    axis_range: tuple = (16.0, 64.0)     # ellipse semi-axes, pixels
    blur_range: tuple = (1.0, 4.0)       # boundary blur std, pixels
    speckle_range: tuple = (0.05, 0.3)   # multiplicative noise strength
    background: float = 0.55
    foreground: float = 0.35
    seed: int = 0

    def validate(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("image extents must be positive")
        if not 0 < self.axis_range[0] <= self.axis_range[1]:
            raise ValueError("axis_range must satisfy 0 < lo <= hi")
        for name in ("blur_range", "speckle_range"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi")
        if not (0 <= self.foreground <= 1 and 0 <= self.background <= 1):
            raise ValueError("intensities must lie in [0, 1]")
        # pixel coordinates span [0, extent-1]; the largest lesion must fit
        # with its center a full margin inside that range
        if 2 * self.axis_range[1] > min(self.height, self.width) - 1:
            raise ValueError("largest axis does not fit inside the image")


def synth_phantom(config, rng):
    """One (image, mask) pair; deterministic given the rng stream."""
    config.validate()
    h, w = config.height, config.width
    ax_lo, ax_hi = config.axis_range
    bl_lo, bl_hi = config.blur_range
    sp_lo, sp_hi = config.speckle_range

    u = rng.uniform(7)
    a = ax_lo + (ax_hi - ax_lo) * u[0]
    b = ax_lo + (ax_hi - ax_lo) * u[1]
    theta = np.pi * u[2]
    margin = max(a, b)
    cx = margin + (w - 1 - 2 * margin) * u[3]
    cy = margin + (h - 1 - 2 * margin) * u[4]
    blur = bl_lo + (bl_hi - bl_lo) * u[5]
    speckle = sp_lo + (sp_hi - sp_lo) * u[6]

    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs - cx
    dy = ys - cy
    ct, st = np.cos(theta), np.sin(theta)
    xr = dx * ct + dy * st
    yr = -dx * st + dy * ct
    mask = ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0).astype(np.uint8)

    image = np.where(mask, F32(config.foreground), F32(config.background)).astype(F32)
    if blur > 0:
        image = gaussian_filter(image, sigma=blur, mode="nearest")
    if speckle > 0:
        noise = rng.normal(h * w).reshape(h, w)
        image = image * (F32(1.0) + F32(speckle) * noise)
    return np.clip(image, F32(0.0), F32(1.0)), mask


def synth_dataset(config, count):
    """List of (image, mask) pairs on per-image streams from config.seed."""
    if count < 1:
        raise ValueError("count must be positive")
    out = []
    for i in range(count):
        rng = RngStream(config.seed, STREAM_PHANTOM + i)
        out.append(synth_phantom(config, rng))
    return out
