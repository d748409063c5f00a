"""Mask overlap metric and box-prompt derivation."""

import numpy as np

from .decoder import BoxPrompt


def dice(a, b):
    """2|A&B| / (|A|+|B|); both masks empty counts as perfect agreement (1.0)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    a = a > 0
    b = b > 0
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    inter = int(np.logical_and(a, b).sum())
    return 2.0 * inter / total


def expand_box(mask, pixels):
    """Tight foreground bounding box grown by `pixels` per side, clipped.

    Box coordinates are inclusive-exclusive, so the tight box of a blob
    spanning columns 3..7 is x0=3, x1=8.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    if pixels < 0:
        raise ValueError("expansion must be nonnegative")
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise ValueError("mask is empty; no box to derive")
    h, w = mask.shape
    return BoxPrompt(
        x0=max(int(xs.min()) - pixels, 0),
        y0=max(int(ys.min()) - pixels, 0),
        x1=min(int(xs.max()) + 1 + pixels, w),
        y1=min(int(ys.max()) + 1 + pixels, h),
    )


def box_or_full(mask, pixels):
    """expand_box, falling back to the whole frame when the mask is empty."""
    mask = np.asarray(mask)
    if mask.any():
        return expand_box(mask, pixels)
    h, w = mask.shape
    return BoxPrompt(0, 0, w, h)
