"""Deterministic numeric primitives.

Random numbers come from counter-based Philox streams keyed by
(seed, stream_id), so any draw can be reproduced in isolation without
replaying earlier draws. Purpose constants carve the 64-bit stream-id space
into non-overlapping ranges (high 16 bits) so that independent parts of the
pipeline can never collide on a stream.

Gaussians are produced by an explicit Box-Muller transform in float64 and
cast to float32, keeping the mapping from uniforms to normals pinned down
rather than delegated to a library whose algorithm could change.

Elementwise transforms (sigmoid, tanh) are computed here with numpy in both
kernel backends; only the heavy linear-algebra kernels are dispatched.
"""

import numpy as np

from . import backend

F32 = np.float32

# stream-id namespaces (purpose in high bits, index in low bits)
STREAM_INIT = 1 << 48
STREAM_PHANTOM = 2 << 48
STREAM_PICK = 3 << 48
STREAM_AUG = 4 << 48
STREAM_NOISE = 5 << 48
STREAM_TRAIN_MC = 6 << 48
STREAM_BENCH = 7 << 48

_TWO_PI = 2.0 * np.pi
_TINY = np.finfo(np.float64).tiny


def as_f32(a, name="array"):
    """Contiguous float32 view/copy of `a`; rejects non-numeric input."""
    try:
        out = np.ascontiguousarray(a, dtype=F32)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} is not numeric: {exc}") from exc
    return out


class RngStream:
    """A named, independently seekable random stream.

    Streams with the same (seed, stream_id) yield the same draw sequence in
    any process; distinct stream_ids are statistically independent.
    """

    def __init__(self, seed, stream_id=0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in uint64")
        if not 0 <= stream_id < 2**64:
            raise ValueError("stream_id must fit in uint64")
        self.seed = seed
        self.stream_id = stream_id
        key = np.array([seed, stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def child(self, offset):
        """Fresh stream at stream_id + offset (same seed)."""
        return RngStream(self.seed, self.stream_id + int(offset))

    def uniform(self, n):
        """n float64 draws in [0, 1)."""
        return self._gen.random(int(n))

    def uniform_in(self, lo, hi, n=1):
        """n float64 draws in [lo, hi)."""
        u = self.uniform(n)
        return lo + (hi - lo) * u

    def normal(self, n):
        """n float32 standard normals via Box-Muller."""
        n = int(n)
        if n <= 0:
            return np.zeros(0, dtype=F32)
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        z0, z1 = box_muller(u[0::2], u[1::2])
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = z0
        out[1::2] = z1
        return out[:n].astype(F32)


def box_muller(u1, u2):
    """Map uniform pairs in [0,1) to two arrays of standard normals.

    u1 = 0 would take log to -inf, so it is nudged to the smallest positive
    float64.
    """
    u1 = np.maximum(np.asarray(u1, dtype=np.float64), _TINY)
    u2 = np.asarray(u2, dtype=np.float64)
    r = np.sqrt(-2.0 * np.log(u1))
    ang = _TWO_PI * u2
    return r * np.cos(ang), r * np.sin(ang)


def matmul(a, b):
    """Float32 matrix product (m,k) @ (k,n) with a fixed summation order."""
    a = as_f32(a, "a")
    b = as_f32(b, "b")
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions differ: {a.shape} vs {b.shape}")
    return backend.impl().matmul(a, b)


def affine(x, wt, b):
    # rows of x through a linear map plus bias; bias joins after the full
    # product sum so a zero map hits the bias exactly
    out = backend.impl().matmul(x, wt)
    out += b[None, :]
    return out


def sigmoid(x):
    """Numerically stable logistic function, float32 in/out."""
    x = np.asarray(x, dtype=F32)
    out = np.empty_like(x)
    pos = x >= 0
    neg = ~pos
    one = F32(1.0)
    out[pos] = one / (one + np.exp(-x[pos]))
    e = np.exp(x[neg])
    out[neg] = e / (one + e)
    return out


def tanh(x):
    return np.tanh(np.asarray(x, dtype=F32))


def column_mean_std(rows):
    """Per-column mean and population standard deviation (divisor N).

    Accumulates in float64, returns float32.
    """
    rows = as_f32(rows, "rows")
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError("column_mean_std expects a non-empty 2-D array")
    mean64 = rows.mean(axis=0, dtype=np.float64)
    d = rows.astype(np.float64) - mean64[None, :]
    var64 = np.mean(d * d, axis=0)
    return mean64.astype(F32), np.sqrt(var64).astype(F32)


def frobenius_norm(a):
    """Square root of the sum of squared entries, accumulated in float64."""
    a = np.asarray(a, dtype=F32)
    return float(np.sqrt(np.sum(a.astype(np.float64) ** 2)))
