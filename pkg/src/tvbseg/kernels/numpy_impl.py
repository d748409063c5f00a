"""Pure-numpy kernels.

These are the reference implementations. Each one fixes a per-element
floating-point evaluation order (reductions ascend over the contraction
index, B-spline recursions share one expression tree) and `numba_impl`
mirrors that order exactly, which is what makes the two backends
bit-identical. Do not "optimize" a reduction here into np.sum/np.dot:
those use pairwise summation and would change the bits.

All kernels expect float32 C-contiguous inputs; callers are responsible
for that (see tvbseg.backend).
"""

import numpy as np

NAME = "numpy"

F32 = np.float32


def matmul(a, b):
    # (m, k) @ (k, n) -> (m, n), accumulated in ascending-k order
    m, k = a.shape
    _, n = b.shape
    out = np.zeros((m, n), dtype=F32)
    for kk in range(k):
        out += a[:, kk : kk + 1] * b[kk, :]
    return out


def select_transpose(q, idx):
    # (n, m) rows, kept column ids -> (kk, n) contiguous transpose
    return np.ascontiguousarray(q[:, idx].T)


def bilinear_upsample(feat, hh, ww):
    # (gh, gw, c) -> (hh, ww, c), half-pixel centers, edge-clamped
    gh, gw, c = feat.shape
    half = F32(0.5)
    one = F32(1.0)
    sy = F32(gh) / F32(hh)
    sx = F32(gw) / F32(ww)

    fy = (np.arange(hh, dtype=F32) + half) * sy - half
    fy = np.minimum(np.maximum(fy, F32(0.0)), F32(gh - 1))
    y0 = np.minimum(fy.astype(np.int64), gh - 2)
    dy = fy - y0.astype(F32)

    fx = (np.arange(ww, dtype=F32) + half) * sx - half
    fx = np.minimum(np.maximum(fx, F32(0.0)), F32(gw - 1))
    x0 = np.minimum(fx.astype(np.int64), gw - 2)
    dx = fx - x0.astype(F32)

    w00 = ((one - dy)[:, None] * (one - dx)[None, :])[..., None]
    w01 = ((one - dy)[:, None] * dx[None, :])[..., None]
    w10 = (dy[:, None] * (one - dx)[None, :])[..., None]
    w11 = (dy[:, None] * dx[None, :])[..., None]

    ya = y0[:, None]
    xa = x0[None, :]
    v00 = feat[ya, xa, :]
    v01 = feat[ya, xa + 1, :]
    v10 = feat[ya + 1, xa, :]
    v11 = feat[ya + 1, xa + 1, :]

    out = w00 * v00 + w01 * v01
    out = out + w10 * v10
    out = out + w11 * v11
    return np.ascontiguousarray(out)


def bspline_bases(xs, knots, order):
    # (n,) evaluated against a strictly increasing knot vector -> (n, nb)
    # where nb = len(knots) - order - 1. Cox-de Boor, iterative.
    nk = knots.shape[0]
    lo = knots[order]
    hi = knots[nk - 1 - order]
    x = np.minimum(np.maximum(xs, lo), hi)

    b = ((x[:, None] >= knots[None, : nk - 1]) & (x[:, None] < knots[None, 1:])).astype(F32)
    # right edge of the very last interval is inclusive (only reachable at order 0)
    b[:, nk - 2] = ((x >= knots[nk - 2]) & (x <= knots[nk - 1])).astype(F32)
    for p in range(1, order + 1):
        t_i = knots[: nk - p - 1]
        t_ip = knots[p : nk - 1]
        t_ip1 = knots[p + 1 : nk]
        t_i1 = knots[1 : nk - p]
        left = (x[:, None] - t_i[None, :]) / (t_ip - t_i)[None, :]
        right = (t_ip1[None, :] - x[:, None]) / (t_ip1 - t_i1)[None, :]
        b = left * b[:, : nk - p - 1] + right * b[:, 1 : nk - p]
    return np.ascontiguousarray(b)


def kan_act(x, bases, bw, coeffs):
    # x (h,), bases (h, s), bw (m, h), coeffs (m, h, s)
    # -> per-edge activations (m, h) and their row sums (m,)
    m, h = bw.shape
    s = coeffs.shape[2]
    act = bw * x[None, :]
    for si in range(s):
        act = act + coeffs[:, :, si] * bases[None, :, si]
    y0 = np.zeros(m, dtype=F32)
    for p in range(h):
        y0 += act[:, p]
    return np.ascontiguousarray(act), y0


def kan_batch(xs, bases, bw, coeffs):
    # xs (n, h), bases (n, h, s), bw (m, h), coeffs (m, h, s) -> (n, m)
    n, h = xs.shape
    m = bw.shape[0]
    s = coeffs.shape[2]
    act = bw[None, :, :] * xs[:, None, :]
    for si in range(s):
        act = act + coeffs[None, :, :, si] * bases[:, None, :, si]
    out = np.zeros((n, m), dtype=F32)
    for p in range(h):
        out += act[:, :, p]
    return out


def accum_moments(rows, ref, s1, s2):
    # rows (r, n); accumulates shifted first/second moments into s1, s2
    r = rows.shape[0]
    for i in range(r):
        d = rows[i] - ref
        s1 += d
        s2 += d * d
