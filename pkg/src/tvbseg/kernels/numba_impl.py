"""Numba-compiled kernels.

Scalar-loop twins of kernels/numpy_impl.py. Loop nests are arranged so the
innermost loop runs over a contiguous output axis where possible, but the
per-element operation order (ascending contraction index, one shared
expression tree for interpolation and spline recursion) is kept identical
to the numpy module, which makes the two backends bit-identical.

fastmath stays off: it would license FMA contraction and reassociation,
breaking that equivalence.
"""

import numpy as np
from numba import njit

NAME = "numba"

F32 = np.float32


@njit(cache=True)
def matmul(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float32)
    for i in range(m):
        for kk in range(k):
            av = a[i, kk]
            for j in range(n):
                out[i, j] += av * b[kk, j]
    return out


@njit(cache=True)
def select_transpose(q, idx):
    # (n, m) rows, kept column ids -> (kk, n) contiguous transpose.
    # Pure data movement; blocked over rows so a block of q stays cached
    # across the kk passes instead of re-streaming all of q per column.
    n = q.shape[0]
    kk = idx.shape[0]
    out = np.empty((kk, n), dtype=np.float32)
    block = 256
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        for j in range(kk):
            c = idx[j]
            for i in range(i0, i1):
                out[j, i] = q[i, c]
    return out


@njit(cache=True)
def bilinear_upsample(feat, hh, ww):
    gh, gw, c = feat.shape
    out = np.empty((hh, ww, c), dtype=np.float32)
    half = np.float32(0.5)
    one = np.float32(1.0)
    zero = np.float32(0.0)
    sy = np.float32(gh) / np.float32(hh)
    sx = np.float32(gw) / np.float32(ww)
    ymax = np.float32(gh - 1)
    xmax = np.float32(gw - 1)
    for y in range(hh):
        fy = (np.float32(y) + half) * sy - half
        if fy < zero:
            fy = zero
        if fy > ymax:
            fy = ymax
        y0 = int(fy)
        if y0 > gh - 2:
            y0 = gh - 2
        dy = fy - np.float32(y0)
        for x in range(ww):
            fx = (np.float32(x) + half) * sx - half
            if fx < zero:
                fx = zero
            if fx > xmax:
                fx = xmax
            x0 = int(fx)
            if x0 > gw - 2:
                x0 = gw - 2
            dx = fx - np.float32(x0)
            w00 = (one - dy) * (one - dx)
            w01 = (one - dy) * dx
            w10 = dy * (one - dx)
            w11 = dy * dx
            for ch in range(c):
                v = w00 * feat[y0, x0, ch] + w01 * feat[y0, x0 + 1, ch]
                v = v + w10 * feat[y0 + 1, x0, ch]
                v = v + w11 * feat[y0 + 1, x0 + 1, ch]
                out[y, x, ch] = v
    return out


@njit(cache=True)
def bspline_bases(xs, knots, order):
    n = xs.shape[0]
    nk = knots.shape[0]
    nb = nk - order - 1
    lo = knots[order]
    hi = knots[nk - 1 - order]
    out = np.empty((n, nb), dtype=np.float32)
    work = np.empty(nk - 1, dtype=np.float32)
    for r in range(n):
        x = xs[r]
        if x < lo:
            x = lo
        if x > hi:
            x = hi
        for i in range(nk - 1):
            if knots[i] <= x < knots[i + 1]:
                work[i] = np.float32(1.0)
            else:
                work[i] = np.float32(0.0)
        if knots[nk - 2] <= x <= knots[nk - 1]:
            work[nk - 2] = np.float32(1.0)
        else:
            work[nk - 2] = np.float32(0.0)
        for p in range(1, order + 1):
            for i in range(nk - p - 1):
                left = (x - knots[i]) / (knots[i + p] - knots[i])
                right = (knots[i + p + 1] - x) / (knots[i + p + 1] - knots[i + 1])
                work[i] = left * work[i] + right * work[i + 1]
        for i in range(nb):
            out[r, i] = work[i]
    return out


@njit(cache=True)
def kan_act(x, bases, bw, coeffs):
    m, h = bw.shape
    s = coeffs.shape[2]
    act = np.empty((m, h), dtype=np.float32)
    y0 = np.zeros(m, dtype=np.float32)
    for j in range(m):
        for p in range(h):
            a = bw[j, p] * x[p]
            for si in range(s):
                a = a + coeffs[j, p, si] * bases[p, si]
            act[j, p] = a
            y0[j] += a
    return act, y0


@njit(cache=True)
def kan_batch(xs, bases, bw, coeffs):
    n, h = xs.shape
    m = bw.shape[0]
    s = coeffs.shape[2]
    out = np.zeros((n, m), dtype=np.float32)
    for r in range(n):
        for j in range(m):
            t = np.float32(0.0)
            for p in range(h):
                a = bw[j, p] * xs[r, p]
                for si in range(s):
                    a = a + coeffs[j, p, si] * bases[r, p, si]
                t += a
            out[r, j] = t
    return out


@njit(cache=True)
def accum_moments(rows, ref, s1, s2):
    r, n = rows.shape
    for i in range(r):
        for p in range(n):
            d = rows[i, p] - ref[p]
            s1[p] += d
            s2[p] += d * d
