"""Residual-spline hyper-map.

The hyper-map turns a token into the m per-channel mask weights. Two
variants share the first affine layer (d -> h, tanh): "mlp" finishes with a
second affine layer, "kan" replaces that layer by a KanLayer: the same
affine map kept frozen plus one trainable cubic B-spline per edge, with
coefficients starting at zero. Zero coefficients make the kan variant
reproduce the mlp bit-for-bit, which is the property training must not
destroy and pruning analysis relies on.

Channel importance is read off the kan layer's per-edge activations: the
fraction of positive values per output channel ranks channels, and pruning
keeps the top few by masking, never by deleting weights.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .numerics import F32, affine, as_f32

GRID_MIN = -3.0
GRID_MAX = 3.0
GRID_INTERVALS = 8
SPLINE_ORDER = 3
DEFAULT_KEEP = 4


def make_grid(gmin=GRID_MIN, gmax=GRID_MAX, intervals=GRID_INTERVALS, order=SPLINE_ORDER):
    """Uniform knot vector on [gmin, gmax] with `order` extension knots per side."""
    if not gmin < gmax:
        raise ValueError("grid bounds must satisfy gmin < gmax")
    if intervals < 1:
        raise ValueError("need at least one grid interval")
    step = (gmax - gmin) / intervals
    idx = np.arange(-order, intervals + order + 1, dtype=np.float64)
    return (gmin + step * idx).astype(F32)


def bspline_basis(x, grid=None, order=SPLINE_ORDER):
    """B-spline basis values at x (scalar or 1-D array of positions).

    Input outside the grid interior is clamped to the boundary. Returns
    len(grid) - order - 1 values per position, summing to one inside the
    interior. order=0 degenerates to the knot-interval indicator. With no
    grid given, the default [-3, 3] knot vector is used.
    """
    grid = make_grid() if grid is None else as_f32(grid, "grid")
    if grid.ndim != 1 or grid.shape[0] < order + 2:
        raise ValueError("grid must be a knot vector with at least order+2 entries")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("knot vector must be strictly increasing")
    xs = np.atleast_1d(as_f32(x, "x"))
    out = backend.impl().bspline_bases(np.ascontiguousarray(xs.ravel()), grid, order)
    if np.isscalar(x) or getattr(x, "ndim", 0) == 0:
        return out[0]
    return out.reshape(xs.shape + (out.shape[1],))


@dataclass
class KanLayer:
    """Frozen affine map h -> m plus a trainable residual spline per edge."""

    base_weight: np.ndarray  # (m, h), frozen
    base_bias: np.ndarray    # (m,), frozen
    grid: np.ndarray         # knot vector, shared by all edges
    coeffs: np.ndarray       # (m, h, nbasis), trainable
    order: int = SPLINE_ORDER

    def __post_init__(self):
        self.base_weight = as_f32(self.base_weight, "base_weight")
        self.base_bias = as_f32(self.base_bias, "base_bias")
        self.grid = as_f32(self.grid, "grid")
        self.coeffs = as_f32(self.coeffs, "coeffs")
        m, h = self.base_weight.shape
        nb = self.grid.shape[0] - self.order - 1
        if self.base_bias.shape != (m,):
            raise ValueError("base_bias length must match base_weight rows")
        if self.coeffs.shape != (m, h, nb):
            raise ValueError(
                f"coeffs must have shape {(m, h, nb)}, got {self.coeffs.shape}"
            )
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("knot vector must be strictly increasing")

    @property
    def nbasis(self):
        return self.coeffs.shape[2]

    @classmethod
    def from_affine(cls, weight, bias, gmin=GRID_MIN, gmax=GRID_MAX,
                    intervals=GRID_INTERVALS, order=SPLINE_ORDER):
        """Wrap an affine layer; spline residual starts at exactly zero."""
        weight = as_f32(weight, "weight").copy()
        bias = as_f32(bias, "bias").copy()
        grid = make_grid(gmin, gmax, intervals, order)
        m, h = weight.shape
        nb = grid.shape[0] - order - 1
        coeffs = np.zeros((m, h, nb), dtype=F32)
        return cls(weight, bias, grid, coeffs, order)

    def copy(self):
        return KanLayer(self.base_weight.copy(), self.base_bias.copy(),
                        self.grid.copy(), self.coeffs.copy(), self.order)


def kan_forward(layer, x):
    """Layer output and the per-edge activation cache.

    y_j = bias_j + sum_p a_jp with a_jp = base_weight[j,p]*x_p + spline_jp(x_p).
    Returns (y (m,), act (m, h)); act is what positive-ratio analysis counts.
    """
    x = as_f32(x, "x")
    if x.shape != (layer.base_weight.shape[1],):
        raise ValueError(f"x must have length {layer.base_weight.shape[1]}")
    impl = backend.impl()
    bases = impl.bspline_bases(x, layer.grid, layer.order)
    act, y0 = impl.kan_act(x, bases, layer.base_weight, layer.coeffs)
    return y0 + layer.base_bias, act


def kan_forward_batch(layer, xs):
    """Rows of xs (n, h) through the layer -> (n, m); no activation cache."""
    xs = as_f32(xs, "xs")
    n, h = xs.shape
    impl = backend.impl()
    bases = impl.bspline_bases(np.ascontiguousarray(xs.ravel()), layer.grid, layer.order)
    bases = np.ascontiguousarray(bases.reshape(n, h, layer.nbasis))
    out = impl.kan_batch(xs, bases, layer.base_weight, layer.coeffs)
    out += layer.base_bias[None, :]
    return out


def kan_coeff_grad(layer, x, upstream):
    """d(upstream . y)/d(coeffs): exactly upstream[j] * B_i(x_p), shape (m, h, nb).

    The layer output is linear in the coefficients, so this is exact and does
    not depend on the current coefficient values.
    """
    x = as_f32(x, "x")
    upstream = as_f32(upstream, "upstream")
    m, h = layer.base_weight.shape
    if x.shape != (h,) or upstream.shape != (m,):
        raise ValueError("x/upstream shapes do not match the layer")
    bases = backend.impl().bspline_bases(x, layer.grid, layer.order)
    return upstream[:, None, None] * bases[None, :, :]


@dataclass
class HyperMap:
    """Token (d) -> hidden (h, tanh) -> channel weights (m)."""

    w1: np.ndarray           # (d, h)
    b1: np.ndarray           # (h,)
    variant: str = "mlp"     # "mlp" | "kan"
    w2: np.ndarray = None    # (h, m), mlp only
    b2: np.ndarray = None    # (m,), mlp only
    kan: KanLayer = None     # kan only

    def __post_init__(self):
        self.w1 = as_f32(self.w1, "w1")
        self.b1 = as_f32(self.b1, "b1")
        if self.variant == "mlp":
            if self.w2 is None or self.b2 is None:
                raise ValueError("mlp variant needs w2 and b2")
            self.w2 = as_f32(self.w2, "w2")
            self.b2 = as_f32(self.b2, "b2")
        elif self.variant == "kan":
            if self.kan is None:
                raise ValueError("kan variant needs a KanLayer")
        else:
            raise ValueError(f"unknown hyper-map variant {self.variant!r}")

    @property
    def out_dim(self):
        if self.variant == "mlp":
            return self.w2.shape[1]
        return self.kan.base_weight.shape[0]

    def hidden(self, tokens):
        """(n, d) tokens -> (n, h) tanh features."""
        return np.tanh(affine(tokens, self.w1, self.b1))

    def weights(self, tokens):
        """(n, d) tokens -> (n, m) mask weights through the active variant."""
        hid = self.hidden(tokens)
        if self.variant == "mlp":
            return affine(hid, self.w2, self.b2)
        return kan_forward_batch(self.kan, hid)

    def base_weights(self, tokens):
        """Same map with the spline residual ignored (frozen path)."""
        hid = self.hidden(tokens)
        if self.variant == "mlp":
            return affine(hid, self.w2, self.b2)
        wt = np.ascontiguousarray(self.kan.base_weight.T)
        return affine(hid, wt, self.kan.base_bias)

    def copy(self):
        if self.variant == "mlp":
            return HyperMap(self.w1.copy(), self.b1.copy(), "mlp",
                            self.w2.copy(), self.b2.copy())
        return HyperMap(self.w1.copy(), self.b1.copy(), "kan", kan=self.kan.copy())


def to_kan(hyper, gmin=GRID_MIN, gmax=GRID_MAX, intervals=GRID_INTERVALS,
           order=SPLINE_ORDER):
    """Convert an mlp hyper-map to the kan variant.

    The spline layer's frozen base is the mlp's final affine layer verbatim
    (transposed into row-major per-channel form); coefficients start at zero,
    so the converted map computes identical weights.
    """
    if hyper.variant != "mlp":
        raise ValueError("to_kan expects the mlp variant")
    layer = KanLayer.from_affine(np.ascontiguousarray(hyper.w2.T), hyper.b2,
                                 gmin, gmax, intervals, order)
    return HyperMap(hyper.w1.copy(), hyper.b1.copy(), "kan", kan=layer)


@dataclass
class PruneReport:
    """Channel ranking by positive activation ratio."""

    positive_ratio: np.ndarray  # (m,) in [0, 1]
    ranking: np.ndarray         # channel indices, best first
    kept: np.ndarray            # the retained channel indices

    def __post_init__(self):
        self.positive_ratio = np.asarray(self.positive_ratio, dtype=np.float64)
        self.ranking = np.asarray(self.ranking, dtype=np.int64)
        self.kept = np.asarray(self.kept, dtype=np.int64)
        m = self.positive_ratio.shape[0]
        if np.any(self.positive_ratio < 0) or np.any(self.positive_ratio > 1):
            raise ValueError("positive_ratio entries must lie in [0, 1]")
        if sorted(self.ranking.tolist()) != list(range(m)):
            raise ValueError("ranking must be a permutation of 0..m-1")
        if self.kept.size == 0 or np.any(self.kept < 0) or np.any(self.kept >= m):
            raise ValueError("kept must be a nonempty subset of 0..m-1")


def rank_channels(ratios):
    # descending ratio, ties by ascending channel index
    m = len(ratios)
    return sorted(range(m), key=lambda j: (-float(ratios[j]), j))


def positive_ratio(model, hypermap, dataset, keep=DEFAULT_KEEP):
    """Rank hyper-map channels by how often their edge activations are positive.

    dataset: list of (image, box) pairs. Each item is encoded with `model`,
    its deterministic token pushed through `hypermap`'s first layer, and the
    kan layer's per-edge activations a_jp counted; ratio_j is the fraction of
    strictly positive values over all items and edges p.
    """
    from .decoder import encode, generate_token

    if hypermap.variant != "kan":
        raise ValueError("positive_ratio needs the kan variant")
    items = list(dataset)
    if not items:
        raise ValueError("dataset is empty")
    layer = hypermap.kan
    m = layer.base_weight.shape[0]
    if not 1 <= keep <= m:
        raise ValueError(f"keep must be in 1..{m}")
    pos = np.zeros(m, dtype=np.int64)
    total = 0
    for image, box in items:
        context, _ = encode(model, image, box)
        t = generate_token(model, context)
        x = hypermap.hidden(t[None, :])[0]
        _, act = kan_forward(layer, x)
        pos += np.count_nonzero(act > 0, axis=1)
        total += act.shape[1]
    ratios = pos / float(total)
    ranking = rank_channels(ratios)
    kept = np.array(sorted(ranking[:keep]), dtype=np.int64)
    return PruneReport(ratios, np.array(ranking, dtype=np.int64), kept)


def prune(model, report):
    """Model with prune_mask true exactly on report.kept; weights untouched."""
    out = model.copy()
    mask = np.zeros(model.m, dtype=bool)
    mask[report.kept] = True
    out.prune_mask = mask
    return out
