"""Promptable mask decoder (toy scale).

An image plus a box prompt become per-pixel features Q and one output token
t: 8x8 patches are linearly embedded, mean-pooled together with the
normalized box corners into a context vector, and a two-layer head turns
that context into t. Q comes from bilinearly upsampling the patch features
back to pixel resolution and projecting each pixel to m channels.

The mask is sigmoid(w . Q_p) per pixel, where w is produced from t by the
hyper-map, so the token acts as input-dependent weights of a linear mask
head. That reading makes two things checkable: a constant-head decoder
reproduces any static-weight mask exactly, and replacing w by a perturbed
token changes the mask by at most (1/4)*||dw||_F*||Q||_F in Frobenius norm
(1/4 is the sigmoid's Lipschitz constant). verify_error_bound evaluates
that inequality directly.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .numerics import (F32, STREAM_INIT, RngStream, affine, as_f32,
                       frobenius_norm, sigmoid)
from .sokan import HyperMap, to_kan

DEFAULT_D = 256
DEFAULT_M = 32
DEFAULT_C = 64
DEFAULT_PATCH = 8
DEFAULT_HIDDEN = 64

BOUND_MARGIN = 1e-5
SIGMOID_LIPSCHITZ = 0.25


@dataclass(frozen=True)
class BoxPrompt:
    """Pixel-coordinate box, inclusive-exclusive: [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x0 >= self.x1 or self.y0 >= self.y1:
            raise ValueError(f"degenerate box ({self.x0},{self.y0},{self.x1},{self.y1})")

    def validate(self, height, width):
        if not (0 <= self.x0 < self.x1 <= width):
            raise ValueError(f"box x-range [{self.x0}, {self.x1}) outside [0, {width}]")
        if not (0 <= self.y0 < self.y1 <= height):
            raise ValueError(f"box y-range [{self.y0}, {self.y1}) outside [0, {height}]")

    def normalized(self, height, width):
        return np.array(
            [self.x0 / width, self.y0 / height, self.x1 / width, self.y1 / height],
            dtype=F32,
        )


@dataclass
class DecoderModel:
    d: int
    m: int
    c: int
    patch: int
    hidden: int
    patch_embed_w: np.ndarray  # (patch*patch, c)
    patch_embed_b: np.ndarray  # (c,)
    context_w: np.ndarray      # (c+4, c)
    context_b: np.ndarray      # (c,)
    token_w1: np.ndarray       # (c, c)
    token_b1: np.ndarray       # (c,)
    token_w2: np.ndarray       # (c, d)
    token_b2: np.ndarray       # (d,)
    pixel_proj_w: np.ndarray   # (c, m)
    pixel_proj_b: np.ndarray   # (m,)
    hyper: HyperMap
    prune_mask: np.ndarray     # (m,) bool

    def __post_init__(self):
        for name in ("patch_embed_w", "patch_embed_b", "context_w", "context_b",
                     "token_w1", "token_b1", "token_w2", "token_b2",
                     "pixel_proj_w", "pixel_proj_b"):
            setattr(self, name, as_f32(getattr(self, name), name))
        self.prune_mask = np.asarray(self.prune_mask, dtype=bool)
        if self.prune_mask.shape != (self.m,):
            raise ValueError(f"prune_mask must have {self.m} entries")
        if not self.prune_mask.any():
            raise ValueError("prune_mask must keep at least one channel")

    def copy(self):
        return DecoderModel(
            self.d, self.m, self.c, self.patch, self.hidden,
            self.patch_embed_w.copy(), self.patch_embed_b.copy(),
            self.context_w.copy(), self.context_b.copy(),
            self.token_w1.copy(), self.token_b1.copy(),
            self.token_w2.copy(), self.token_b2.copy(),
            self.pixel_proj_w.copy(), self.pixel_proj_b.copy(),
            self.hyper.copy(), self.prune_mask.copy(),
        )


def _uniform_tensor(seed, offset, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    rng = RngStream(seed, STREAM_INIT + offset)
    flat = rng.uniform_in(-bound, bound, int(np.prod(shape)))
    return flat.astype(F32).reshape(shape)


def init_model(seed=0, d=DEFAULT_D, m=DEFAULT_M, c=DEFAULT_C,
               patch=DEFAULT_PATCH, hidden=DEFAULT_HIDDEN, variant="mlp"):
    """Randomly initialized decoder; weights uniform in +-1/sqrt(fan_in).

    Every tensor draws from its own named stream, so the kan variant (built
    by converting the mlp one) shares all frozen weights with its mlp twin.
    """
    if variant not in ("mlp", "kan"):
        raise ValueError(f"unknown variant {variant!r}")
    pp = patch * patch
    tensors = [
        ("patch_embed_w", (pp, c), pp),
        ("patch_embed_b", (c,), pp),
        ("context_w", (c + 4, c), c + 4),
        ("context_b", (c,), c + 4),
        ("token_w1", (c, c), c),
        ("token_b1", (c,), c),
        ("token_w2", (c, d), c),
        ("token_b2", (d,), c),
        ("pixel_proj_w", (c, m), c),
        ("pixel_proj_b", (m,), c),
        ("hyper_w1", (d, hidden), d),
        ("hyper_b1", (hidden,), d),
        ("hyper_w2", (hidden, m), hidden),
        ("hyper_b2", (m,), hidden),
    ]
    vals = {name: _uniform_tensor(seed, i, shape, fan)
            for i, (name, shape, fan) in enumerate(tensors)}
    hyper = HyperMap(vals["hyper_w1"], vals["hyper_b1"], "mlp",
                     vals["hyper_w2"], vals["hyper_b2"])
    if variant == "kan":
        hyper = to_kan(hyper)
    return DecoderModel(
        d, m, c, patch, hidden,
        vals["patch_embed_w"], vals["patch_embed_b"],
        vals["context_w"], vals["context_b"],
        vals["token_w1"], vals["token_b1"],
        vals["token_w2"], vals["token_b2"],
        vals["pixel_proj_w"], vals["pixel_proj_b"],
        hyper, np.ones(m, dtype=bool),
    )


def extract_patches(image, patch):
    h, w = image.shape
    gh, gw = h // patch, w // patch
    tiles = image.reshape(gh, patch, gw, patch).transpose(0, 2, 1, 3)
    return np.ascontiguousarray(tiles.reshape(gh * gw, patch * patch))


def encode(model, image, box):
    """Image + box -> (context (c,), Q ((H*W), m)).

    The box feeds only the context (and through it the token); Q depends on
    the image alone.
    """
    image = as_f32(image, "image")
    if image.ndim != 2:
        raise ValueError("image must be 2-D grayscale")
    h, w = image.shape
    p = model.patch
    if h % p or w % p:
        raise ValueError(f"image extents must be multiples of the patch size {p}")
    if h < 2 * p or w < 2 * p:
        raise ValueError(f"image must be at least {2 * p} pixels on each side")
    box.validate(h, w)

    feats = affine(extract_patches(image, p), model.patch_embed_w, model.patch_embed_b)
    pooled = feats.mean(axis=0)
    ctx_in = np.concatenate([pooled, box.normalized(h, w)])[None, :]
    context = affine(ctx_in, model.context_w, model.context_b)[0]

    gh, gw = h // p, w // p
    up = backend.impl().bilinear_upsample(
        np.ascontiguousarray(feats.reshape(gh, gw, model.c)), h, w)
    q = affine(up.reshape(h * w, model.c), model.pixel_proj_w, model.pixel_proj_b)
    return context, q


def generate_token(model, context):
    """Context -> token t (d,): two affine layers with tanh between."""
    context = as_f32(context, "context")
    h1 = np.tanh(affine(context[None, :], model.token_w1, model.token_b1))
    return affine(h1, model.token_w2, model.token_b2)[0]


def kept_pixels(q, prune_mask):
    """Kept-channel views of Q for the mask product.

    Returns (keep_idx, q_kept (HW, kk), q_kept_t (kk, HW)); the transposed
    copy is what the logits kernel consumes. q_kept aliases q when every
    channel is kept, so treat it as read-only.
    """
    keep = np.flatnonzero(prune_mask)
    if keep.size == 0:
        raise ValueError("prune_mask must keep at least one channel")
    q_kept_t = backend.impl().select_transpose(q, keep)
    if keep.size == q.shape[1]:
        q_kept = q
    else:
        q_kept = np.ascontiguousarray(q[:, keep])
    return keep, q_kept, q_kept_t


def mask_logits(w_rows, q_kept_t):
    # (n, kk) weight rows x (kk, HW) -> (n, HW) logits
    return backend.impl().matmul(w_rows, q_kept_t)


def mask_from_weights(w, q, prune_mask, shape):
    """sigmoid(sum over kept channels of Q[p,j]*w[j]), reshaped to `shape`."""
    w = as_f32(w, "w")
    q = as_f32(q, "q")
    if w.ndim != 1 or q.ndim != 2 or q.shape[1] != w.shape[0]:
        raise ValueError("w must be (m,) and q (HW, m)")
    h, wid = shape
    if q.shape[0] != h * wid:
        raise ValueError("q row count must equal H*W")
    keep, _, q_kept_t = kept_pixels(q, prune_mask)
    logits = mask_logits(np.ascontiguousarray(w[keep])[None, :], q_kept_t)
    return sigmoid(logits[0]).reshape(h, wid)


def static_weight_model(model, w):
    """Decoder whose hyper-map emits `w` for every token.

    The second hyper layer is zeroed and its bias set to w, so the token
    path runs end to end yet the mask equals mask_from_weights(w, Q, ...)
    bit-exactly. This is the executable form of the static-vs-dynamic
    weight equivalence.
    """
    w = as_f32(w, "w")
    out = model.copy()
    if w.shape != (model.m,):
        raise ValueError(f"w must have length {model.m}")
    hyper = out.hyper
    if hyper.variant != "mlp":
        raise ValueError("static_weight_model expects the mlp variant")
    hyper.w2 = np.zeros_like(hyper.w2)
    hyper.b2 = w.copy()
    return out


def constant_token_model(model, t):
    """Decoder whose token head emits `t` regardless of the input."""
    t = as_f32(t, "t")
    out = model.copy()
    if t.shape != (model.d,):
        raise ValueError(f"t must have length {model.d}")
    out.token_w2 = np.zeros_like(out.token_w2)
    out.token_b2 = t.copy()
    return out


def verify_error_bound(t, w, q):
    """Evaluate the mask-perturbation bound for weight rows t, w and features q.

    t, w: (k, d) weight rows; q: (n, d). lhs is the Frobenius distance of the
    two sigmoid mask stacks, rhs = (1/4)*||t-w||_F*||q||_F, and holds allows
    a 1e-5 float margin.
    """
    t = np.atleast_2d(as_f32(t, "t"))
    w = np.atleast_2d(as_f32(w, "w"))
    q = np.atleast_2d(as_f32(q, "q"))
    if t.shape != w.shape or t.shape[1] != q.shape[1]:
        raise ValueError("t, w must share a shape and match q's columns")
    qt = np.ascontiguousarray(q.T)
    impl = backend.impl()
    mt = sigmoid(impl.matmul(t, qt))
    mw = sigmoid(impl.matmul(w, qt))
    lhs = frobenius_norm(mt - mw)
    rhs = SIGMOID_LIPSCHITZ * frobenius_norm(t - w) * frobenius_norm(q)
    return lhs, rhs, lhs <= rhs + BOUND_MARGIN


def combination_multiplies_per_pixel(model):
    """Multiplies per pixel per sample in the mask combination product."""
    return int(model.prune_mask.sum())


def count_parameters(model):
    """Total and trainable parameter counts."""
    total = 0
    for t in (model.patch_embed_w, model.patch_embed_b, model.context_w,
              model.context_b, model.token_w1, model.token_b1, model.token_w2,
              model.token_b2, model.pixel_proj_w, model.pixel_proj_b,
              model.hyper.w1, model.hyper.b1):
        total += t.size
    trainable = 0
    if model.hyper.variant == "mlp":
        total += model.hyper.w2.size + model.hyper.b2.size
    else:
        layer = model.hyper.kan
        total += layer.base_weight.size + layer.base_bias.size + layer.coeffs.size
        trainable = layer.coeffs.size
    return {"total": int(total), "trainable": int(trainable)}
