"""Token-level Bayesian inference.

Phase 1 measures per-dimension token statistics over an unlabeled corpus:
sigma is the population standard deviation of each token coordinate, d
numbers total, the only quantity inference adds on top of the
deterministic decoder. Phase 2 decodes one image by sampling K tokens
t' = t + sigma*eps, pushing each through the hyper-map and mask product,
and reporting the per-pixel sample mean and population standard deviation
(capped at 0.5, the largest std any [0,1]-valued pixel can have).

Sample i draws its noise from rng stream_id base+i, so samples could be
computed in any order or in parallel; the moment accumulation happens in
index order over fixed-size chunks, which keeps results bit-identical for
every chunking and equal to a strictly serial pass. Accumulating shifted
moments (differences against the first sample) rather than raw sums makes
the sigma=0 case collapse exactly: every difference is 0.0, so the mean
equals the single-sample mask bit-for-bit and the uncertainty is exactly
zero, with no special-case branch involved.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .decoder import encode, generate_token, kept_pixels, mask_logits
from .errors import NumericError
from .numerics import F32, RngStream, as_f32, column_mean_std, sigmoid

DEFAULT_K = 10
CHUNK = 64


@dataclass
class TokenStats:
    sigma: np.ndarray  # (d,) nonnegative
    mean: np.ndarray   # (d,) diagnostic only
    count: int

    def __post_init__(self):
        self.sigma = as_f32(self.sigma, "sigma")
        self.mean = as_f32(self.mean, "mean")
        self.count = int(self.count)
        if self.sigma.ndim != 1 or self.sigma.shape != self.mean.shape:
            raise ValueError("sigma and mean must be equal-length vectors")
        if self.count < 1:
            raise ValueError("count must be at least 1")
        if not np.all(np.isfinite(self.sigma)) or np.any(self.sigma < 0):
            raise NumericError("sigma must be finite and nonnegative")

    @classmethod
    def zero(cls, d):
        return cls(np.zeros(d, dtype=F32), np.zeros(d, dtype=F32), 1)


@dataclass
class MaskPrediction:
    mean_mask: np.ndarray    # (H, W) in [0, 1]
    uncertainty: np.ndarray  # (H, W) in [0, 0.5]
    samples_used: int


def compute_token_stats(tokens):
    """Population column statistics of a token corpus (N, d), divisor N."""
    tokens = as_f32(tokens, "tokens")
    if tokens.ndim != 2 or tokens.shape[0] < 1:
        raise ValueError("tokens must be a nonempty (N, d) array")
    if not np.all(np.isfinite(tokens)):
        raise NumericError("token corpus contains non-finite values")
    mean, sigma = column_mean_std(tokens)
    return TokenStats(sigma, mean, tokens.shape[0])


def sample_token(t, stats, rng):
    """One reparameterized draw t + sigma*eps with eps fresh from rng."""
    t = as_f32(t, "t")
    if t.shape != stats.sigma.shape:
        raise ValueError("token length does not match stats")
    eps = rng.normal(t.shape[0])
    return t + stats.sigma * eps


def moments_over_rows(rows, k):
    """Mean and population std (divisor k) over the rows of (k, n).

    Shifted accumulation against row 0 in index order; shared by infer and
    the training loop so both see identical mask statistics.
    """
    ref = rows[0]
    n = rows.shape[1]
    s1 = np.zeros(n, dtype=F32)
    s2 = np.zeros(n, dtype=F32)
    backend.impl().accum_moments(rows[1:], ref, s1, s2)
    return _finish_moments(ref, s1, s2, k)


def _finish_moments(ref, s1, s2, k):
    kf = F32(k)
    m1 = s1 / kf
    mean = ref + m1
    var = s2 / kf - m1 * m1
    unc = np.sqrt(np.maximum(var, F32(0.0)))
    return np.clip(mean, F32(0.0), F32(1.0)), np.minimum(unc, F32(0.5))


def infer(model, image, box, stats, k=DEFAULT_K, rng=None, chunk=CHUNK):
    """Monte-Carlo mask decoding: mean mask + uncertainty map.

    Q and the token are computed once; only the K token samples and their
    (cheap) hyper-map weights vary. rng supplies the base stream: sample i
    reads stream_id rng.stream_id + i.
    """
    k = int(k)
    if k < 1:
        raise ValueError("K must be at least 1")
    if chunk < 1:
        raise ValueError("chunk must be at least 1")
    if rng is None:
        rng = RngStream(0, 0)
    if stats.sigma.shape != (model.d,):
        raise ValueError(f"stats.sigma must have length {model.d}")

    image = as_f32(image, "image")
    h, w = image.shape
    context, q = encode(model, image, box)
    t = generate_token(model, context)
    keep, _, q_kept_t = kept_pixels(q, model.prune_mask)
    sigma = stats.sigma

    ref = None
    s1 = np.zeros(h * w, dtype=F32)
    s2 = np.zeros(h * w, dtype=F32)
    impl = backend.impl()
    for start in range(0, k, chunk):
        cn = min(chunk, k - start)
        eps = np.empty((cn, model.d), dtype=F32)
        for i in range(cn):
            eps[i] = rng.child(start + i).normal(model.d)
        tokens = t[None, :] + sigma[None, :] * eps
        wrows = model.hyper.weights(tokens)
        y = sigmoid(mask_logits(np.ascontiguousarray(wrows[:, keep]), q_kept_t))
        lo = 0
        if ref is None:
            ref = y[0].copy()
            lo = 1
        impl.accum_moments(y[lo:], ref, s1, s2)
    mean, unc = _finish_moments(ref, s1, s2, k)
    return MaskPrediction(mean.reshape(h, w), unc.reshape(h, w), k)


def deterministic_mask(model, image, box):
    """The no-noise mask: literally infer with K = 1 and sigma = 0."""
    pred = infer(model, image, box, TokenStats.zero(model.d), k=1,
                 rng=RngStream(0, 0))
    return pred.mean_mask
