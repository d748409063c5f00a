"""Self-supervised spline adaptation.

Each step augments one dataset item, lets the frozen base path label it
(threshold at 0.5, ties to foreground), runs the spline path with K_train
sampled tokens, and minimizes

    L = (1 - mu)/(eps + mu) * MSE(mean mask, pseudo-label)  +  ||w_kan - w_base||^2

where mu is the spatial mean of the sample's uncertainty map rescaled to
[0, 1] (treated as a constant: high disagreement among the sampled masks
down-weights a pseudo-label the teacher itself is unsure of), and the
second term anchors the spline path's deterministic channel weights to the
frozen path's. Only the spline coefficients receive gradients, computed in
closed form since the mask is an explicit composition of linear maps and
sigmoids, and AdamW applies them.

Every random choice (item pick, augmentation parameters, pixel noise, token
samples) has its own stream namespace indexed by step, so a training run is
one pure function of (model, dataset, config).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .decoder import encode, generate_token, kept_pixels, mask_logits
from .metrics import box_or_full
from .numerics import (F32, STREAM_AUG, STREAM_NOISE, STREAM_PICK,
                       STREAM_TRAIN_MC, RngStream, affine, as_f32, sigmoid)
from .sokan import kan_forward
from .tvbi import compute_token_stats, deterministic_mask, moments_over_rows

BOX_EXPAND = 10

SCALE_RANGE = (0.75, 1.25)
ROTATION_RANGE = (-45.0, 45.0)
GAMMA_RANGE = (0.5, 1.5)
BRIGHTNESS_RANGE = (-0.1, 0.1)
NOISE_RANGE = (0.01, 0.2)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 1
    max_iterations: int = 2000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    loss_eps: float = 1e-6
    k_train: int = 10
    seed: int = 0

    def validate(self):
        if self.learning_rate <= 0 or self.adam_eps <= 0 or self.loss_eps <= 0:
            raise ValueError("rates and epsilons must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        if self.batch_size < 1 or self.k_train < 1:
            raise ValueError("batch size and K_train must be >= 1")


@dataclass
class AugmentParams:
    scale: float = 1.0
    rotation: float = 0.0    # degrees
    gamma: float = 1.0
    brightness: float = 0.0
    noise_sigma: float = 0.0

    def validate(self):
        def _in(v, rng_):
            return rng_[0] <= v <= rng_[1]

        if not _in(self.scale, SCALE_RANGE) and self.scale != 1.0:
            raise ValueError(f"scale outside {SCALE_RANGE}")
        if not _in(self.rotation, ROTATION_RANGE):
            raise ValueError(f"rotation outside {ROTATION_RANGE}")
        if not _in(self.gamma, GAMMA_RANGE):
            raise ValueError(f"gamma outside {GAMMA_RANGE}")
        if not _in(self.brightness, BRIGHTNESS_RANGE):
            raise ValueError(f"brightness outside {BRIGHTNESS_RANGE}")
        # 0 is the documented identity escape; sampled values stay in range
        if self.noise_sigma != 0.0 and not _in(self.noise_sigma, NOISE_RANGE):
            raise ValueError(f"noise_sigma outside {NOISE_RANGE} (or 0)")


def draw_augment_params(rng):
    """One parameter set, five uniforms in fixed field order."""
    u = rng.uniform(5)
    return AugmentParams(
        scale=SCALE_RANGE[0] + (SCALE_RANGE[1] - SCALE_RANGE[0]) * u[0],
        rotation=ROTATION_RANGE[0] + (ROTATION_RANGE[1] - ROTATION_RANGE[0]) * u[1],
        gamma=GAMMA_RANGE[0] + (GAMMA_RANGE[1] - GAMMA_RANGE[0]) * u[2],
        brightness=BRIGHTNESS_RANGE[0] + (BRIGHTNESS_RANGE[1] - BRIGHTNESS_RANGE[0]) * u[3],
        noise_sigma=NOISE_RANGE[0] + (NOISE_RANGE[1] - NOISE_RANGE[0]) * u[4],
    )


def _grid_coords(h, w):
    ys = np.arange(h, dtype=F32)[:, None] * np.ones(w, dtype=F32)[None, :]
    xs = np.ones(h, dtype=F32)[:, None] * np.arange(w, dtype=F32)[None, :]
    return ys, xs


def _bilinear_sample(img, ys, xs):
    h, w = img.shape
    ys = np.minimum(np.maximum(ys, F32(0.0)), F32(h - 1))
    xs = np.minimum(np.maximum(xs, F32(0.0)), F32(w - 1))
    y0 = np.minimum(ys.astype(np.int64), h - 2)
    x0 = np.minimum(xs.astype(np.int64), w - 2)
    dy = ys - y0.astype(F32)
    dx = xs - x0.astype(F32)
    one = F32(1.0)
    v00 = img[y0, x0]
    v01 = img[y0, x0 + 1]
    v10 = img[y0 + 1, x0]
    v11 = img[y0 + 1, x0 + 1]
    out = ((one - dy) * (one - dx)) * v00 + ((one - dy) * dx) * v01
    out = out + (dy * (one - dx)) * v10
    out = out + (dy * dx) * v11
    return out


def _nearest_sample(img, ys, xs):
    h, w = img.shape
    yi = np.clip(np.floor(ys + F32(0.5)).astype(np.int64), 0, h - 1)
    xi = np.clip(np.floor(xs + F32(0.5)).astype(np.int64), 0, w - 1)
    return img[yi, xi]


def _geometric(image, mask, scale, rotation_deg):
    h, w = image.shape
    cy = F32((h - 1) / 2.0)
    cx = F32((w - 1) / 2.0)
    if scale != 1.0:
        ys, xs = _grid_coords(h, w)
        sy = (ys - cy) / F32(scale) + cy
        sx = (xs - cx) / F32(scale) + cx
        image = _bilinear_sample(image, sy, sx)
        mask = _nearest_sample(mask, sy, sx)
    if rotation_deg != 0.0:
        th = math.radians(rotation_deg)
        ct, st = F32(math.cos(th)), F32(math.sin(th))
        ys, xs = _grid_coords(h, w)
        dy = ys - cy
        dx = xs - cx
        sy = cy - st * dx + ct * dy
        sx = cx + ct * dx + st * dy
        image = _bilinear_sample(image, sy, sx)
        mask = _nearest_sample(mask, sy, sx)
    return image, mask


def augment(image, mask, params, rng):
    """Geometric + photometric augmentation; the mask gets geometry only.

    Out-of-frame samples clamp to the nearest edge pixel. Identity
    parameters return the inputs unchanged, bit for bit.
    """
    params.validate()
    image = as_f32(image, "image")
    mask = np.asarray(mask)
    if image.shape != mask.shape:
        raise ValueError("image and mask shapes differ")
    if np.any(image < 0) or np.any(image > 1):
        raise ValueError("image values must lie in [0, 1]")
    mask = mask.astype(np.uint8)

    image, mask = _geometric(image, mask, params.scale, params.rotation)
    if params.gamma != 1.0:
        image = np.power(image, F32(params.gamma))
    if params.brightness != 0.0:
        image = np.clip(image + F32(params.brightness), F32(0.0), F32(1.0))
    if params.noise_sigma != 0.0:
        h, w = image.shape
        noise = rng.normal(h * w).reshape(h, w)
        image = np.clip(image + F32(params.noise_sigma) * noise, F32(0.0), F32(1.0))
    return image, mask


def pseudo_label(model, image, box):
    """deterministic_mask thresholded at 0.5 (ties count as foreground)."""
    dm = deterministic_mask(model, image, box)
    return (dm >= F32(0.5)).astype(np.uint8)


def loss_unw(pred, pseudo, mu, eps=1e-6):
    """Uncertainty-weighted MSE: (1-mu)/(eps+mu) * mean((pred-pseudo)^2)."""
    pred = as_f32(pred, "pred")
    pseudo = as_f32(pseudo, "pseudo")
    if pred.shape != pseudo.shape:
        raise ValueError("pred and pseudo shapes differ")
    if not 0 <= mu <= 1:
        raise ValueError("mu must lie in [0, 1]")
    weight = (1.0 - mu) / (eps + mu)
    mse = float(np.mean((pred - pseudo) ** 2, dtype=np.float64))
    return weight * mse


def loss_feat(t_original, t_kan):
    """Squared Euclidean distance (sum of squared differences)."""
    a = as_f32(t_original, "t_original")
    b = as_f32(t_kan, "t_kan")
    if a.shape != b.shape:
        raise ValueError("inputs must share a shape")
    d = a - b
    return float(np.sum(d.astype(np.float64) ** 2))


@dataclass
class AdamWState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, param):
        return cls(np.zeros_like(param), np.zeros_like(param), 0)


def adamw_step(param, grad, state, config):
    """One decoupled-weight-decay Adam update; returns (new_param, state).

    theta <- theta - lr*mhat/(sqrt(vhat)+eps) - lr*wd*theta, with
    bias-corrected moments mhat = m/(1-b1^t), vhat = v/(1-b2^t).
    """
    param = as_f32(param, "param")
    grad = as_f32(grad, "grad")
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ValueError("param/grad/state shapes differ")
    state.step += 1
    t = state.step
    b1 = config.adam_beta1
    b2 = config.adam_beta2
    state.m = (b1 * state.m + (1.0 - b1) * grad).astype(F32)
    state.v = (b2 * state.v + (1.0 - b2) * grad * grad).astype(F32)
    mhat = state.m / F32(1.0 - b1 ** t)
    vhat = state.v / F32(1.0 - b2 ** t)
    lr = F32(config.learning_rate)
    update = lr * (mhat / (np.sqrt(vhat) + F32(config.adam_eps)))
    update = update + F32(config.learning_rate * config.weight_decay) * param
    return param - update, state


def phase1_stats(model, dataset, expand=BOX_EXPAND):
    """Token statistics over a dataset of (image, mask) pairs.

    Masks serve only to derive box prompts; no labels are consumed.
    """
    items = list(dataset)
    if not items:
        raise ValueError("dataset is empty")
    tokens = np.empty((len(items), model.d), dtype=F32)
    for i, (image, mask) in enumerate(items):
        box = box_or_full(mask, expand)
        context, _ = encode(model, image, box)
        tokens[i] = generate_token(model, context)
    return compute_token_stats(tokens)


def _train_step(model, stats, image, mask, step_index, config):
    hyper = model.hyper
    layer = hyper.kan
    impl = backend.impl()

    params = draw_augment_params(RngStream(config.seed, STREAM_AUG + step_index))
    noise_rng = RngStream(config.seed, STREAM_NOISE + step_index)
    image2, mask2 = augment(image, mask, params, noise_rng)
    box = box_or_full(mask2, BOX_EXPAND)

    context, q = encode(model, image2, box)
    t = generate_token(model, context)
    keep, q_kept, q_kept_t = kept_pixels(q, model.prune_mask)

    # teacher: frozen base path, same input
    x_det = hyper.hidden(t[None, :])[0]
    bwt = np.ascontiguousarray(layer.base_weight.T)
    w_base = affine(x_det[None, :], bwt, layer.base_bias)[0]
    y_base = sigmoid(mask_logits(np.ascontiguousarray(w_base[keep])[None, :], q_kept_t))[0]
    pseudo = (y_base >= F32(0.5)).astype(F32)

    # student: spline path over K_train sampled tokens
    k = config.k_train
    mc_base = RngStream(config.seed, STREAM_TRAIN_MC + step_index * k)
    eps = np.empty((k, model.d), dtype=F32)
    for i in range(k):
        eps[i] = mc_base.child(i).normal(model.d)
    tokens = t[None, :] + stats.sigma[None, :] * eps
    xs = hyper.hidden(tokens)
    nb = layer.nbasis
    bases = impl.bspline_bases(np.ascontiguousarray(xs.ravel()), layer.grid, layer.order)
    bases = np.ascontiguousarray(bases.reshape(k, model.hidden, nb))
    w_kan = impl.kan_batch(xs, bases, layer.base_weight, layer.coeffs)
    w_kan += layer.base_bias[None, :]
    y = sigmoid(mask_logits(np.ascontiguousarray(w_kan[:, keep]), q_kept_t))
    mean, unc = moments_over_rows(y, k)
    mu = float(np.mean(unc, dtype=np.float64) / 0.5)

    l_unw = loss_unw(mean, pseudo, mu, config.loss_eps)

    # deterministic spline output for feature consistency
    w_kan_det, _ = kan_forward(layer, x_det)
    l_feat = loss_feat(w_base, w_kan_det)

    # backprop to coefficients only
    hw = y.shape[1]
    weight = (1.0 - mu) / (config.loss_eps + mu)
    coef = F32(weight * 2.0 / (hw * k))
    r = mean - pseudo
    delta = coef * ((y * (F32(1.0) - y)) * r[None, :])
    gw_kept = impl.matmul(delta, q_kept)
    gw = np.zeros((k, model.m), dtype=F32)
    gw[:, keep] = gw_kept
    g_unw = np.einsum("ij,ips->jps", gw, bases)

    bases_det = impl.bspline_bases(x_det, layer.grid, layer.order)
    up_feat = F32(2.0) * (w_kan_det - w_base)
    g_feat = up_feat[:, None, None] * bases_det[None, :, :]

    grad = (g_unw + g_feat).astype(F32)
    return grad, l_unw, l_feat, mu


def train_sokan(model, dataset, config, stats=None):
    """Adapt the spline coefficients on unlabeled data; returns (model, trace).

    dataset: list of (image, mask) pairs; masks derive box prompts only.
    stats: token statistics; computed over the dataset when omitted.
    The input model is left untouched; the returned copy differs only in
    its spline coefficients. Trace rows are (iteration, l_unw, l_feat,
    total, mu).
    """
    config.validate()
    if model.hyper.variant != "kan":
        raise ValueError("training requires the kan hyper-map variant")
    items = list(dataset)
    if not items:
        raise ValueError("dataset is empty")
    if stats is None:
        stats = phase1_stats(model, items)
    if stats.sigma.shape != (model.d,):
        raise ValueError(f"stats.sigma must have length {model.d}")

    model = model.copy()
    layer = model.hyper.kan
    state = AdamWState.zeros(layer.coeffs)
    trace = []
    for it in range(config.max_iterations):
        grad_sum = np.zeros_like(layer.coeffs)
        lu_sum = lf_sum = mu_sum = 0.0
        for bi in range(config.batch_size):
            step_index = it * config.batch_size + bi
            pick = RngStream(config.seed, STREAM_PICK + step_index)
            idx = int(pick.uniform(1)[0] * len(items))
            image, mask = items[idx]
            grad, l_unw, l_feat, mu = _train_step(
                model, stats, image, mask, step_index, config)
            grad_sum += grad
            lu_sum += l_unw
            lf_sum += l_feat
            mu_sum += mu
        bs = config.batch_size
        grad = grad_sum / F32(bs) if bs > 1 else grad_sum
        layer.coeffs, state = adamw_step(layer.coeffs, grad, state, config)
        trace.append((it, lu_sum / bs, lf_sum / bs,
                      lu_sum / bs + lf_sum / bs, mu_sum / bs))
    return model, trace


def format_trace(trace):
    """Loss trace as comma-separated text with a header row."""
    lines = ["iteration,l_unw,l_feat,total,mu"]
    for it, lu, lf, tot, mu in trace:
        lines.append(f"{it},{lu!r},{lf!r},{tot!r},{mu!r}")
    return "\n".join(lines) + "\n"


def write_trace(path, trace):
    with open(path, "w", encoding="ascii") as f:
        f.write(format_trace(trace))
