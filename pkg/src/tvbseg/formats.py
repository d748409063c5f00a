"""Bit-exact file formats.

Images travel as binary PGM (P5, maxval 255). Tensors travel in a little-
endian container: magic "TVB1", a u32 entry count, then per entry a u16
name length, the utf-8 name, a u8 rank, u32 dims, and the float32 payload
row-major. Both formats round-trip exactly; writers always emit
little-endian regardless of the host.

Model and statistics files are containers with fixed entry names; the
spline layer serializes as "base_weight", "base_bias", "grid", "coeffs".
"""

import struct

import numpy as np

from .decoder import DecoderModel
from .errors import FormatError, NumericError
from .numerics import F32
from .sokan import SPLINE_ORDER, HyperMap, KanLayer
from .tvbi import TokenStats

MAGIC = b"TVB1"


def write_pgm(path, image):
    """Quantize a [0,1] float image to bytes and write binary PGM."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("image must be 2-D")
    if image.dtype == np.uint8:
        data = image
    else:
        if not np.all(np.isfinite(image)):
            raise ValueError("image has non-finite values")
        if image.min() < 0.0 or image.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        data = np.rint(image.astype(np.float64) * 255.0).astype(np.uint8)
    h, w = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes(order="C"))


def _next_token(buf, pos):
    n = len(buf)
    while pos < n:
        ch = buf[pos]
        if ch == ord("#"):
            while pos < n and buf[pos] not in b"\r\n":
                pos += 1
        elif chr(ch).isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not chr(buf[pos]).isspace():
        pos += 1
    if start == pos:
        raise FormatError("unexpected end of PGM header")
    return buf[start:pos], pos


def read_pgm(path):
    """Binary PGM -> float32 image in [0,1] (byte/255)."""
    with open(path, "rb") as f:
        buf = f.read()
    if not buf.startswith(b"P5"):
        raise FormatError("not a binary PGM (missing P5 magic)")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _next_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError as exc:
            raise FormatError(f"non-numeric PGM header field {tok!r}") from exc
    w, h, maxval = fields
    if w < 1 or h < 1:
        raise FormatError("PGM extents must be positive")
    if maxval != 255:
        raise FormatError(f"unsupported PGM maxval {maxval} (need 255)")
    if pos >= len(buf) or not chr(buf[pos]).isspace():
        raise FormatError("missing whitespace after PGM maxval")
    pos += 1
    payload = buf[pos:]
    if len(payload) != w * h:
        raise FormatError(f"PGM payload is {len(payload)} bytes, expected {w * h}")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    return (data.astype(F32) / F32(255.0))


def write_container(path, tensors):
    """Write an ordered name->tensor mapping; float32 little-endian payloads."""
    names = list(tensors)
    if len(set(names)) != len(names):
        raise ValueError("tensor names must be unique")
    parts = [MAGIC, struct.pack("<I", len(names))]
    for name in names:
        if not name:
            raise ValueError("tensor names must be nonempty")
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name[:32]}...")
        arr = np.asarray(tensors[name], dtype="<f4")
        if arr.ndim > 0xFF:
            raise ValueError("tensor rank exceeds 255")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            if dim >= 2**32:
                raise ValueError("tensor extent exceeds u32")
            parts.append(struct.pack("<I", dim))
        parts.append(arr.tobytes(order="C"))
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def read_container(path):
    """Read a tensor container back into an ordered dict of float32 arrays."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise FormatError("bad container magic")
    (count,) = struct.unpack_from("<I", buf, 4)
    pos = 8
    out = {}

    def _take(n, what):
        nonlocal pos
        if pos + n > len(buf):
            raise FormatError(f"container truncated in {what}")
        piece = buf[pos : pos + n]
        pos += n
        return piece

    for _ in range(count):
        (nlen,) = struct.unpack("<H", _take(2, "name length"))
        if nlen == 0:
            raise FormatError("empty tensor name")
        try:
            name = _take(nlen, "name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("tensor name is not valid utf-8") from exc
        if name in out:
            raise FormatError(f"duplicate tensor name {name!r}")
        (rank,) = struct.unpack("<B", _take(1, "rank"))
        shape = []
        for _ in range(rank):
            (dim,) = struct.unpack("<I", _take(4, "dims"))
            shape.append(dim)
        n_items = 1
        for dim in shape:
            n_items *= dim
        payload = _take(4 * n_items, f"payload of {name!r}")
        arr = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(F32)
        out[name] = arr
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after last tensor")
    return out


_MODEL_TENSORS = ("patch_embed_w", "patch_embed_b", "context_w", "context_b",
                  "token_w1", "token_b1", "token_w2", "token_b2",
                  "pixel_proj_w", "pixel_proj_b")


def save_model(path, model):
    entries = {
        "dims": np.array([model.d, model.m, model.c, model.patch, model.hidden],
                         dtype=F32),
        "variant": np.array([0.0 if model.hyper.variant == "mlp" else 1.0],
                            dtype=F32),
        "prune_mask": model.prune_mask.astype(F32),
    }
    for name in _MODEL_TENSORS:
        entries[name] = getattr(model, name)
    entries["hyper_w1"] = model.hyper.w1
    entries["hyper_b1"] = model.hyper.b1
    if model.hyper.variant == "mlp":
        entries["hyper_w2"] = model.hyper.w2
        entries["hyper_b2"] = model.hyper.b2
    else:
        layer = model.hyper.kan
        entries["base_weight"] = layer.base_weight
        entries["base_bias"] = layer.base_bias
        entries["grid"] = layer.grid
        entries["coeffs"] = layer.coeffs
    write_container(path, entries)


def _require(entries, name, shape=None):
    if name not in entries:
        raise FormatError(f"model file is missing tensor {name!r}")
    arr = entries[name]
    if shape is not None and arr.shape != shape:
        raise FormatError(f"tensor {name!r} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"tensor {name!r} contains non-finite values")
    return arr


def load_model(path):
    entries = read_container(path)
    dims = _require(entries, "dims", (5,))
    d, m, c, patch, hidden = (int(v) for v in dims)
    if min(d, m, c, patch, hidden) < 1:
        raise FormatError("model dims must be positive")
    variant_code = float(_require(entries, "variant", (1,))[0])
    if variant_code not in (0.0, 1.0):
        raise FormatError(f"unknown hyper-map variant code {variant_code}")
    pp = patch * patch

    prune = _require(entries, "prune_mask", (m,)) > 0.5
    tensors = {
        "patch_embed_w": _require(entries, "patch_embed_w", (pp, c)),
        "patch_embed_b": _require(entries, "patch_embed_b", (c,)),
        "context_w": _require(entries, "context_w", (c + 4, c)),
        "context_b": _require(entries, "context_b", (c,)),
        "token_w1": _require(entries, "token_w1", (c, c)),
        "token_b1": _require(entries, "token_b1", (c,)),
        "token_w2": _require(entries, "token_w2", (c, d)),
        "token_b2": _require(entries, "token_b2", (d,)),
        "pixel_proj_w": _require(entries, "pixel_proj_w", (c, m)),
        "pixel_proj_b": _require(entries, "pixel_proj_b", (m,)),
    }
    w1 = _require(entries, "hyper_w1", (d, hidden))
    b1 = _require(entries, "hyper_b1", (hidden,))
    if variant_code == 0.0:
        hyper = HyperMap(w1, b1, "mlp",
                         _require(entries, "hyper_w2", (hidden, m)),
                         _require(entries, "hyper_b2", (m,)))
    else:
        grid = _require(entries, "grid")
        if grid.ndim != 1 or grid.shape[0] < SPLINE_ORDER + 2:
            raise FormatError("spline grid is malformed")
        nb = grid.shape[0] - SPLINE_ORDER - 1
        try:
            layer = KanLayer(
                _require(entries, "base_weight", (m, hidden)),
                _require(entries, "base_bias", (m,)),
                grid,
                _require(entries, "coeffs", (m, hidden, nb)),
                SPLINE_ORDER,
            )
        except ValueError as exc:
            raise FormatError(f"spline layer rejected: {exc}") from exc
        hyper = HyperMap(w1, b1, "kan", kan=layer)
    try:
        return DecoderModel(d, m, c, patch, hidden, **tensors,
                            hyper=hyper, prune_mask=prune)
    except ValueError as exc:
        raise FormatError(f"model rejected: {exc}") from exc


def save_stats(path, stats):
    write_container(path, {
        "sigma": stats.sigma,
        "mean": stats.mean,
        "count": np.array([float(stats.count)], dtype=F32),
    })


def load_stats(path):
    entries = read_container(path)
    sigma = _require(entries, "sigma")
    mean = _require(entries, "mean")
    count_arr = _require(entries, "count", (1,))
    if sigma.ndim != 1 or sigma.shape != mean.shape:
        raise FormatError("sigma/mean must be equal-length vectors")
    count = int(count_arr[0])
    if count < 1:
        raise FormatError("stats count must be at least 1")
    try:
        return TokenStats(sigma, mean, count)
    except ValueError as exc:
        raise FormatError(f"stats rejected: {exc}") from exc
