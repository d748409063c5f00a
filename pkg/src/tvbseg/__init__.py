"""Box-prompted mask decoding with token-level uncertainty and
spline-based hyper-map adaptation.

The public surface groups into:

* model + inference: init_model, encode, generate_token, infer,
  deterministic_mask, TokenStats, MaskPrediction
* spline machinery: KanLayer, bspline_basis, kan_forward, to_kan,
  positive_ratio, prune
* training: TrainConfig, train_sokan, phase1_stats, augment
* io: read_pgm/write_pgm, read_container/write_container,
  save_model/load_model, save_stats/load_stats
* backends: set_backend, active_backend, available_backends
"""

from .backend import active_backend, available_backends, set_backend
from .bench import bench_latency, compare_backends
from .decoder import (
    BoxPrompt,
    DecoderModel,
    combination_multiplies_per_pixel,
    constant_token_model,
    count_parameters,
    encode,
    generate_token,
    init_model,
    mask_from_weights,
    static_weight_model,
    verify_error_bound,
)
from .errors import FormatError, NumericError
from .formats import (
    load_model,
    load_stats,
    read_container,
    read_pgm,
    save_model,
    save_stats,
    write_container,
    write_pgm,
)
from .metrics import box_or_full, dice, expand_box
from .numerics import RngStream
from .phantom import PhantomConfig, synth_dataset, synth_phantom
from .pipeline import (
    AugmentParams,
    TrainConfig,
    augment,
    draw_augment_params,
    loss_feat,
    loss_unw,
    phase1_stats,
    pseudo_label,
    train_sokan,
    write_trace,
)
from .sokan import (
    HyperMap,
    KanLayer,
    PruneReport,
    bspline_basis,
    kan_coeff_grad,
    kan_forward,
    positive_ratio,
    prune,
    rank_channels,
    to_kan,
)
from .tvbi import (
    MaskPrediction,
    TokenStats,
    compute_token_stats,
    deterministic_mask,
    infer,
    sample_token,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentParams",
    "BoxPrompt",
    "DecoderModel",
    "FormatError",
    "HyperMap",
    "KanLayer",
    "MaskPrediction",
    "NumericError",
    "PhantomConfig",
    "PruneReport",
    "RngStream",
    "TokenStats",
    "TrainConfig",
    "active_backend",
    "augment",
    "available_backends",
    "bench_latency",
    "box_or_full",
    "bspline_basis",
    "combination_multiplies_per_pixel",
    "compare_backends",
    "compute_token_stats",
    "constant_token_model",
    "count_parameters",
    "deterministic_mask",
    "dice",
    "draw_augment_params",
    "encode",
    "expand_box",
    "generate_token",
    "infer",
    "init_model",
    "kan_coeff_grad",
    "kan_forward",
    "load_model",
    "load_stats",
    "loss_feat",
    "loss_unw",
    "mask_from_weights",
    "phase1_stats",
    "positive_ratio",
    "prune",
    "pseudo_label",
    "rank_channels",
    "read_container",
    "read_pgm",
    "sample_token",
    "save_model",
    "save_stats",
    "set_backend",
    "static_weight_model",
    "synth_dataset",
    "synth_phantom",
    "to_kan",
    "train_sokan",
    "verify_error_bound",
    "write_container",
    "write_pgm",
    "write_trace",
]
