"""Command-line interface.

Subcommands cover the whole workflow: init (fresh model), synth (phantom
dataset), stats (Phase-1 token statistics), infer (mean mask + uncertainty
PGMs), train (spline adaptation), analyze (channel positive ratios), prune
(channel masking), eval (Dice CSV on stdout), bench (latency).

Exit codes: 0 success, 2 usage error, 3 file/format error, 4 numeric
failure.
"""

import argparse
import os
import sys

import numpy as np

from . import backend, bench, formats, pipeline, sokan, tvbi
from .decoder import BoxPrompt, init_model
from .errors import FormatError, NumericError
from .metrics import dice, expand_box
from .numerics import F32, RngStream
from .phantom import PhantomConfig, synth_dataset

USAGE_ERROR = 2
FORMAT_ERROR = 3
NUMERIC_ERROR = 4


def _phantom_config(size, seed):
    # default lesion geometry, shrunk proportionally for small frames
    axis_hi = min(64.0, size / 4.0)
    axis_lo = min(16.0, axis_hi / 2.0)
    return PhantomConfig(height=size, width=size, axis_range=(axis_lo, axis_hi),
                         seed=seed)


def load_dataset(data_dir):
    """(name, image, mask) triples from img_%04d.pgm / msk_%04d.pgm pairs."""
    try:
        names = sorted(n for n in os.listdir(data_dir)
                       if n.startswith("img_") and n.endswith(".pgm"))
    except OSError as exc:
        raise FormatError(f"cannot list {data_dir}: {exc}") from exc
    if not names:
        raise FormatError(f"no img_*.pgm files in {data_dir}")
    items = []
    for name in names:
        mask_name = "msk_" + name[len("img_"):]
        mask_path = os.path.join(data_dir, mask_name)
        if not os.path.exists(mask_path):
            raise FormatError(f"missing mask {mask_name} for {name}")
        image = formats.read_pgm(os.path.join(data_dir, name))
        mask = (formats.read_pgm(mask_path) > 0.5).astype(np.uint8)
        items.append((name, image, mask))
    return items


def cmd_init(args):
    model = init_model(seed=args.seed, variant=args.variant)
    formats.save_model(args.out, model)
    from .decoder import count_parameters
    counts = count_parameters(model)
    print(f"wrote {args.variant} model to {args.out} "
          f"({counts['total']} parameters, {counts['trainable']} trainable)")
    return 0


def cmd_synth(args):
    if args.count < 1:
        raise ValueError("--count must be positive")
    config = _phantom_config(args.size, args.seed)
    os.makedirs(args.out, exist_ok=True)
    for i, (image, mask) in enumerate(synth_dataset(config, args.count)):
        formats.write_pgm(os.path.join(args.out, f"img_{i:04d}.pgm"), image)
        formats.write_pgm(os.path.join(args.out, f"msk_{i:04d}.pgm"),
                          mask.astype(F32))
    print(f"wrote {args.count} image/mask pairs to {args.out}")
    return 0


def cmd_stats(args):
    model = formats.load_model(args.model)
    items = load_dataset(args.data)
    stats = pipeline.phase1_stats(model, [(img, msk) for _, img, msk in items])
    formats.save_stats(args.out, stats)
    print(f"token statistics over {stats.count} images -> {args.out} "
          f"(sigma dim {stats.sigma.shape[0]})")
    return 0


def _parse_box(text):
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError("--box needs x0,y0,x1,y1")
    try:
        x0, y0, x1, y1 = (int(p) for p in parts)
    except ValueError as exc:
        raise ValueError(f"--box needs four integers: {exc}") from exc
    return BoxPrompt(x0, y0, x1, y1)


def cmd_infer(args):
    model = formats.load_model(args.model)
    stats = formats.load_stats(args.stats)
    image = formats.read_pgm(args.image)
    if args.box is not None:
        box = _parse_box(args.box)
    else:
        mask = (formats.read_pgm(args.mask) > 0.5).astype(np.uint8)
        box = expand_box(mask, args.expand)
    pred = tvbi.infer(model, image, box, stats, k=args.k,
                      rng=RngStream(args.seed, 0))
    mean_path = f"{args.out}_mean.pgm"
    unc_path = f"{args.out}_unc.pgm"
    formats.write_pgm(mean_path, pred.mean_mask)
    # uncertainty tops out at 0.5; doubled so the PGM uses the full range
    formats.write_pgm(unc_path, pred.uncertainty * F32(2.0))
    print(f"wrote {mean_path} and {unc_path} (K={pred.samples_used})")
    return 0


def cmd_train(args):
    model = formats.load_model(args.model)
    if model.hyper.variant != "kan":
        raise ValueError("training needs a kan-variant model (see init --variant kan)")
    items = load_dataset(args.data)
    config = pipeline.TrainConfig(learning_rate=args.lr,
                                  max_iterations=args.iters, seed=args.seed)
    model, trace = pipeline.train_sokan(
        model, [(img, msk) for _, img, msk in items], config)
    formats.save_model(args.out, model)
    if args.trace:
        pipeline.write_trace(args.trace, trace)
    tail = f" (final total loss {trace[-1][3]:.6f})" if trace else ""
    print(f"trained {config.max_iterations} iterations -> {args.out}{tail}")
    return 0


def cmd_analyze(args):
    model = formats.load_model(args.model)
    if model.hyper.variant != "kan":
        raise ValueError("analyze needs a kan-variant model")
    items = load_dataset(args.data)
    dataset = [(img, expand_box(msk, 10)) for _, img, msk in items]
    report = sokan.positive_ratio(model, model.hyper, dataset)
    rank_of = {int(ch): r for r, ch in enumerate(report.ranking)}
    with open(args.out, "w", encoding="ascii") as f:
        f.write("channel,positive_ratio,rank\n")
        for j, ratio in enumerate(report.positive_ratio):
            f.write(f"{j},{float(ratio)!r},{rank_of[j]}\n")
    print(f"wrote per-channel positive ratios to {args.out}")
    return 0


def _read_report(path, m, keep):
    ratios = np.full(m, np.nan)
    try:
        with open(path, "r", encoding="ascii") as f:
            header = f.readline().strip()
            if not header.startswith("channel,positive_ratio"):
                raise FormatError(f"unrecognized report header {header!r}")
            for line in f:
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                ratios[int(parts[0])] = float(parts[1])
    except FormatError:
        raise
    except (OSError, ValueError, IndexError) as exc:
        raise FormatError(f"cannot parse report {path}: {exc}") from exc
    if np.any(np.isnan(ratios)):
        raise FormatError("report does not cover every channel")
    ranking = sokan.rank_channels(ratios)
    kept = np.array(sorted(ranking[:keep]), dtype=np.int64)
    return sokan.PruneReport(ratios, np.array(ranking, dtype=np.int64), kept)


def cmd_prune(args):
    model = formats.load_model(args.model)
    if not 1 <= args.keep <= model.m:
        raise ValueError(f"--keep must be in 1..{model.m}")
    report = _read_report(args.report, model.m, args.keep)
    pruned = sokan.prune(model, report)
    formats.save_model(args.out, pruned)
    kept = ",".join(str(c) for c in report.kept)
    print(f"kept channels [{kept}] -> {args.out}")
    return 0


def cmd_eval(args):
    model = formats.load_model(args.model)
    stats = formats.load_stats(args.stats) if args.stats else None
    items = load_dataset(args.data)
    scores = []
    for i, (name, image, gt) in enumerate(items):
        box = expand_box(gt, args.expand)
        if stats is not None:
            pred = tvbi.infer(model, image, box, stats, k=args.k,
                              rng=RngStream(args.seed, i * args.k))
            mask = pred.mean_mask >= F32(0.5)
        else:
            mask = tvbi.deterministic_mask(model, image, box) >= F32(0.5)
        score = dice(mask, gt)
        scores.append(score)
        print(f"{name},{score!r}")
    print(f"mean,{float(np.mean(scores))!r}")
    return 0


def cmd_bench(args):
    model = formats.load_model(args.model)
    stats = formats.load_stats(args.stats)

    def _line(name, res):
        return (f"backend={name} size={args.size} K={args.k} reps={args.reps} "
                f"mean={res['mean']:.6f} p50={res['p50']:.6f} "
                f"p95={res['p95']:.6f} s/sample")

    if args.compare_backends:
        results = bench.compare_backends(model, stats, args.k, args.size,
                                         args.reps, args.warmup)
        for name in sorted(results):
            print(_line(name, results[name]))
    else:
        res = bench.bench_latency(model, stats, args.k, args.size,
                                  args.reps, args.warmup)
        print(_line(backend.active_backend(), res))
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="tvbseg",
        description="Token-level Bayesian mask decoding with spline hyper-maps")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("init", help="create a freshly initialized model file")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--variant", choices=("mlp", "kan"), default="mlp")
    sp.set_defaults(func=cmd_init)

    sp = sub.add_parser("synth", help="generate a phantom dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--size", type=int, default=256,
                    help="square image size (lesion axes scale down for small sizes)")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("stats", help="compute Phase-1 token statistics")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("infer", help="mean mask + uncertainty map for one image")
    sp.add_argument("--model", required=True)
    sp.add_argument("--stats", required=True)
    sp.add_argument("--image", required=True)
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--box", help="x0,y0,x1,y1 prompt")
    grp.add_argument("--mask", help="derive the prompt from this mask PGM")
    sp.add_argument("--expand", type=int, default=10)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output prefix")
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("train", help="self-supervised spline adaptation")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--iters", type=int, default=2000)
    sp.add_argument("--lr", type=float, default=1e-4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--trace", help="write the loss trace CSV here")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("analyze", help="per-channel positive activation ratios")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("prune", help="mask all but the top-ranked channels")
    sp.add_argument("--model", required=True)
    sp.add_argument("--report", required=True)
    sp.add_argument("--keep", type=int, default=4)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_prune)

    sp = sub.add_parser("eval", help="per-image and mean Dice as CSV on stdout")
    sp.add_argument("--model", required=True)
    sp.add_argument("--stats")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--data", required=True)
    sp.add_argument("--expand", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("bench", help="inference latency statistics")
    sp.add_argument("--model", required=True)
    sp.add_argument("--stats", required=True)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--size", type=int, default=256)
    sp.add_argument("--reps", type=int, default=bench.DEFAULT_REPS)
    sp.add_argument("--warmup", type=int, default=bench.DEFAULT_WARMUP)
    sp.add_argument("--compare-backends", action="store_true",
                    help="measure every available kernel backend")
    sp.set_defaults(func=cmd_bench)

    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return FORMAT_ERROR
    except OSError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return FORMAT_ERROR
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
