"""Latency measurement for Monte-Carlo inference.

bench_latency times repeated infer calls on one synthetic input, excluding
warmup repetitions (which also absorb one-time kernel compilation), and
reports mean/p50/p95 seconds per call. compare_backends runs the same
measurement under each available kernel backend, which is the honest way to
see what the compiled kernels buy over the pure-numpy fallback.
"""

import time

import numpy as np

from . import backend
from .metrics import expand_box
from .numerics import STREAM_BENCH, RngStream
from .phantom import PhantomConfig, synth_phantom
from .tvbi import infer

DEFAULT_REPS = 50
DEFAULT_WARMUP = 3
MIN_REPS = 10
MIN_WARMUP = 3


def bench_inputs(image_size, seed=1234):
    """A reproducible phantom image and box prompt at the given square size."""
    axis_hi = min(64.0, image_size / 4.0)
    config = PhantomConfig(height=image_size, width=image_size,
                           axis_range=(min(16.0, axis_hi / 2.0), axis_hi),
                           seed=seed)
    image, mask = synth_phantom(config, RngStream(seed, STREAM_BENCH))
    return image, expand_box(mask, 10)


def bench_latency(model, stats, k, image_size, repetitions=DEFAULT_REPS,
                  warmup=DEFAULT_WARMUP, seed=1234):
    """Time infer at the given size/K; returns {mean, p50, p95} in seconds.

    Every repetition runs the identical computation (same seeds), so the
    spread measures the machine, not the workload.
    """
    repetitions = int(repetitions)
    warmup = int(warmup)
    if repetitions < MIN_REPS:
        raise ValueError(f"repetitions must be at least {MIN_REPS}")
    if warmup < MIN_WARMUP:
        raise ValueError(f"warmup must be at least {MIN_WARMUP}")
    image, box = bench_inputs(image_size, seed)
    rng = RngStream(seed, 0)
    for _ in range(warmup):
        infer(model, image, box, stats, k=k, rng=rng)
    times = np.empty(repetitions, dtype=np.float64)
    for i in range(repetitions):
        t0 = time.perf_counter()
        infer(model, image, box, stats, k=k, rng=rng)
        times[i] = time.perf_counter() - t0
    return {
        "mean": float(times.mean()),
        "p50": float(np.percentile(times, 50)),
        "p95": float(np.percentile(times, 95)),
        "samples": repetitions,
    }


def compare_backends(model, stats, k, image_size, repetitions=DEFAULT_REPS,
                     warmup=DEFAULT_WARMUP, seed=1234):
    """bench_latency under each available backend; restores the active one."""
    prior = backend.active_backend()
    results = {}
    try:
        for name in backend.available_backends():
            backend.set_backend(name)
            results[name] = bench_latency(model, stats, k, image_size,
                                          repetitions, warmup, seed)
    finally:
        backend.set_backend(prior)
    return results
