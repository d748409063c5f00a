"""Numeric kernel implementations.

Two interchangeable modules live here: `numpy_impl` (pure numpy, always
available) and `numba_impl` (same kernels compiled with numba). Both compute
every output element with the same floating-point operation order, so results
are bit-identical across the two. Selection happens in `tvbseg.backend`.
"""
