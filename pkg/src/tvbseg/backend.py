"""Kernel backend selection.

Two implementations of the numeric kernels exist: a numba-compiled one and
a pure-numpy one. They produce bit-identical results; the numba one is much
faster and is the default when importable. Selection:

  * environment variable TVBSEG_BACKEND=numba|numpy, read at first use
  * set_backend("numba"|"numpy") at runtime (used by the comparison bench)

The numba module is imported lazily so that TVBSEG_BACKEND=numpy never pays
its import cost and a broken numba install degrades to numpy with a warning
instead of breaking the package.
"""

import importlib
import os
import warnings

_CHOICES = ("numba", "numpy")

_modules = {}
_active = None


def _load(name):
    if name not in _modules:
        _modules[name] = importlib.import_module(f"tvbseg.kernels.{name}_impl")
    return _modules[name]


def available_backends():
    """Names of backends that can actually be loaded, preferred first."""
    out = []
    for name in _CHOICES:
        try:
            _load(name)
        except ImportError:
            continue
        out.append(name)
    return out


def set_backend(name):
    """Select the kernel backend by name ("numba" or "numpy")."""
    global _active
    if name not in _CHOICES:
        raise ValueError(f"unknown backend {name!r}; choose from {_CHOICES}")
    try:
        _load(name)
    except ImportError as exc:
        raise RuntimeError(f"backend {name!r} is not available: {exc}") from exc
    _active = name


def _resolve():
    global _active
    if _active is not None:
        return _active
    env = os.environ.get("TVBSEG_BACKEND", "").strip().lower()
    if env:
        set_backend(env)  # unknown names raise, deliberately
        return _active
    try:
        _load("numba")
        _active = "numba"
    except ImportError as exc:
        warnings.warn(f"numba backend unavailable ({exc}); falling back to numpy")
        _active = "numpy"
    return _active


def active_backend():
    """Name of the backend in effect (resolving env/defaults on first call)."""
    return _resolve()


def impl():
    """Kernel module for the active backend."""
    return _load(_resolve())
