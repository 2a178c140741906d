"""Kernel backend registry: compiled extension when built, numpy otherwise.

Selection happens once at import. Set ``ABAT_BACKEND=numpy`` (or ``cython``)
to force a choice; ``auto`` (default) prefers the compiled kernels.
"""

import os

from . import numpy_backend

_BACKENDS = {"numpy": numpy_backend}

try:
    from . import _ckernels

    _BACKENDS["cython"] = _ckernels
except ImportError:
    _ckernels = None

_requested = os.environ.get("ABAT_BACKEND", "auto").lower()
if _requested == "auto":
    _active = _BACKENDS.get("cython", numpy_backend)
elif _requested in _BACKENDS:
    _active = _BACKENDS[_requested]
else:
    raise ImportError(
        f"ABAT_BACKEND={_requested!r} is not available; "
        f"choices are {sorted(_BACKENDS)}"
    )


def available() -> dict:
    """Importable backends by name."""
    return dict(_BACKENDS)


def active():
    """Module implementing the currently selected kernels."""
    return _active


def active_name() -> str:
    return _active.name


def set_active(name: str):
    """Switch kernels at runtime (used by tests and the benchmark)."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choices are {sorted(_BACKENDS)}")
    _active = _BACKENDS[name]
