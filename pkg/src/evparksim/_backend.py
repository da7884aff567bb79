"""Selects the compiled kernels when available, else the pure-Python ones.

Set ``EVPARKSIM_BACKEND=python`` (or ``cython``) to force a backend; the
default is the compiled extension with silent fallback to pure Python.
"""

from __future__ import annotations

import os

from . import _pykernels

_requested = os.environ.get("EVPARKSIM_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _pykernels
elif _requested == "cython":
    from . import _ckernels as _impl  # noqa: F401  (ImportError is the answer)
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pykernels

BACKEND_NAME: str = _impl.BACKEND_NAME
compute_trajectories = _impl.compute_trajectories
brute_force = _impl.brute_force


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        pass
    else:
        names.append("cython")
    return names


def get_kernels(name: str):
    """Kernel module for an explicit backend name (used by the benchmark
    and the cross-backend equivalence tests)."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
