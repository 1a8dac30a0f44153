"""Tridiagonal kernels: compiled when available, NumPy/SciPy otherwise.

Set ``SHLAB_PURE_PYTHON=1`` to force the fallback.  ``BACKEND`` names the
active implementation; ``backend(name)`` returns a specific one for
benchmarks and cross-checks.
"""
import os
import warnings

from . import _pykernels

_compiled = None
if os.environ.get("SHLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError as exc:  # pragma: no cover - depends on build
        warnings.warn(f"shlab: compiled kernels unavailable ({exc}); using Python fallback")
        _compiled = None

_active = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "python"

sturm_count = _active.sturm_count
spd_solve = _active.spd_solve
heat_march = _active.heat_march


def backend(name):
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ["python"] + (["cython"] if _compiled is not None else [])
