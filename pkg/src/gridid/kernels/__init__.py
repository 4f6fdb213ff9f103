"""Particle kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built and importable; set
``GRIDID_PURE_PYTHON=1`` to force the numpy implementation.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("GRIDID_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

predict = _impl.predict
sse_grad = _impl.sse_grad

__all__ = ["BACKEND", "predict", "sse_grad", "_pykernels"]
