"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy fallback in ``_pykernels`` is used.  Setting ``PERFDISCRIM_PURE_PYTHON=1``
forces the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("PERFDISCRIM_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"
    else:
        BACKEND = "cython"

alignment_exact = _impl.alignment_exact
alignment_approx = _impl.alignment_approx
best_split = _impl.best_split


def available_backends() -> dict:
    """Map of backend name to kernel module, for benchmarks and tests."""
    backends = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        backends["cython"] = _ckernels
    return backends
