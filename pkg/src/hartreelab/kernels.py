"""Kernel selection: the compiled extension when importable, else the numpy fallback.

Set HARTREELAB_PURE=1 to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

backend = "python"
if os.environ.get("HARTREELAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        _compiled = None
    else:
        backend = "compiled"
else:
    _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py

sweep_counts = _impl.sweep_counts
count_product = _impl.count_product
