"""Pick the kernel implementation at import time.

The compiled extension is preferred; set ``EVOPATH_PURE_PYTHON=1`` to force
the interpreted fallback (handy for A/B benchmarks and debugging).
"""
import os

if os.environ.get("EVOPATH_PURE_PYTHON", "").strip() not in ("", "0"):
    from . import _pykernels as kernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:  # extension not built
        from . import _pykernels as kernels

BACKEND = kernels.BACKEND
expand = kernels.expand
gestalt_matches = kernels.gestalt_matches
