"""Pick the coordinate-descent core at import time.

The compiled extension is used when it imports; set ``PQLWCR_PURE_PYTHON=1``
to force the pure-Python implementation.
"""
import os

from . import _cd_py

if os.environ.get("PQLWCR_PURE_PYTHON", "") not in ("", "0"):
    _impl = _cd_py
    BACKEND = "python"
else:
    try:
        from . import _cd as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _cd_py
        BACKEND = "python"

solve_weighted_l1 = _impl.solve_weighted_l1
