"""Select the compiled kernel when available, else the pure-Python one.

Set ``HYDROSTAT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _regiongrow_py

BACKEND = "python"
region_grow = _regiongrow_py.region_grow

if os.environ.get("HYDROSTAT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._regiongrow import region_grow  # noqa: F811
    except ImportError:
        pass
    else:
        BACKEND = "cython"
