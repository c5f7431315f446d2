"""Kernel dispatch.

The hot inner loops (Adam updates, brute-force distances, Gini split scans)
have two interchangeable implementations: numba-compiled loops and a pure
numpy fallback. Set ``TYPESIFT_DISABLE_NUMBA=1`` to force the numpy path;
it is also selected automatically when numba is not importable. Both
backends produce bit-identical results; the flag only trades speed.

``benchmarks/bench_kernels.py`` times the two side by side.
"""

import os

_flag = os.environ.get("TYPESIFT_DISABLE_NUMBA", "").strip()
_force_numpy = _flag not in ("", "0")

if _force_numpy:
    from . import numpy_impl as _impl

    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:
        from . import numpy_impl as _impl

        BACKEND = "numpy"

adam_update = _impl.adam_update
sq_dists = _impl.sq_dists
split_scan = _impl.split_scan

__all__ = ["BACKEND", "adam_update", "sq_dists", "split_scan"]
