"""Kernel backend selection.

The compiled Cython extension is preferred when present; the NumPy fallback is
used otherwise. Set RANLB_PURE_PYTHON=1 to force the fallback (used by the
benchmark and by tests that exercise both backends).
"""

import os

if os.environ.get("RANLB_PURE_PYTHON"):
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _pure as _impl

        BACKEND = "pure"

effective_weights = _impl.effective_weights
slice_cell_mass = _impl.slice_cell_mass
greedy_quota_swaps = _impl.greedy_quota_swaps

__all__ = [
    "BACKEND",
    "effective_weights",
    "slice_cell_mass",
    "greedy_quota_swaps",
]
