"""Per-slice per-cell quota computation.

When the final user distribution is fully complementary (every cell's TND
equals its capacity) each slice simply receives its normalized demand at every
cell. Otherwise the allocator starts from the static capacity-proportional
split and greedily swaps quota between slice pairs with complementary
demands, which by construction never leaves any slice worse off than under
the static allocation.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels
from .demand import DemandState
from .model import AllocationScheme, Cell, Slice

REL_TOL = 1e-9


def static_allocation(slices: Sequence[Slice], cells: Sequence[Cell]) -> AllocationScheme:
    """Split each slice's global quota across cells in proportion to capacity."""
    total_cap = sum(c.capacity_rbs for c in cells)
    quota = {
        (s.id, c.id): s.global_quota_rbs * c.capacity_rbs / total_cap
        for s in slices
        for c in cells
    }
    return AllocationScheme(
        quota,
        {s.id: s.global_quota_rbs for s in slices},
        {c.id: c.capacity_rbs for c in cells},
    )


def _is_exact(demand: DemandState) -> bool:
    return any(isinstance(v, Fraction) for v in demand.normalized_demand.values())


def _swaps_exact(quota, nd, slice_ids, cell_ids, eps):
    """Object-arithmetic twin of the kernel swap loop, for exact inputs.

    Must follow the same scan order and tie breaks as the kernels."""
    q = dict(quota)
    while True:
        applied = False
        for a in slice_ids:
            for b in slice_ids:
                if a == b:
                    continue
                c1s = [
                    k
                    for k in cell_ids
                    if q[(a, k)] - nd[(a, k)] > eps and nd[(b, k)] - q[(b, k)] > eps
                ]
                c2s = [
                    k
                    for k in cell_ids
                    if nd[(a, k)] - q[(a, k)] > eps and q[(b, k)] - nd[(b, k)] > eps
                ]
                if not c1s or not c2s:
                    continue
                best = None
                for c1 in c1s:
                    for c2 in c2s:
                        dlt = min(
                            q[(a, c1)] - nd[(a, c1)],
                            nd[(a, c2)] - q[(a, c2)],
                            nd[(b, c1)] - q[(b, c1)],
                            q[(b, c2)] - nd[(b, c2)],
                        )
                        if best is None or dlt > best[0]:
                            best = (dlt, c1, c2)
                dlt, c1, c2 = best
                q[(a, c1)] -= dlt
                q[(a, c2)] += dlt
                q[(b, c1)] += dlt
                q[(b, c2)] -= dlt
                applied = True
                break
            if applied:
                break
        if not applied:
            return q


def allocate_array(
    nd: np.ndarray, slice_quota: np.ndarray, cap: np.ndarray, rel_tol: float = REL_TOL
) -> np.ndarray:
    """Array-level allocator over a normalized-demand matrix (slices x cells).

    Used by :func:`allocate` and by schemes that evaluate many tentative
    distributions and only need the quota matrix."""
    if np.all(np.abs(nd.sum(axis=0) - cap) <= rel_tol * cap):
        return nd.copy()
    static = np.outer(slice_quota, cap) / cap.sum()
    eps = rel_tol * cap.max()
    return _kernels.greedy_quota_swaps(static, nd, eps)


def allocate(
    demand: DemandState,
    slices: Sequence[Slice],
    cells: Sequence[Cell],
    rel_tol: float = REL_TOL,
) -> AllocationScheme:
    """Quota for the given demand state.

    Fully complementary demands get exactly their normalized demand. Otherwise
    quota starts at the static split and complementary-demand swaps move it as
    close to the demands as slice isolation allows. Exact (Fraction) demand
    states are handled without converting to float.
    """
    slices = sorted(slices, key=lambda s: s.id)
    cells = sorted(cells, key=lambda c: c.id)
    slice_quota = {s.id: s.global_quota_rbs for s in slices}
    cell_cap = {c.id: c.capacity_rbs for c in cells}

    complementary = all(
        abs(demand.tnd[c.id] - c.capacity_rbs) <= rel_tol * c.capacity_rbs for c in cells
    )
    if complementary:
        quota = {
            (s.id, c.id): demand.normalized_demand[(s.id, c.id)]
            for s in slices
            for c in cells
        }
        return AllocationScheme(quota, slice_quota, cell_cap)

    if _is_exact(demand):
        static = static_allocation(slices, cells)
        eps = rel_tol * max(c.capacity_rbs for c in cells)
        quota = _swaps_exact(
            static.quota,
            demand.normalized_demand,
            [s.id for s in slices],
            [c.id for c in cells],
            eps,
        )
        return AllocationScheme(quota, slice_quota, cell_cap)

    nd = np.array(
        [[demand.normalized_demand[(s.id, c.id)] for c in cells] for s in slices],
        dtype=float,
    )
    q = allocate_array(
        nd,
        np.array([s.global_quota_rbs for s in slices], dtype=float),
        np.array([c.capacity_rbs for c in cells], dtype=float),
        rel_tol,
    )
    quota = {
        (s.id, c.id): float(q[i, j])
        for i, s in enumerate(slices)
        for j, c in enumerate(cells)
    }
    return AllocationScheme(quota, slice_quota, cell_cap)
