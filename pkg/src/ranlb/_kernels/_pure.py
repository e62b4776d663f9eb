"""NumPy implementations of the hot kernels.

These are the fallback backend used when the compiled extension is not built.
Both backends must implement identical tie-breaking and scan orders so that the
algorithms produce the same decisions regardless of backend.
"""

import numpy as np


def effective_weights(serving, ue_slice, weight, eff, expo):
    """Per-UE demand mass w / e**(1-epsilon) at the current serving cell."""
    e = eff[np.arange(serving.shape[0]), serving]
    return weight / e ** expo[ue_slice]


def slice_cell_mass(serving, ue_slice, weight, eff, expo, n_slices, n_cells):
    """Sum of per-UE demand mass grouped by (slice, serving cell)."""
    ew = effective_weights(serving, ue_slice, weight, eff, expo)
    out = np.zeros((n_slices, n_cells))
    np.add.at(out, (ue_slice, serving), ew)
    return out


def greedy_quota_swaps(quota, demand, eps):
    """Greedy complementary-demand swaps, in place on a copy of ``quota``.

    Repeatedly finds the first ordered slice pair (a, b), scanning ascending,
    for which some cell pair (c1, c2) satisfies: a over-provisioned at c1 and
    under at c2, b under at c1 and over at c2. Among that pair's eligible cell
    pairs the one with maximal transferable amount is applied (ties broken by
    lowest (c1, c2)). Amounts below ``eps`` count as zero so the loop
    terminates in floating point.
    """
    q = np.array(quota, dtype=float, copy=True)
    d = np.asarray(demand, dtype=float)
    while True:
        ex = q - d
        pos = ex > eps
        neg = ex < -eps
        # pair (a, b) eligible iff exists c1 with a+/b- and c2 with a-/b+
        x = pos.astype(np.int64) @ neg.astype(np.int64).T
        y = neg.astype(np.int64) @ pos.astype(np.int64).T
        elig = (x > 0) & (y > 0)
        np.fill_diagonal(elig, False)
        pairs = np.argwhere(elig)
        if pairs.size == 0:
            return q
        a, b = pairs[0]  # argwhere is row-major: first (a, b) ascending
        c1 = pos[a] & neg[b]
        c2 = neg[a] & pos[b]
        u1 = np.where(c1, np.minimum(ex[a], -ex[b]), -np.inf)
        u2 = np.where(c2, np.minimum(-ex[a], ex[b]), -np.inf)
        delta = np.minimum.outer(u1, u2)
        flat = int(np.argmax(delta))  # first max in (c1, c2) row-major order
        i, j = divmod(flat, delta.shape[1])
        dlt = delta[i, j]
        if not dlt > eps:
            return q
        q[a, i] -= dlt
        q[a, j] += dlt
        q[b, i] += dlt
        q[b, j] -= dlt
