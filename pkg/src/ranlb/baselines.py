"""The five comparison schemes, sharing the core model and demand math so
differences between them are purely algorithmic.

Every scheme has the same signature and returns a :class:`SchemeOutcome`
pairing the handover result with a valid allocation scheme. ``converged`` in
the returned LbResult always refers to the TND load ratios, whatever internal
load metric the scheme used.
"""

from __future__ import annotations

from dataclasses import replace
from typing import NamedTuple, Sequence

import numpy as np

from . import quota as quota_alloc
from .demand import compute_demand_state
from .engine import (
    Indexed,
    LbConfig,
    LbResult,
    LogicalMove,
    PHASE_GREEDY,
    _run_rounds,
    _State,
    run_load_balancer,
    tnd_ratios,
    user_count_ratios,
    capacity_scaled_quota,
)
from .model import AllocationScheme, UserDistribution


class SchemeOutcome(NamedTuple):
    result: LbResult
    allocation: AllocationScheme


def _finish(dist, cells, slices, ues, channel, config, moves, allocation=None):
    dem = compute_demand_state(slices, dist, channel, cells, {u.id: u for u in ues})
    converged = all(
        abs(r - 1.0) <= config.load_eq_tolerance for r in dem.load_ratio.values()
    )
    result = LbResult(dist, dem, tuple(moves), converged)
    if allocation is None:
        allocation = quota_alloc.allocate(dem, slices, cells)
    return SchemeOutcome(result, allocation)


def radioweaver(initial, cells, slices, ues, channel, config) -> SchemeOutcome:
    res = run_load_balancer(initial, cells, slices, ues, channel, config)
    return SchemeOutcome(res, quota_alloc.allocate(res.demand, slices, cells))


def nolb(initial, cells, slices, ues, channel, config) -> SchemeOutcome:
    """Channel-based handovers only: every UE on its highest-efficiency cell,
    quota still assigned dynamically from the resulting demands."""
    cell_ids = [c.id for c in cells]
    dist = UserDistribution(
        {u.id: channel.best_cell(u.id, cell_ids) for u in sorted(ues, key=lambda x: x.id)}
    )
    return _finish(dist, cells, slices, ues, channel, config, [])


def naivelb(initial, cells, slices, ues, channel, config) -> SchemeOutcome:
    """Same round/step/phase machinery, but load is the per-cell user count
    normalized by cell capacity."""
    p = Indexed(cells, slices, ues, channel)
    state = _State(p, p.serving_array(initial))
    moves: list[LogicalMove] = []
    _run_rounds(state, config, user_count_ratios, capacity_scaled_quota,
                np.ones(len(p.ues), dtype=bool), moves)
    dist = p.distribution(state.serving)
    return _finish(dist, cells, slices, ues, channel, config, moves)


def isolatedlb(initial, cells, slices, ues, channel, config) -> SchemeOutcome:
    """Each slice keeps its static per-cell quota and balances its own demand
    against it, moving only its own UEs. The emitted allocation is exactly the
    static split."""
    p = Indexed(cells, slices, ues, channel)
    state = _State(p, p.serving_array(initial))
    moves: list[LogicalMove] = []
    cap_share = p.cap / p.cap.sum()
    for si in range(len(p.slices)):
        static_row = p.quota[si] * cap_share

        def ratios(st, si=si, row=static_row):
            return st.nd[si] / row

        def p2_quota(st, s, row=static_row):
            return row

        mask = p.ue_slice == si
        _run_rounds(state, config, ratios, p2_quota, mask, moves)
    dist = p.distribution(state.serving)
    static = quota_alloc.static_allocation(slices, cells)
    return _finish(dist, cells, slices, ues, channel, config, moves, allocation=static)


class _MoraState:
    """Per-cell weight totals over the inserted subset: MORA evaluates the
    throughput of UE j at cell k as R_k * w_j * e_jk / (total weight at k)."""

    def __init__(self, p: Indexed):
        self.p = p
        self.w_at = np.zeros(len(p.cells))
        self.serving = np.full(len(p.ues), -1, dtype=np.intp)

    def place(self, j, k):
        if self.serving[j] >= 0:
            self.w_at[self.serving[j]] -= self.p.weight[j]
        self.serving[j] = k
        self.w_at[k] += self.p.weight[j]

    def throughput(self, j, k):
        add = 0.0 if self.serving[j] == k else self.p.weight[j]
        return self.p.cap[k] * self.p.weight[j] * self.p.eff[j, k] / (self.w_at[k] + add)

    def throughput_current(self, j):
        return self.throughput(j, int(self.serving[j]))


def _greedy_insert(p: Indexed, initial, st, cascade_cap: int):
    """MORA-style insertion shared by mora and mora_pp: place each UE
    (ascending id) on the cell maximizing its evaluated throughput, then from
    the receiving cell hand over at most one UE whose throughput improves
    elsewhere, cascading for at most ``cascade_cap`` rounds."""
    initial_serv = p.serving_array(initial)
    moves: list[LogicalMove] = []
    for j in range(len(p.ues)):
        covered = np.where(p.eff[j] > 0)[0]
        scores = [st.throughput(j, int(k)) for k in covered]
        k = int(covered[int(np.argmax(scores))])
        st.place(j, k)
        if k != initial_serv[j]:
            moves.append(LogicalMove(p.ue_ids[j], p.cell_ids[initial_serv[j]],
                                     p.cell_ids[k], PHASE_GREEDY, 0, 0))
        cur = k
        for depth in range(1, cascade_cap + 1):
            handed_over = False
            for v in np.where(st.serving == cur)[0]:
                v = int(v)
                t_cur = st.throughput_current(v)
                alts = [int(a) for a in np.where(p.eff[v] > 0)[0] if a != cur]
                if not alts:
                    continue
                t_alts = [st.throughput(v, a) for a in alts]
                best = int(np.argmax(t_alts))
                if t_alts[best] > t_cur * (1 + 1e-12):
                    nxt = alts[best]
                    moves.append(LogicalMove(p.ue_ids[v], p.cell_ids[cur],
                                             p.cell_ids[nxt], PHASE_GREEDY, depth, 0))
                    st.place(v, nxt)
                    cur = nxt
                    handed_over = True
                    break
            if not handed_over:
                break
    return st.serving, moves


def mora(initial, cells, slices, ues, channel, config, cascade_cap=3) -> SchemeOutcome:
    """Greedy insertion assuming every slice is proportional-fair. The emitted
    allocation runs the dynamic allocator over PF-form demands."""
    p = Indexed(cells, slices, ues, channel)
    serving, moves = _greedy_insert(p, initial, _MoraState(p), cascade_cap)
    dist = p.distribution(serving)
    pf_slices = [replace(s, epsilon=1.0) for s in slices]
    pf_dem = compute_demand_state(pf_slices, dist, channel, cells, {u.id: u for u in ues})
    allocation = quota_alloc.allocate(pf_dem, pf_slices, cells)
    return _finish(dist, cells, slices, ues, channel, config, moves, allocation=allocation)


class _MoraPPState:
    """Incrementally maintained demand masses over the inserted subset, plus
    tentative-throughput evaluation via the real demand ratios and the swap
    allocator."""

    def __init__(self, p: Indexed, rel_tol=1e-9):
        self.p = p
        self.mass = np.zeros((len(p.slices), len(p.cells)))
        self.serving = np.full(len(p.ues), -1, dtype=np.intp)
        self.rel_tol = rel_tol

    def _ew(self, j, k):
        return self.p.weight[j] / self.p.eff[j, k] ** self.p.expo[self.p.ue_slice[j]]

    def place(self, j, k):
        if self.serving[j] >= 0:
            self.mass[self.p.ue_slice[j], self.serving[j]] -= self._ew(j, self.serving[j])
        self.serving[j] = k
        self.mass[self.p.ue_slice[j], k] += self._ew(j, k)

    def _quota_matrix(self, mass):
        p = self.p
        msum = mass.sum(axis=1)
        present = msum > 0
        d = np.zeros_like(mass)
        d[present] = mass[present] / msum[present, None]
        # only inserted slices carry demand; scale their quotas up so the
        # tentative problem still fills the whole capacity
        q = p.quota * present
        q = q * (p.cap.sum() / q.sum())
        nd = d * q[:, None]
        full = quota_alloc.allocate_array(nd, q, p.cap, self.rel_tol)
        return full

    def throughput(self, j, k):
        """Throughput of UE j if (re)placed at cell k, under the allocator's
        quotas for the tentative distribution."""
        p = self.p
        s = int(p.ue_slice[j])
        mass = self.mass.copy()
        if self.serving[j] >= 0:
            mass[s, self.serving[j]] -= self._ew(j, self.serving[j])
        ew = self._ew(j, k)
        mass[s, k] += ew
        qm = self._quota_matrix(mass)
        return qm[s, k] * ew * p.eff[j, k] / mass[s, k]

    def throughput_current(self, j):
        p = self.p
        s = int(p.ue_slice[j])
        k = int(self.serving[j])
        qm = self._quota_matrix(self.mass)
        return qm[s, k] * self._ew(j, k) * p.eff[j, k] / self.mass[s, k]


def mora_pp(initial, cells, slices, ues, channel, config, cascade_cap=3) -> SchemeOutcome:
    """MORA's insertion and cascade, with throughput evaluated through each
    slice's true objective parameter and the swap-based allocator."""
    p = Indexed(cells, slices, ues, channel)
    serving, moves = _greedy_insert(p, initial, _MoraPPState(p), cascade_cap)
    dist = p.distribution(serving)
    return _finish(dist, cells, slices, ues, channel, config, moves)


SCHEMES = {
    "radioweaver": radioweaver,
    "nolb": nolb,
    "naivelb": naivelb,
    "isolatedlb": isolatedlb,
    "mora": mora,
    "mora_pp": mora_pp,
}
