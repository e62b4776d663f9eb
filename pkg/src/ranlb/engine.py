"""Logical-handover engine: multi-round two-step balancing between overloaded
and underloaded cells, with a slice-agnostic first phase (amenable UEs) and a
slice-specific second phase (moves that improve the UE's slice objective).

The engine works on an indexed array view of the problem and fully recomputes
the demand state after every accepted move (demand ratios renormalize across
all cells whenever a UE moves, so incremental per-cell updates would be wrong).
Physical handovers are never triggered here; callers diff the final
distribution against the previous one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .demand import compute_demand_state
from .model import (
    Cell,
    ChannelState,
    EmptySlice,
    KeySetMismatch,
    Slice,
    UE,
    UnreachableUE,
    UserDistribution,
    ZeroEfficiency,
)

PHASE_AMENABLE = "amenable"
PHASE_OBJECTIVE = "objective"
PHASE_GREEDY = "greedy"

MACRO_RELAY = "macro_relay"
OVERLAPPING = "overlapping"


@dataclass(frozen=True)
class LbConfig:
    alpha: float = 0.8
    max_rounds: int = 10
    load_eq_tolerance: float = 1e-6
    topology_mode: str = MACRO_RELAY

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.topology_mode not in (MACRO_RELAY, OVERLAPPING):
            raise ValueError(f"unknown topology_mode {self.topology_mode!r}")


class LogicalMove(NamedTuple):
    ue_id: int
    from_cell: int
    to_cell: int
    phase: str
    round: int
    step: int


@dataclass(frozen=True)
class LbResult:
    distribution: UserDistribution
    demand: object  # DemandState
    logical_moves: tuple[LogicalMove, ...]
    converged: bool


class Indexed:
    """Array view of one balancing problem. Rows of ``eff`` follow ascending
    UE id; columns follow ascending cell id."""

    def __init__(self, cells, slices, ues, channel):
        self.cells = sorted(cells, key=lambda c: c.id)
        self.slices = sorted(slices, key=lambda s: s.id)
        self.ues = sorted(ues, key=lambda u: u.id)
        self.cell_ids = [c.id for c in self.cells]
        self.slice_ids = [s.id for s in self.slices]
        self.ue_ids = [u.id for u in self.ues]
        self.cell_index = {cid: i for i, cid in enumerate(self.cell_ids)}
        self.slice_index = {sid: i for i, sid in enumerate(self.slice_ids)}
        self.ue_index = {uid: i for i, uid in enumerate(self.ue_ids)}

        n, k = len(self.ues), len(self.cells)
        self.eff = np.zeros((n, k))
        for i, u in enumerate(self.ues):
            for j, cid in enumerate(self.cell_ids):
                self.eff[i, j] = channel.efficiency_of(u.id, cid)
        self.weight = np.array([u.weight for u in self.ues])
        self.ue_slice = np.array(
            [self.slice_index[u.slice_id] for u in self.ues], dtype=np.intp
        )
        self.expo = np.array([1.0 - s.epsilon for s in self.slices])
        self.quota = np.array([s.global_quota_rbs for s in self.slices])
        self.cap = np.array([c.capacity_rbs for c in self.cells])
        self.is_macro = np.array([c.is_macro for c in self.cells], dtype=bool)

    def serving_array(self, distribution: UserDistribution) -> np.ndarray:
        serv = np.empty(len(self.ues), dtype=np.intp)
        for i, u in enumerate(self.ues):
            serv[i] = self.cell_index[distribution.cell_of(u.id)]
        return serv

    def distribution(self, serving: np.ndarray) -> UserDistribution:
        return UserDistribution(
            {u.id: self.cell_ids[serving[i]] for i, u in enumerate(self.ues)}
        )


class _State:
    def __init__(self, problem: Indexed, serving: np.ndarray):
        self.p = problem
        self.serving = serving
        self.recompute()

    def recompute(self):
        p = self.p
        self.mass = _kernels.slice_cell_mass(
            self.serving, p.ue_slice, p.weight, p.eff, p.expo,
            len(p.slices), len(p.cells),
        )
        msum = self.mass.sum(axis=1)
        if np.any(msum <= 0):
            empty = p.slice_ids[int(np.argmin(msum))]
            raise EmptySlice(f"slice {empty} has no member UEs")
        self.ratio = self.mass / msum[:, None]
        self.nd = self.ratio * p.quota[:, None]
        self.tnd = self.nd.sum(axis=0)
        self.lr = self.tnd / p.cap
        self.count = np.bincount(self.serving, minlength=len(p.cells)).astype(float)

    def move(self, ue_idx: int, to_cell_idx: int):
        self.serving[ue_idx] = to_cell_idx
        self.recompute()


def tnd_ratios(state: _State) -> np.ndarray:
    return state.lr


def user_count_ratios(state: _State) -> np.ndarray:
    """Per-user-count load relative to a capacity-proportional share. The
    small-cell reference capacity cancels out of the ratio."""
    p = state.p
    balanced = state.count.sum() * p.cap / p.cap.sum()
    return state.count / balanced


def capacity_scaled_quota(state: _State, s: int) -> np.ndarray:
    """Per-cell quota the slice would get if demands were honored up to
    capacity: D_sk scaled down by R_k / L_k at overloaded cells."""
    with np.errstate(divide="ignore"):
        scale = np.where(state.tnd > 0, np.minimum(1.0, state.p.cap / state.tnd), 1.0)
    return state.nd[s] * scale


def _slice_score(state: _State, s: int, quota_by_cell: np.ndarray) -> float:
    """Objective of slice ``s`` under the given per-cell quotas: min normalized
    throughput for datarate-fairness slices, mass-weighted log throughput
    otherwise."""
    p = state.p
    members = np.where(p.ue_slice == s)[0]
    serv = state.serving[members]
    w_cell = state.mass[s]
    if p.expo[s] == 1.0:  # epsilon = 0: datarate fairness
        used = np.unique(serv)
        vals = quota_by_cell[used] / w_cell[used]
        return float(vals.min())
    e = p.eff[members, serv]
    ew = p.weight[members] / e ** p.expo[s]
    t = quota_by_cell[serv] * ew * e / w_cell[serv]
    if np.any(t <= 0):
        return -math.inf
    return float(np.sum(ew * np.log(t)))


def _improved(after: float, before: float, rel: float = 1e-9) -> bool:
    if before == -math.inf:
        return after > -math.inf
    return after - before > rel * max(1.0, abs(before))


def _transfer(
    state: _State,
    o: int,
    u: int,
    cfg: LbConfig,
    ratios: Callable[[_State], np.ndarray],
    phase2_quota: Callable[[_State, int], np.ndarray],
    mask: np.ndarray,
    log: list[LogicalMove],
    round_no: int,
    step_no: int,
) -> None:
    """Move UEs from cell index ``o`` to ``u`` until the pair is balanced or no
    candidate qualifies. Candidates are visited in descending order of the
    target/source efficiency ratio (ties by UE id); the amenable prefix moves
    unconditionally, the rest only when the move improves the UE's slice
    objective."""
    p = state.p
    tol = cfg.load_eq_tolerance
    cand = np.where((state.serving == o) & mask)[0]
    if cand.size == 0:
        return
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p.eff[cand, o] > 0, p.eff[cand, u] / p.eff[cand, o], 0.0)
    order = np.lexsort((cand, -ratio))
    for posn in order:
        j = int(cand[posn])
        rj = float(ratio[posn])
        lrs = ratios(state)
        gap = lrs[o] - lrs[u]
        if gap <= tol:
            return  # load-driven stop: pair balanced
        if p.eff[j, u] <= 0.0:
            continue  # target cannot serve this UE at all
        s = int(p.ue_slice[j])
        is_amenable = rj >= cfg.alpha
        before = None if is_amenable else _slice_score(state, s, phase2_quota(state, s))
        state.move(j, u)
        new_lrs = ratios(state)
        new_gap = new_lrs[o] - new_lrs[u]
        if new_gap < 0 and -new_gap > gap:
            state.move(j, o)  # would invert the pair order beyond the old gap
            return
        if not is_amenable:
            after = _slice_score(state, s, phase2_quota(state, s))
            if not _improved(after, before):
                state.move(j, o)
                continue
        log.append(
            LogicalMove(
                p.ue_ids[j], p.cell_ids[o], p.cell_ids[u],
                PHASE_AMENABLE if is_amenable else PHASE_OBJECTIVE,
                round_no, step_no,
            )
        )
        if new_gap < 0:
            return  # order inverted within the old gap: pair done


def _run_rounds(
    state: _State,
    cfg: LbConfig,
    ratios: Callable[[_State], np.ndarray],
    phase2_quota: Callable[[_State, int], np.ndarray],
    mask: np.ndarray,
    log: list[LogicalMove],
) -> bool:
    """Repeat two-step rounds until the metric is balanced, a round makes no
    moves, or max_rounds is reached. Returns whether the metric is balanced."""
    p = state.p
    tol = cfg.load_eq_tolerance

    def balanced() -> bool:
        return bool(np.max(np.abs(ratios(state) - 1.0)) <= tol)

    macro = None
    if cfg.topology_mode == MACRO_RELAY:
        macros = np.where(p.is_macro)[0]
        if macros.size != 1:
            raise ValueError(
                f"macro_relay mode needs exactly one macro cell, found {macros.size}"
            )
        macro = int(macros[0])

    for rnd in range(1, cfg.max_rounds + 1):
        n_before = len(log)
        if cfg.topology_mode == MACRO_RELAY:
            lrs = ratios(state)
            sources = sorted(
                (k for k in range(len(p.cells)) if k != macro and lrs[k] > 1 + tol),
                key=lambda k: (-lrs[k], k),
            )
            for o in sources:
                cur = ratios(state)
                if cur[o] > 1 + tol and cur[o] > cur[macro] + tol:
                    _transfer(state, o, macro, cfg, ratios, phase2_quota, mask, log, rnd, 1)
            lrs = ratios(state)
            targets = sorted(
                (k for k in range(len(p.cells)) if k != macro and lrs[k] < 1 - tol),
                key=lambda k: (lrs[k], k),
            )
            for u in targets:
                cur = ratios(state)
                if cur[u] < 1 - tol and cur[macro] > cur[u] + tol:
                    _transfer(state, macro, u, cfg, ratios, phase2_quota, mask, log, rnd, 2)
        else:
            lrs = ratios(state)
            sources = sorted(
                (k for k in range(len(p.cells)) if lrs[k] > 1 + tol),
                key=lambda k: (-lrs[k], k),
            )
            for o in sources:
                cur = ratios(state)
                if cur[o] <= 1 + tol:
                    continue
                targets = sorted(
                    (k for k in range(len(p.cells)) if k != o and cur[k] < 1 - tol),
                    key=lambda k: (cur[k], k),
                )
                for u in targets:
                    cur = ratios(state)
                    if cur[o] > 1 + tol and cur[u] < 1 - tol and cur[o] > cur[u] + tol:
                        _transfer(state, o, u, cfg, ratios, phase2_quota, mask, log, rnd, 1)
        if balanced():
            return True
        if len(log) == n_before:
            return False
    return balanced()


def initialize_distribution(
    previous,
    ues: Sequence[UE],
    channel: ChannelState,
    cells: Sequence[Cell],
    changed_ue_ids=None,
) -> UserDistribution:
    """Seed the serving map for one invocation.

    UEs keep their previous cell unless they are new, their channel there has
    collapsed, or the caller flags them as significantly changed; those get the
    cell with the highest efficiency (ties to the lowest cell id).
    """
    cell_ids = [c.id for c in cells]
    changed = set() if changed_ue_ids is None else set(changed_ue_ids)
    serving = {}
    for u in sorted(ues, key=lambda x: x.id):
        if previous is not None and u.id in previous.serving and u.id not in changed:
            prev_cell = previous.cell_of(u.id)
            if channel.efficiency_of(u.id, prev_cell) > 0:
                serving[u.id] = prev_cell
                continue
        serving[u.id] = channel.best_cell(u.id, cell_ids)
    return UserDistribution(serving)


def amenable(ue, from_cell, to_cell, channel: ChannelState, alpha: float) -> bool:
    """True when the UE's efficiency at the target is at least ``alpha`` times
    its efficiency at the source."""
    uid = getattr(ue, "id", ue)
    fid = getattr(from_cell, "id", from_cell)
    tid = getattr(to_cell, "id", to_cell)
    e_from = channel.efficiency_of(uid, fid)
    if e_from <= 0:
        raise ZeroEfficiency(f"ue {uid} has zero efficiency from cell {fid}")
    return channel.efficiency_of(uid, tid) / e_from >= alpha


def transfer_between(
    overloaded,
    underloaded,
    distribution: UserDistribution,
    cells: Sequence[Cell],
    slices: Sequence[Slice],
    ues: Sequence[UE],
    channel: ChannelState,
    config: LbConfig,
) -> tuple[UserDistribution, list[LogicalMove]]:
    """One overloaded-to-underloaded pair transfer (both phases), standalone."""
    p = Indexed(cells, slices, ues, channel)
    state = _State(p, p.serving_array(distribution))
    o = p.cell_index[getattr(overloaded, "id", overloaded)]
    u = p.cell_index[getattr(underloaded, "id", underloaded)]
    log: list[LogicalMove] = []
    mask = np.ones(len(p.ues), dtype=bool)
    _transfer(state, o, u, config, tnd_ratios, capacity_scaled_quota, mask, log, 1, 1)
    return p.distribution(state.serving), log


def run_load_balancer(
    initial: UserDistribution,
    cells: Sequence[Cell],
    slices: Sequence[Slice],
    ues: Sequence[UE],
    channel: ChannelState,
    config: LbConfig,
) -> LbResult:
    """Balance TND load ratios toward 1 at every cell.

    macro_relay mode routes load between non-overlapping small cells through
    the macrocell (step 1 drains overloaded small cells into the macro, step 2
    drains the macro into underloaded small cells); overlapping mode transfers
    directly between small cells. Non-convergence is reported, not raised.
    """
    p = Indexed(cells, slices, ues, channel)
    for u in p.ues:
        if channel.efficiency_of(u.id, initial.cell_of(u.id)) <= 0:
            raise UnreachableUE(
                f"ue {u.id} starts on cell {initial.cell_of(u.id)} with zero efficiency"
            )
    state = _State(p, p.serving_array(initial))
    log: list[LogicalMove] = []
    _run_rounds(state, config, tnd_ratios, capacity_scaled_quota,
                np.ones(len(p.ues), dtype=bool), log)
    dist = p.distribution(state.serving)
    dem = compute_demand_state(slices, dist, channel, cells, {u.id: u for u in ues})
    converged = all(
        abs(r - 1.0) <= config.load_eq_tolerance for r in dem.load_ratio.values()
    )
    return LbResult(dist, dem, tuple(log), converged)


def diff_physical_handovers(previous: UserDistribution, final: UserDistribution):
    """UEs whose serving cell differs between the two distributions. Logical
    intermediate moves never appear here."""
    if set(previous.serving) != set(final.serving):
        raise KeySetMismatch("distributions cover different UE sets")
    return [
        (uid, previous.serving[uid], final.serving[uid])
        for uid in sorted(previous.serving)
        if previous.serving[uid] != final.serving[uid]
    ]
