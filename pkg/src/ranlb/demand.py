"""Per-slice demand ratios, normalized demands, the per-cell total-normalized-
demand (TND) load metric, and slice objective values.

This module is the reference implementation: plain Python arithmetic over the
domain types, so it preserves exact values when fed ``fractions.Fraction``
inputs (used to pin the golden-example numbers). The handover engine keeps an
equivalent array representation internally for speed; tests cross-check the
two against each other and against brute-force summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import Cell, ChannelState, EmptySlice, Slice, UE, UserDistribution, ZeroEfficiency

REL_TOL = 1e-9


@dataclass(frozen=True)
class DemandState:
    """Demand ratios d, normalized demands D = d * Q, per-cell TND L = sum_i D,
    and load ratios L / R for one user distribution."""

    demand_ratio: Mapping[tuple[int, int], float]
    normalized_demand: Mapping[tuple[int, int], float]
    tnd: Mapping[int, float]
    load_ratio: Mapping[int, float]

    def overloaded_cells(self, rel_tol: float = REL_TOL) -> list[int]:
        return sorted(k for k, r in self.load_ratio.items() if r > 1 + rel_tol)

    def underloaded_cells(self, rel_tol: float = REL_TOL) -> list[int]:
        return sorted(k for k, r in self.load_ratio.items() if r < 1 - rel_tol)

    def is_balanced(self, rel_tol: float = REL_TOL) -> bool:
        return all(abs(r - 1) <= rel_tol for r in self.load_ratio.values())


def effective_weight(ue: UE, slc: Slice, efficiency):
    """Demand mass of one UE: w / e**(1 - epsilon).

    epsilon = 1 reduces to the weight alone (proportional fairness); epsilon = 0
    reduces to w / e (datarate fairness). Integer exponents are special-cased so
    exact rational inputs stay exact.
    """
    if efficiency <= 0:
        raise ZeroEfficiency(f"ue {ue.id} has efficiency {efficiency} from its serving cell")
    expo = 1.0 - slc.epsilon
    if expo == 0.0:
        return ue.weight
    if expo == 1.0:
        return ue.weight / efficiency
    return ue.weight / efficiency**expo


def demand_ratios(
    slc: Slice,
    distribution: UserDistribution,
    channel: ChannelState,
    ues: Mapping[int, UE],
    cells: Sequence[Cell],
):
    """Fraction of the slice's global quota it wants at each cell.

    The per-cell share is the sum of member demand masses served there divided
    by the slice-wide sum; the efficiency used is from each UE's serving cell.
    Ratios sum to 1 across cells.
    """
    if not slc.member_ue_ids:
        raise EmptySlice(f"slice {slc.id} has no member UEs")
    per_cell = {c.id: 0 for c in cells}
    total = 0
    for uid in sorted(slc.member_ue_ids):
        ue = ues[uid]
        cid = distribution.cell_of(uid)
        ew = effective_weight(ue, slc, channel.efficiency_of(uid, cid))
        per_cell[cid] += ew
        total += ew
    return {cid: mass / total for cid, mass in per_cell.items()}


def compute_demand_state(
    slices: Sequence[Slice],
    distribution: UserDistribution,
    channel: ChannelState,
    cells: Sequence[Cell],
    ues: Mapping[int, UE],
) -> DemandState:
    ratio: dict[tuple[int, int], float] = {}
    nd: dict[tuple[int, int], float] = {}
    tnd = {c.id: 0 for c in cells}
    for slc in slices:
        d = demand_ratios(slc, distribution, channel, ues, cells)
        for cid, v in d.items():
            ratio[(slc.id, cid)] = v
            nd[(slc.id, cid)] = v * slc.global_quota_rbs
            tnd[cid] += nd[(slc.id, cid)]
    load_ratio = {c.id: tnd[c.id] / c.capacity_rbs for c in cells}
    return DemandState(ratio, nd, tnd, load_ratio)


def _grouped_members(slc, distribution, channel, ues):
    """Member UEs grouped by serving cell, with (weight, efficiency, mass)."""
    groups: dict[int, list[tuple]] = {}
    for uid in sorted(slc.member_ue_ids):
        ue = ues[uid]
        cid = distribution.cell_of(uid)
        e = channel.efficiency_of(uid, cid)
        ew = effective_weight(ue, slc, e)
        groups.setdefault(cid, []).append((ue.weight, e, ew))
    return groups


def slice_objective_pair(
    slc: Slice,
    distribution: UserDistribution,
    channel: ChannelState,
    quota_by_cell: Mapping[int, float],
    ues: Mapping[int, UE],
) -> tuple[float, float]:
    """(log-form value, min-form value) for the slice under the given per-cell
    quotas.

    Within each cell RBs are split across members in proportion to their demand
    mass. The log-form value is sum(mass * log(throughput)); with epsilon = 1 the
    mass equals the weight, giving the weighted-PF objective exactly. The
    min-form value is min(throughput / weight); with epsilon = 0 it is the
    datarate-fairness objective. A cell with members but zero quota contributes
    -inf to the log form and 0 to the min form.
    """
    if not slc.member_ue_ids:
        raise EmptySlice(f"slice {slc.id} has no member UEs")
    groups = _grouped_members(slc, distribution, channel, ues)
    log_form = 0.0
    min_form = math.inf
    for cid, members in groups.items():
        q = quota_by_cell.get(cid, 0.0)
        mass = sum(ew for _, _, ew in members)
        for w, e, ew in members:
            t = q * ew * e / mass
            if t <= 0:
                log_form = -math.inf
                min_form = 0.0
            else:
                log_form += ew * math.log(t)
                min_form = min(min_form, t / w)
    return log_form, min_form


def slice_objective(
    slc: Slice,
    distribution: UserDistribution,
    channel: ChannelState,
    quota_by_cell: Mapping[int, float],
    ues: Mapping[int, UE],
) -> float:
    """Scalar objective used for comparisons: the min form for epsilon = 0,
    the log form otherwise (the two agree on their maximizing allocation at
    both endpoints)."""
    log_form, min_form = slice_objective_pair(slc, distribution, channel, quota_by_cell, ues)
    return min_form if slc.epsilon == 0.0 else log_form
