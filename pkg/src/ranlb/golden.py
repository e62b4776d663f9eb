"""The embedded two-cell / two-slice / 28-UE worked example.

Slice A (8 UEs, datarate fairness): 5 UEs local to the first cell with
efficiency T, 3 UEs local to the second cell with efficiency T/5. Slice B
(20 UEs, proportional fairness): 12 UEs at the first cell and 8 at the second,
with 4 and 3 of them respectively amenable between the cells. Both cells have
capacity R and both slices a global quota of R.

Every number asserted below follows by hand from the demand definitions; the
same fixture can be built over exact rationals to pin them without float
error. ``check_all`` runs the fixture through every scheme and compares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .baselines import SCHEMES
from .demand import compute_demand_state
from .engine import LbConfig, initialize_distribution
from .model import Cell, ChannelState, Slice, UE


@dataclass
class Fixture:
    cells: list
    slices: list
    ues: list
    channel: ChannelState
    config: LbConfig
    R: object
    T: object

    @property
    def ue_map(self):
        return {u.id: u for u in self.ues}


def build_fixture(exact: bool = False) -> Fixture:
    """28 UEs over two equal cells; ``exact`` builds it over Fractions."""
    num = Fraction if exact else float
    R = num(100)
    T = num(600)
    E = num(500)
    near = num(19) / num(20)  # amenable UEs: 0.95 ratio between the two cells

    cells = [Cell(0, R), Cell(1, R)]
    slices = [
        Slice(0, R, 0.0, frozenset(range(0, 8))),  # datarate fairness
        Slice(1, R, 1.0, frozenset(range(8, 28))),  # proportional fairness
    ]
    one = num(1)
    ues = [UE(i, 0, one) for i in range(8)] + [UE(i, 1, one) for i in range(8, 28)]

    eff = {}
    zero = num(0)
    for i in range(0, 5):  # slice A, local to cell 0
        eff[(i, 0)], eff[(i, 1)] = T, zero
    for i in range(5, 8):  # slice A, local to cell 1, 5x worse channel
        eff[(i, 0)], eff[(i, 1)] = zero, T / 5
    for i in range(8, 12):  # slice B at cell 0, amenable
        eff[(i, 0)], eff[(i, 1)] = E, near * E
    for i in range(12, 20):  # slice B, local to cell 0
        eff[(i, 0)], eff[(i, 1)] = E, zero
    for i in range(20, 23):  # slice B at cell 1, amenable
        eff[(i, 0)], eff[(i, 1)] = near * E, E
    for i in range(23, 28):  # slice B, local to cell 1
        eff[(i, 0)], eff[(i, 1)] = zero, E
    channel = ChannelState(eff)
    config = LbConfig(topology_mode="overlapping")
    return Fixture(cells, slices, ues, channel, config, R, T)


@dataclass
class CheckRow:
    scheme: str
    name: str
    expected: float
    actual: float
    ok: bool


def _row(rows, scheme, name, expected, actual, tol=1e-9):
    e, a = float(expected), float(actual)
    ok = math.isclose(e, a, rel_tol=tol, abs_tol=tol)
    rows.append(CheckRow(scheme, name, e, a, ok))


def _user_rates(fx, dist, alloc, workload_free=True):
    """Per-UE (rbs, rate) under proportional in-slice splitting; every UE is
    backlogged in this fixture."""
    from .demand import effective_weight

    rates = {}
    for slc in fx.slices:
        groups = {}
        for uid in sorted(slc.member_ue_ids):
            groups.setdefault(dist.cell_of(uid), []).append(uid)
        for cid, uids in groups.items():
            masses = {
                uid: effective_weight(fx.ue_map[uid], slc, fx.channel.efficiency_of(uid, cid))
                for uid in uids
            }
            total = sum(masses.values())
            q = alloc.quota_of(slc.id, cid)
            for uid in uids:
                n = q * masses[uid] / total
                rates[uid] = (n, n * fx.channel.efficiency_of(uid, cid))
    return rates


def check_all(fixture: Fixture | None = None) -> list[CheckRow]:
    """Run every scheme on the fixture and compare against the hand-derived
    values. Returns one row per checked quantity."""
    fx = fixture or build_fixture()
    R, T = float(fx.R), float(fx.T)
    rows: list[CheckRow] = []
    ue_map = fx.ue_map
    init = initialize_distribution(None, fx.ues, fx.channel, fx.cells)

    pre = compute_demand_state(fx.slices, init, fx.channel, fx.cells, ue_map)
    _row(rows, "initial", "tnd_cell0", 0.85 * R, pre.tnd[0])
    _row(rows, "initial", "tnd_cell1", 1.15 * R, pre.tnd[1])
    _row(rows, "initial", "ues_cell0", 17, len(init.ues_at(0)))
    _row(rows, "initial", "ues_cell1", 11, len(init.ues_at(1)))

    # radioweaver: three amenable moves make the distribution fully
    # complementary; each slice then gets exactly its normalized demand
    res, alloc = SCHEMES["radioweaver"](init, fx.cells, fx.slices, fx.ues, fx.channel, fx.config)
    _row(rows, "radioweaver", "logical_moves", 3, len(res.logical_moves))
    _row(rows, "radioweaver", "tnd_cell0", R, res.demand.tnd[0])
    _row(rows, "radioweaver", "tnd_cell1", R, res.demand.tnd[1])
    _row(rows, "radioweaver", "converged", 1, int(res.converged))
    _row(rows, "radioweaver", "quota_A_cell0", 0.25 * R, alloc.quota_of(0, 0))
    _row(rows, "radioweaver", "quota_A_cell1", 0.75 * R, alloc.quota_of(0, 1))
    _row(rows, "radioweaver", "quota_B_cell0", 0.75 * R, alloc.quota_of(1, 0))
    _row(rows, "radioweaver", "quota_B_cell1", 0.25 * R, alloc.quota_of(1, 1))
    rates = _user_rates(fx, res.distribution, alloc)
    for uid in sorted(fx.slices[0].member_ue_ids):
        _row(rows, "radioweaver", f"rate_A_ue{uid}", 0.05 * R * T, rates[uid][1])
    for uid in sorted(fx.slices[1].member_ue_ids):
        _row(rows, "radioweaver", f"rbs_B_ue{uid}", 0.05 * R, rates[uid][0])

    # naivelb: equalizes user counts (17 -> 14 / 11 -> 14), which makes the
    # demands fully non-complementary; quota stays at the static 0.5R split
    res, alloc = SCHEMES["naivelb"](init, fx.cells, fx.slices, fx.ues, fx.channel, fx.config)
    counts = [len(res.distribution.ues_at(0)), len(res.distribution.ues_at(1))]
    _row(rows, "naivelb", "ues_cell0", 14, counts[0])
    _row(rows, "naivelb", "ues_cell1", 14, counts[1])
    for s in (0, 1):
        for c in (0, 1):
            _row(rows, "naivelb", f"quota_s{s}_cell{c}", 0.5 * R, alloc.quota_of(s, c))
    rates = _user_rates(fx, res.distribution, alloc)
    for uid in range(0, 5):
        _row(rows, "naivelb", f"rate_A_ue{uid}", 0.1 * R * T, rates[uid][1])
    for uid in range(5, 8):
        _row(rows, "naivelb", f"rate_A_ue{uid}", R * T / 30, rates[uid][1])

    # isolatedlb: slice B rebalances itself with two moves; slice A's users at
    # the overloaded cell have no coverage elsewhere and stay stuck
    res, alloc = SCHEMES["isolatedlb"](init, fx.cells, fx.slices, fx.ues, fx.channel, fx.config)
    moves_b = [m for m in res.logical_moves if ue_map[m.ue_id].slice_id == 1]
    moves_a = [m for m in res.logical_moves if ue_map[m.ue_id].slice_id == 0]
    _row(rows, "isolatedlb", "moves_sliceB", 2, len(moves_b))
    _row(rows, "isolatedlb", "moves_sliceA", 0, len(moves_a))
    for s in (0, 1):
        for c in (0, 1):
            _row(rows, "isolatedlb", f"quota_s{s}_cell{c}", 0.5 * R, alloc.quota_of(s, c))
    rates = _user_rates(fx, res.distribution, alloc)
    for uid in sorted(fx.slices[1].member_ue_ids):
        _row(rows, "isolatedlb", f"rbs_B_ue{uid}", 0.05 * R, rates[uid][0])

    # nolb: highest-quality attachment with dynamic quota; one swap moves 0.1R
    # between the slices at each cell
    res, alloc = SCHEMES["nolb"](init, fx.cells, fx.slices, fx.ues, fx.channel, fx.config)
    _row(rows, "nolb", "ues_cell0", 17, len(res.distribution.ues_at(0)))
    _row(rows, "nolb", "ues_cell1", 11, len(res.distribution.ues_at(1)))
    _row(rows, "nolb", "quota_A_cell0", 0.4 * R, alloc.quota_of(0, 0))
    _row(rows, "nolb", "quota_A_cell1", 0.6 * R, alloc.quota_of(0, 1))
    _row(rows, "nolb", "quota_B_cell0", 0.6 * R, alloc.quota_of(1, 0))
    _row(rows, "nolb", "quota_B_cell1", 0.4 * R, alloc.quota_of(1, 1))
    rates = _user_rates(fx, res.distribution, alloc)
    for uid in range(0, 5):
        _row(rows, "nolb", f"rate_A_ue{uid}", 0.08 * R * T, rates[uid][1])
    for uid in range(5, 8):
        _row(rows, "nolb", f"rate_A_ue{uid}", 0.04 * R * T, rates[uid][1])
    for uid in sorted(fx.slices[1].member_ue_ids):
        _row(rows, "nolb", f"rbs_B_ue{uid}", 0.05 * R, rates[uid][0])
    return rows
