"""Domain types shared across the package: cells, slices, UEs, channel snapshots,
user distributions, and allocation schemes.

All types are immutable value objects; algorithms produce new values instead of
mutating. Identifiers are opaque integers assigned at scenario-loading time.
Quota and demand quantities are real-valued resource blocks (RBs); integral
rounding, if any, is a concern of the throughput model, not of these types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

REL_TOL = 1e-9


class RanLbError(Exception):
    """Base class for errors raised by this package."""


class ZeroEfficiency(RanLbError):
    pass


class EmptySlice(RanLbError):
    pass


class EmptyTraceSet(RanLbError):
    pass


class KeySetMismatch(RanLbError):
    pass


class UnreachableUE(RanLbError):
    pass


class PlacementInfeasible(RanLbError):
    pass


class InvalidAllocation(RanLbError):
    pass


@dataclass(frozen=True)
class Cell:
    """A base station. ``capacity_rbs`` is the RB budget per control interval."""

    id: int
    capacity_rbs: float
    position: tuple[float, float] = (0.0, 0.0)
    tx_power_dbm: float = 35.0
    bandwidth_mhz: float = 20.0
    is_macro: bool = False
    band_id: int = 0


@dataclass(frozen=True)
class Slice:
    """A tenant with a network-wide RB quota and an objective parameter.

    ``epsilon`` selects the scheduling objective: 1.0 is weighted proportional
    fairness, 0.0 is weighted datarate fairness, values in between interpolate
    how much channel quality is weighed into per-user demand.
    """

    id: int
    global_quota_rbs: float
    epsilon: float
    member_ue_ids: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "member_ue_ids", frozenset(self.member_ue_ids))


@dataclass(frozen=True)
class UE:
    id: int
    slice_id: int
    weight: float = 1.0
    position: tuple[float, float] = (0.0, 0.0)
    velocity: tuple[float, float] = (0.0, 0.0)
    is_mobile: bool = False


@dataclass(frozen=True)
class ChannelState:
    """Per-(UE, cell) deliverable bits per RB. A value of 0 means out of coverage."""

    efficiency: Mapping[tuple[int, int], float]

    def efficiency_of(self, ue_id: int, cell_id: int):
        return self.efficiency.get((ue_id, cell_id), 0.0)

    def best_cell(self, ue_id: int, cell_ids: Iterable[int]) -> int:
        """Cell with the highest efficiency for this UE; ties go to the lowest id."""
        best, best_e = None, 0.0
        for cid in sorted(cell_ids):
            e = self.efficiency_of(ue_id, cid)
            if e > best_e:
                best, best_e = cid, e
        if best is None:
            raise UnreachableUE(f"UE {ue_id} has zero efficiency from every cell")
        return best


@dataclass(frozen=True)
class UserDistribution:
    """The UE -> serving-cell map being optimized."""

    serving: Mapping[int, int]

    def __post_init__(self):
        object.__setattr__(self, "serving", dict(self.serving))

    def cell_of(self, ue_id: int) -> int:
        return self.serving[ue_id]

    def ues_at(self, cell_id: int) -> list[int]:
        return sorted(u for u, c in self.serving.items() if c == cell_id)

    def moved(self, ue_id: int, to_cell: int) -> "UserDistribution":
        new = dict(self.serving)
        new[ue_id] = to_cell
        return UserDistribution(new)


def _close(a, b, rel=REL_TOL) -> bool:
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class AllocationScheme:
    """Per-(slice, cell) quotas. Carries the targets so it can self-validate:
    every slice's quotas must sum to its global quota and every cell's quotas
    must sum to its capacity (1e-9 relative)."""

    quota: Mapping[tuple[int, int], float]
    slice_quota: Mapping[int, float]
    cell_capacity: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "quota", dict(self.quota))
        for sid, target in self.slice_quota.items():
            total = sum(v for (i, _), v in self.quota.items() if i == sid)
            if not _close(total, target):
                raise InvalidAllocation(
                    f"slice {sid} quotas sum to {total}, expected {target}"
                )
        for cid, target in self.cell_capacity.items():
            total = sum(v for (_, k), v in self.quota.items() if k == cid)
            if not _close(total, target):
                raise InvalidAllocation(
                    f"cell {cid} quotas sum to {total}, expected {target}"
                )

    def quota_of(self, slice_id: int, cell_id: int):
        return self.quota.get((slice_id, cell_id), 0.0)


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"


def validate_topology(cells, slices, ues, channel) -> list[Violation]:
    """Check every type invariant; returns one entry per violation.

    Pure: identical inputs yield an identical list. Violations are data, not
    errors -- callers decide whether to abort.
    """
    out: list[Violation] = []
    seen_cells = set()
    for c in cells:
        if c.id in seen_cells:
            out.append(Violation("DuplicateCellId", f"cell id {c.id} repeated"))
        seen_cells.add(c.id)
        if not c.capacity_rbs > 0:
            out.append(
                Violation("NonPositiveCapacity", f"cell {c.id}: {c.capacity_rbs}")
            )

    seen_slices = set()
    members_seen: dict[int, int] = {}
    for s in slices:
        if s.id in seen_slices:
            out.append(Violation("DuplicateSliceId", f"slice id {s.id} repeated"))
        seen_slices.add(s.id)
        if not (0.0 <= s.epsilon <= 1.0):
            out.append(
                Violation("EpsilonOutOfRange", f"slice {s.id}: epsilon={s.epsilon}")
            )
        if not s.global_quota_rbs > 0:
            out.append(
                Violation("NonPositiveQuota", f"slice {s.id}: {s.global_quota_rbs}")
            )
        for uid in s.member_ue_ids:
            if uid in members_seen:
                out.append(
                    Violation(
                        "OverlappingSliceMembers",
                        f"ue {uid} in slices {members_seen[uid]} and {s.id}",
                    )
                )
            members_seen[uid] = s.id

    total_quota = sum(s.global_quota_rbs for s in slices)
    total_cap = sum(c.capacity_rbs for c in cells)
    if not _close(total_quota, total_cap):
        out.append(
            Violation(
                "QuotaCapacityMismatch",
                f"sum of slice quotas {total_quota} != total capacity {total_cap}",
            )
        )

    seen_ues = set()
    for u in ues:
        if u.id in seen_ues:
            out.append(Violation("DuplicateUEId", f"ue id {u.id} repeated"))
        seen_ues.add(u.id)
        if not u.weight > 0:
            out.append(Violation("NonPositiveWeight", f"ue {u.id}: {u.weight}"))
        if u.slice_id not in seen_slices:
            out.append(
                Violation("UnknownSlice", f"ue {u.id} references slice {u.slice_id}")
            )
        elif u.id not in members_seen or members_seen[u.id] != u.slice_id:
            out.append(
                Violation(
                    "MemberMismatch",
                    f"ue {u.id} not listed as member of slice {u.slice_id}",
                )
            )
        covered = False
        for c in cells:
            e = channel.efficiency_of(u.id, c.id)
            if not math.isfinite(e) or e < 0:
                out.append(
                    Violation(
                        "BadEfficiency", f"efficiency for (ue {u.id}, cell {c.id}): {e}"
                    )
                )
            elif e > 0:
                covered = True
        if not covered:
            out.append(
                Violation("UnreachableUE", f"ue {u.id} has no cell with efficiency > 0")
            )
    return out
