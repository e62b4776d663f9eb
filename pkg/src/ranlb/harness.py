"""Scenario generation, the control-interval time loop, trigger logic,
mobility, workloads, throughput accounting, and metrics.

One experiment run is single-threaded and fully deterministic per seed: every
random draw comes from a purpose-keyed generator derived from the scenario
seed, so results do not depend on evaluation order or platform dict ordering.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from typing import Mapping, Optional, Sequence

import numpy as np

from . import channel as chan
from .baselines import SCHEMES
from .channel import ChannelModel, PathLossModel, cell_coverage_radius_m
from .demand import effective_weight
from .engine import LbConfig, diff_physical_handovers, initialize_distribution
from .model import (
    Cell,
    PlacementInfeasible,
    Slice,
    UE,
    UserDistribution,
    validate_topology,
)

SPEED_18_MPH_MPS = 8.0467
SIM_BOUNDARY_M = 5000.0
RBS_PER_MHZ_PER_MS = 10.0  # 20 MHz <-> 100 RBs per 0.5 ms slot
PARETO_SHAPE = 1.2
FLOW_MIN_BITS = 50_000 * 8
FLOW_MAX_BITS = 50_000_000 * 8
THROUGHPUT_FLOOR_BPS = 1.0  # keeps log metrics finite for starved UEs

# rng stream keys (mixed with the scenario seed)
_TOPOLOGY, _PLACEMENT, _MOBILITY, _PRIORITY, _WORKLOAD = 0, 1, 2, 3, 4


@dataclass
class CellsSpec:
    n_small: int = 4
    layout: str = "macro_relay"  # or "overlapping"
    macro_power_dbm: float = 49.0
    small_power_dbm: float = 35.0
    macro_bandwidth_mhz: float = 100.0
    small_bandwidth_mhz: float = 20.0
    radial_range_m: tuple[float, float] = (500.0, 700.0)
    min_separation_m: float = 1000.0
    small_spacing_m: float = 500.0  # overlapping layout


@dataclass
class WorkloadSpec:
    kind: str = "backlogged"  # or "web"
    mean_rate_bps: float = 3e6
    arrival: str = "poisson"


@dataclass
class PrioritizedSpec:
    fraction: float = 0.0
    weight: float = 5.0
    regions: Optional[list[str]] = None  # region names; None means any


@dataclass
class SliceSpec:
    quota_share: float
    epsilon: float
    users_per_region: dict[str, tuple[int, int]]
    prioritized: PrioritizedSpec = field(default_factory=PrioritizedSpec)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    name: str = ""


@dataclass
class MobilitySpec:
    mobile_fraction: float = 0.5
    speed_mps: float = SPEED_18_MPH_MPS


@dataclass
class ChannelSpec:
    mode: str = "synthetic"  # or "trace"
    noise_floor_dbm: float = -92.0
    shadowing_sigma_db: float = 0.0
    trace_manifest: Optional[str] = None


@dataclass
class ScenarioConfig:
    cells: CellsSpec
    slices: list[SliceSpec]
    mobility: MobilitySpec = field(default_factory=MobilitySpec)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    duration_ms: float = 20000.0
    control_interval_ms: float = 500.0
    trigger_db: float = 3.0
    seed: int = 0
    scheme: str = "radioweaver"
    alpha: float = 0.8
    max_rounds: int = 10
    load_eq_tolerance: float = 1e-6

    def lb_config(self) -> LbConfig:
        mode = "overlapping" if self.cells.layout == "overlapping" else "macro_relay"
        return LbConfig(
            alpha=self.alpha,
            max_rounds=self.max_rounds,
            load_eq_tolerance=self.load_eq_tolerance,
            topology_mode=mode,
        )

    def region_names(self) -> list[str]:
        names = [f"C{i}" for i in range(1, self.cells.n_small + 1)]
        if self.cells.layout != "overlapping":
            names.append("macro")
        return names

    def validate(self) -> list[str]:
        problems = []
        total_share = sum(s.quota_share for s in self.slices)
        if abs(total_share - 1.0) > 1e-9:
            problems.append(
                f"QuotaCapacityMismatch: slice quota shares sum to {total_share}, expected 1"
            )
        if not 0.0 <= self.mobility.mobile_fraction <= 1.0:
            problems.append(
                f"BadMobileFraction: {self.mobility.mobile_fraction} outside [0, 1]"
            )
        if self.scheme not in SCHEMES:
            problems.append(f"UnknownScheme: {self.scheme!r}")
        known = set(self.region_names())
        for i, s in enumerate(self.slices):
            if not 0.0 <= s.epsilon <= 1.0:
                problems.append(f"EpsilonOutOfRange: slice {i} epsilon={s.epsilon}")
            if s.workload.kind not in ("backlogged", "web"):
                problems.append(f"UnknownWorkload: slice {i} kind={s.workload.kind!r}")
            for region, (lo, hi) in s.users_per_region.items():
                if region not in known:
                    problems.append(f"UnknownRegion: slice {i} region {region!r}")
                if lo > hi or lo < 0:
                    problems.append(f"BadUserRange: slice {i} region {region}: [{lo}, {hi}]")
        if self.channel.mode == "trace" and not self.channel.trace_manifest:
            problems.append("MissingTraceManifest: channel mode is trace")
        if self.channel.mode not in ("synthetic", "trace"):
            problems.append(f"UnknownChannelMode: {self.channel.mode!r}")
        if self.control_interval_ms <= 0 or self.duration_ms <= 0:
            problems.append("BadTiming: duration and control interval must be positive")
        if self.cells.n_small < 0 or (self.cells.layout == "overlapping" and self.cells.n_small < 1):
            problems.append("BadCellCount")
        return problems

    def to_dict(self) -> dict:
        d = asdict(self)
        for s in d["slices"]:
            s["users_per_region"] = {k: list(v) for k, v in s["users_per_region"].items()}
        d["cells"]["radial_range_m"] = list(self.cells.radial_range_m)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        cells = CellsSpec(**{**d.pop("cells", {}),})
        if isinstance(cells.radial_range_m, list):
            cells.radial_range_m = tuple(cells.radial_range_m)
        slices = []
        for s in d.pop("slices"):
            s = dict(s)
            s["users_per_region"] = {
                k: tuple(v) for k, v in s.get("users_per_region", {}).items()
            }
            if isinstance(s.get("prioritized"), dict):
                s["prioritized"] = PrioritizedSpec(**s["prioritized"])
            if isinstance(s.get("workload"), dict):
                s["workload"] = WorkloadSpec(**s["workload"])
            slices.append(SliceSpec(**s))
        mobility = MobilitySpec(**d.pop("mobility", {}))
        ch = ChannelSpec(**d.pop("channel", {}))
        return cls(cells=cells, slices=slices, mobility=mobility, channel=ch, **d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load_scenario(path) -> ScenarioConfig:
    import yaml

    with open(path) as fh:
        data = yaml.safe_load(fh)
    return ScenarioConfig.from_dict(data)


def _capacity_rbs(bandwidth_mhz: float, interval_ms: float) -> float:
    return bandwidth_mhz * RBS_PER_MHZ_PER_MS * interval_ms


def generate_topology(config: ScenarioConfig, seed: int) -> list[Cell]:
    """Build the cell list. macro_relay: macro at the origin plus small cells
    rejection-sampled at the configured radial distance with the configured
    pairwise separation. overlapping: no macro, small cells on a line at the
    configured spacing. Raises PlacementInfeasible after 10,000 candidate
    draws."""
    spec = config.cells
    dt = config.control_interval_ms
    if spec.layout == "overlapping":
        return [
            Cell(
                id=i + 1,
                capacity_rbs=_capacity_rbs(spec.small_bandwidth_mhz, dt),
                position=(spec.small_spacing_m * i, 0.0),
                tx_power_dbm=spec.small_power_dbm,
                bandwidth_mhz=spec.small_bandwidth_mhz,
                is_macro=False,
                band_id=i + 1,
            )
            for i in range(spec.n_small)
        ]

    rng = np.random.default_rng((seed, _TOPOLOGY))
    rmin, rmax = spec.radial_range_m
    budget = 10_000
    draws = 0
    points: list[tuple[float, float]] = []
    fails = 0
    while len(points) < spec.n_small:
        if draws >= budget:
            raise PlacementInfeasible(
                f"could not place {spec.n_small} small cells with pairwise "
                f"separation {spec.min_separation_m} m within {budget} draws"
            )
        draws += 1
        r = rng.uniform(rmin, rmax)
        th = rng.uniform(0.0, 2.0 * math.pi)
        cand = (r * math.cos(th), r * math.sin(th))
        if all(math.dist(cand, q) >= spec.min_separation_m for q in points):
            points.append(cand)
            fails = 0
        else:
            fails += 1
            if fails >= 100:  # stuck configuration: restart
                points.clear()
                fails = 0
    cells = [
        Cell(
            id=0,
            capacity_rbs=_capacity_rbs(spec.macro_bandwidth_mhz, dt),
            position=(0.0, 0.0),
            tx_power_dbm=spec.macro_power_dbm,
            bandwidth_mhz=spec.macro_bandwidth_mhz,
            is_macro=True,
            band_id=0,
        )
    ]
    for i, ptn in enumerate(points):
        cells.append(
            Cell(
                id=i + 1,
                capacity_rbs=_capacity_rbs(spec.small_bandwidth_mhz, dt),
                position=ptn,
                tx_power_dbm=spec.small_power_dbm,
                bandwidth_mhz=spec.small_bandwidth_mhz,
                is_macro=False,
                band_id=i + 1,
            )
        )
    return cells


def _region_geometry(config, cells, model):
    """Region name -> (center, radius, keep-out discs)."""
    small = [c for c in cells if not c.is_macro]
    regions = {}
    small_discs = [(c.position, cell_coverage_radius_m(model, c)) for c in small]
    for i, c in enumerate(small):
        regions[f"C{i + 1}"] = (c.position, small_discs[i][1], [])
    macro = [c for c in cells if c.is_macro]
    if macro and config.cells.layout != "overlapping":
        m = macro[0]
        regions["macro"] = (m.position, cell_coverage_radius_m(model, m), small_discs)
    return regions


def place_users(
    config: ScenarioConfig, cells: Sequence[Cell], chm: ChannelModel, seed: int
) -> tuple[list[Slice], list[UE]]:
    """Draw per-slice per-region user counts and positions.

    Positions are uniform in the region's coverage disc; UEs in the macro
    region are rejected until they fall outside every small-cell disc, and all
    UEs are rejected until they have coverage including their frozen
    shadowing. Prioritized subsets get the configured weight multiplier.
    """
    rng = np.random.default_rng((seed, _PLACEMENT))
    prio_rng = np.random.default_rng((seed, _PRIORITY))
    regions = _region_geometry(config, cells, chm.model)
    total_cap = sum(c.capacity_rbs for c in cells)

    planned: list[tuple[int, str]] = []  # (slice index, region) per UE
    for si, sspec in enumerate(config.slices):
        for region, (lo, hi) in sspec.users_per_region.items():
            count = int(rng.integers(lo, hi + 1))
            planned.extend((si, region) for _ in range(count))

    ues: list[UE] = []
    members: dict[int, set[int]] = {si: set() for si in range(len(config.slices))}
    region_of: dict[int, str] = {}
    for uid, (si, region) in enumerate(planned):
        center, radius, keep_out = regions[region]
        pos = None
        for _ in range(1000):
            rr = radius * math.sqrt(rng.uniform())
            th = rng.uniform(0.0, 2.0 * math.pi)
            cand = (center[0] + rr * math.cos(th), center[1] + rr * math.sin(th))
            if any(math.dist(cand, c0) <= r0 for c0, r0 in keep_out):
                continue
            if not chm.coverage_ok(uid, cand):
                continue
            pos = cand
            break
        if pos is None:
            raise PlacementInfeasible(f"no covered position found in region {region}")
        mobile = bool(rng.uniform() < config.mobility.mobile_fraction)
        ues.append(UE(uid, si, 1.0, pos, (0.0, 0.0), mobile))
        members[si].add(uid)
        region_of[uid] = region

    # prioritized weights, drawn per slice over the eligible regions
    final: list[UE] = []
    boosted: set[int] = set()
    for si, sspec in enumerate(config.slices):
        pr = sspec.prioritized
        if pr.fraction > 0:
            eligible = sorted(
                uid
                for uid in members[si]
                if pr.regions is None or region_of[uid] in pr.regions
            )
            k = int(round(pr.fraction * len(eligible)))
            if k:
                picked = prio_rng.permutation(len(eligible))[:k]
                boosted.update(eligible[i] for i in picked)
    for u in ues:
        w = config.slices[u.slice_id].prioritized.weight if u.id in boosted else 1.0
        final.append(UE(u.id, u.slice_id, w, u.position, u.velocity, u.is_mobile))

    slices = [
        Slice(si, sspec.quota_share * total_cap, sspec.epsilon, frozenset(members[si]))
        for si, sspec in enumerate(config.slices)
    ]
    return slices, final


def step_mobility(
    positions: np.ndarray,
    headings: np.ndarray,
    mobile: np.ndarray,
    speed_mps: float,
    dt_s: float,
    rng: np.random.Generator,
    coverage_ok=None,
    boundary_m: float = SIM_BOUNDARY_M,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance mobile UEs along their headings. Headings reflect at the box
    boundary; a step that would leave radio coverage is refused and the
    heading redrawn instead, so UEs never wander out of reach."""
    pos = positions.copy()
    hd = headings.copy()
    step = speed_mps * dt_s
    for i in np.where(mobile)[0]:
        x = pos[i, 0] + step * math.cos(hd[i])
        y = pos[i, 1] + step * math.sin(hd[i])
        if abs(x) > boundary_m:
            x = math.copysign(2 * boundary_m, x) - x
            hd[i] = math.pi - hd[i]
        if abs(y) > boundary_m:
            y = math.copysign(2 * boundary_m, y) - y
            hd[i] = -hd[i]
        if coverage_ok is not None and not coverage_ok(int(i), (x, y)):
            hd[i] = rng.uniform(0.0, 2.0 * math.pi)
            continue
        pos[i, 0], pos[i, 1] = x, y
    return pos, hd


def should_invoke(
    ue_cqi_now: Mapping[int, float],
    ue_cqi_at_last_invocation: Mapping[int, float],
    threshold_db: float = 3.0,
) -> bool:
    """True when any UE's serving-cell measure moved by more than the
    threshold since the last invocation, or a new UE appeared."""
    for uid, now in ue_cqi_now.items():
        last = ue_cqi_at_last_invocation.get(uid)
        if last is None or abs(now - last) > threshold_db:
            return True
    return False


def bounded_pareto_mean(shape=PARETO_SHAPE, lo=FLOW_MIN_BITS, hi=FLOW_MAX_BITS) -> float:
    a = shape
    return (lo**a / (1 - (lo / hi) ** a)) * (a / (a - 1)) * (lo ** (1 - a) - hi ** (1 - a))


def _bounded_pareto(u, shape=PARETO_SHAPE, lo=FLOW_MIN_BITS, hi=FLOW_MAX_BITS):
    return lo / (1.0 - u * (1.0 - (lo / hi) ** shape)) ** (1.0 / shape)


@dataclass
class Flow:
    ue_id: int
    arrival_ms: float
    size_bits: float
    remaining_bits: float
    completion_ms: float = math.nan  # nan while open


class WorkloadState:
    """Per-UE web-flow queues; backlogged UEs have no queue and always demand
    everything they can get."""

    def __init__(self, ues, slices, specs: Sequence[WorkloadSpec], seed: int):
        self.kind = {}
        self.rate = {}
        self.queues: dict[int, list[Flow]] = {}
        self.flows: list[Flow] = []
        self._rngs = {}
        mean_size = bounded_pareto_mean()
        for u in ues:
            spec = specs[u.slice_id]
            self.kind[u.id] = spec.kind
            if spec.kind == "web":
                self.rate[u.id] = spec.mean_rate_bps / mean_size / 1000.0  # flows per ms
                self.queues[u.id] = []
                self._rngs[u.id] = np.random.default_rng((seed, _WORKLOAD, u.id))

    def arrivals(self, t0_ms: float, t1_ms: float):
        for uid in sorted(self.queues):
            rng = self._rngs[uid]
            n = int(rng.poisson(self.rate[uid] * (t1_ms - t0_ms)))
            if n == 0:
                continue
            times = np.sort(rng.uniform(t0_ms, t1_ms, n))
            sizes = _bounded_pareto(rng.uniform(size=n))
            for t, s in zip(times, sizes):
                f = Flow(uid, float(t), float(s), float(s))
                self.queues[uid].append(f)
                self.flows.append(f)

    def demand_bits(self, uid: int) -> float:
        if self.kind[uid] == "backlogged":
            return math.inf
        return sum(f.remaining_bits for f in self.queues[uid])

    def serve(self, uid: int, bits: float, t0_ms: float, interval_ms: float):
        """Drain the UE's queue FIFO; completion times are interpolated
        assuming a uniform service rate across the interval."""
        if self.kind[uid] == "backlogged" or bits <= 0:
            return
        total = bits
        served = 0.0
        for f in self.queues[uid]:
            if bits <= 0:
                break
            take = min(bits, f.remaining_bits)
            f.remaining_bits -= take
            bits -= take
            served += take
            if f.remaining_bits <= 1e-9:
                f.remaining_bits = 0.0
                frac = served / total if total > 0 else 1.0
                f.completion_ms = max(f.arrival_ms, t0_ms + interval_ms * frac)
        self.queues[uid] = [f for f in self.queues[uid] if f.remaining_bits > 0]


@dataclass
class IntervalReport:
    rbs: dict[int, float]
    bits: dict[int, float]
    efficiency: dict[int, float]


def _waterfill(quota, masses, caps_rb):
    """Split ``quota`` RBs proportionally to ``masses`` with per-item caps;
    returns the per-item shares and the undistributed remainder."""
    n = len(masses)
    share = [0.0] * n
    active = [i for i in range(n) if caps_rb[i] > 0]
    remaining = quota
    while remaining > 1e-12 and active:
        total_mass = sum(masses[i] for i in active)
        nxt = []
        distributed = 0.0
        for i in active:
            want = remaining * masses[i] / total_mass
            room = caps_rb[i] - share[i]
            take = min(want, room)
            share[i] += take
            distributed += take
            if share[i] < caps_rb[i] - 1e-12:
                nxt.append(i)
        remaining -= distributed
        if distributed <= 1e-12:
            break
        active = nxt
    return share, remaining


def account_throughput(
    allocation,
    distribution: UserDistribution,
    channel_state,
    workload: WorkloadState,
    interval_ms: float,
    cells,
    slices,
    ues,
    t0_ms: float = 0.0,
) -> IntervalReport:
    """Per-(cell, slice) RB split proportional to each UE's demand mass, with
    demand-limited leftovers redistributed within the slice and then across
    slices in the cell (proportional to unmet demand; slices with backlogged
    UEs absorb everything that is left)."""
    ue_by_id = {u.id: u for u in ues}
    slice_by_id = {s.id: s for s in slices}
    rbs = {u.id: 0.0 for u in ues}
    eff_used = {}
    for u in ues:
        eff_used[u.id] = channel_state.efficiency_of(u.id, distribution.cell_of(u.id))

    for cell in cells:
        groups: dict[int, list[int]] = {}
        for uid in distribution.ues_at(cell.id):
            groups.setdefault(ue_by_id[uid].slice_id, []).append(uid)
        slice_left: dict[int, float] = {}
        unmet: dict[int, float] = {}
        for sid in sorted(groups):
            # UEs whose serving efficiency collapsed between invocations can
            # carry no traffic this interval
            members = [uid for uid in groups[sid] if eff_used[uid] > 0]
            groups[sid] = members
            if not members:
                slice_left[sid] = allocation.quota_of(sid, cell.id)
                unmet[sid] = 0.0
                continue
            slc = slice_by_id[sid]
            masses = [
                effective_weight(ue_by_id[uid], slc, eff_used[uid]) for uid in members
            ]
            caps = [
                math.inf
                if workload.demand_bits(uid) == math.inf
                else workload.demand_bits(uid) / eff_used[uid]
                for uid in members
            ]
            share, left = _waterfill(allocation.quota_of(sid, cell.id), masses, caps)
            for uid, s in zip(members, share):
                rbs[uid] += s
            slice_left[sid] = left
            if any(math.isinf(c) for c in caps):
                unmet[sid] = math.inf
            else:
                unmet[sid] = sum(c - s for c, s in zip(caps, share))
        pool = sum(slice_left.values())
        # cross-slice redistribution: infinite (backlogged) demand dominates
        for _ in range(len(groups) + 1):
            if pool <= 1e-12:
                break
            inf_slices = [sid for sid in sorted(groups) if math.isinf(unmet[sid])]
            if inf_slices:
                weights = {
                    sid: sum(
                        effective_weight(ue_by_id[uid], slice_by_id[sid], eff_used[uid])
                        for uid in groups[sid]
                        if workload.demand_bits(uid) == math.inf
                    )
                    for sid in inf_slices
                }
                total_w = sum(weights.values())
                for sid in inf_slices:
                    extra = pool * weights[sid] / total_w
                    backlogged = [
                        uid
                        for uid in groups[sid]
                        if workload.demand_bits(uid) == math.inf
                    ]
                    masses = [
                        effective_weight(ue_by_id[uid], slice_by_id[sid], eff_used[uid])
                        for uid in backlogged
                    ]
                    share, _ = _waterfill(extra, masses, [math.inf] * len(backlogged))
                    for uid, s in zip(backlogged, share):
                        rbs[uid] += s
                pool = 0.0
                break
            needy = [sid for sid in sorted(groups) if unmet[sid] > 1e-12]
            if not needy:
                break
            total_unmet = sum(unmet[sid] for sid in needy)
            new_pool = 0.0
            for sid in needy:
                extra = pool * unmet[sid] / total_unmet
                members = groups[sid]
                slc = slice_by_id[sid]
                masses = [
                    effective_weight(ue_by_id[uid], slc, eff_used[uid]) for uid in members
                ]
                caps = [
                    workload.demand_bits(uid) / eff_used[uid] - rbs[uid]
                    for uid in members
                ]
                caps = [max(c, 0.0) for c in caps]
                share, left = _waterfill(extra, masses, caps)
                for uid, s in zip(members, share):
                    rbs[uid] += s
                unmet[sid] = sum(c - s for c, s in zip(caps, share))
                new_pool += left
            pool = new_pool

    bits = {}
    for u in sorted(ues, key=lambda x: x.id):
        b = rbs[u.id] * eff_used[u.id]
        demand = workload.demand_bits(u.id)
        if not math.isinf(demand):
            b = min(b, demand)
        bits[u.id] = b
        workload.serve(u.id, b, t0_ms, interval_ms)
    return IntervalReport(rbs, bits, eff_used)


@dataclass
class MetricsBundle:
    scheme: str
    seed: int
    config_hash: str
    duration_ms: float
    control_interval_ms: float
    invocations: int
    load_ratio_samples: list[tuple[float, int, float]]  # (t_ms, cell_id, ratio)
    ue_throughput_bps: dict[int, float]
    ue_slice: dict[int, int]
    ue_weight: dict[int, float]
    ue_mobile: dict[int, bool]
    handover_count: dict[int, int]
    flows: list[Flow]
    slice_epsilon: dict[int, float]

    def slice_weighted_pf(self, slice_id: int) -> float:
        return sum(
            self.ue_weight[uid] * math.log(max(t, THROUGHPUT_FLOOR_BPS))
            for uid, t in self.ue_throughput_bps.items()
            if self.ue_slice[uid] == slice_id
        )

    def slice_p10_throughput(self, slice_id: int) -> float:
        vals = [
            t for uid, t in self.ue_throughput_bps.items() if self.ue_slice[uid] == slice_id
        ]
        return float(np.percentile(vals, 10)) if vals else 0.0

    def handovers_per_user(self) -> float:
        if not self.handover_count:
            return 0.0
        return sum(self.handover_count.values()) / len(self.handover_count)

    def median_fct_ms(self) -> float:
        done = [
            f.completion_ms - f.arrival_ms for f in self.flows if not math.isnan(f.completion_ms)
        ]
        return float(np.median(done)) if done else math.nan


def _fmt(v) -> str:
    return repr(float(v))


def write_run_csvs(bundle: "MetricsBundle", out_dir) -> list[str]:
    """Emit one CSV per metric family plus a JSON manifest; returns the file
    names written. Formatting is deterministic so reruns are byte-identical."""
    import csv
    import os

    os.makedirs(out_dir, exist_ok=True)
    written = []

    def _open(name):
        written.append(name)
        return open(os.path.join(out_dir, name), "w", newline="")

    with _open("load_ratios.csv") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t_ms", "cell_id", "load_ratio"])
        for t, cid, ratio in bundle.load_ratio_samples:
            wr.writerow([_fmt(t), cid, _fmt(ratio)])
    with _open("slice_metrics.csv") as fh:
        wr = csv.writer(fh)
        wr.writerow(["slice_id", "epsilon", "n_ues", "weighted_pf_metric", "p10_throughput_bps"])
        for sid in sorted(bundle.slice_epsilon):
            n = sum(1 for s in bundle.ue_slice.values() if s == sid)
            wr.writerow([
                sid, _fmt(bundle.slice_epsilon[sid]), n,
                _fmt(bundle.slice_weighted_pf(sid)), _fmt(bundle.slice_p10_throughput(sid)),
            ])
    with _open("handovers.csv") as fh:
        wr = csv.writer(fh)
        wr.writerow(["ue_id", "slice_id", "is_mobile", "handovers"])
        for uid in sorted(bundle.handover_count):
            wr.writerow([
                uid, bundle.ue_slice[uid], int(bundle.ue_mobile[uid]),
                bundle.handover_count[uid],
            ])
    with _open("fct.csv") as fh:
        wr = csv.writer(fh)
        wr.writerow(["ue_id", "slice_id", "size_bits", "arrival_ms", "completion_ms", "fct_ms"])
        for f in bundle.flows:
            done = not math.isnan(f.completion_ms)
            wr.writerow([
                f.ue_id, bundle.ue_slice[f.ue_id], _fmt(f.size_bits), _fmt(f.arrival_ms),
                _fmt(f.completion_ms) if done else "",
                _fmt(f.completion_ms - f.arrival_ms) if done else "",
            ])
    manifest = {
        "scheme": bundle.scheme,
        "seed": bundle.seed,
        "config_sha256": bundle.config_hash,
        "duration_ms": bundle.duration_ms,
        "control_interval_ms": bundle.control_interval_ms,
        "invocations": bundle.invocations,
        "n_ues": len(bundle.ue_slice),
        "n_slices": len(bundle.slice_epsilon),
        "files": sorted(written),
    }
    with _open("manifest.json") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sorted(written)


def run_experiment(config: ScenarioConfig):
    """Run one scenario end to end; deterministic per (config, seed)."""
    problems = config.validate()
    if problems:
        raise ValueError("; ".join(problems))
    seed = config.seed
    model = PathLossModel(
        noise_floor_dbm=config.channel.noise_floor_dbm,
        shadowing_sigma_db=config.channel.shadowing_sigma_db,
    )
    cells = generate_topology(config, seed)
    traces = bindings = None
    chm = ChannelModel(cells, model, seed=seed, mode="synthetic")
    slices, ues = place_users(config, cells, chm, seed)
    if config.channel.mode == "trace":
        traces = chan.load_trace_manifest(config.channel.trace_manifest)
        modeled = {
            u.id: max(
                chan.rsrp(model, c, u.position, chm.shadow_db(u.id, c.id)) for c in cells
            )
            for u in ues
        }
        bindings = chan.bind_traces(ues, traces, modeled)
        chm = ChannelModel(cells, model, seed=seed, mode="trace", traces=traces, bindings=bindings)

    ch0 = chm.at(0.0, {u.id: u.position for u in ues})
    violations = validate_topology(cells, slices, ues, ch0)
    if violations:
        raise ValueError("; ".join(str(v) for v in violations))

    ue_sorted = sorted(ues, key=lambda u: u.id)
    cell_by_id = {c.id: c for c in cells}
    positions = np.array([u.position for u in ue_sorted])
    mob_rng = np.random.default_rng((seed, _MOBILITY))
    headings = mob_rng.uniform(0.0, 2.0 * math.pi, len(ue_sorted))
    mobile = np.array([u.is_mobile for u in ue_sorted], dtype=bool)
    idx_of = {u.id: i for i, u in enumerate(ue_sorted)}

    workload = WorkloadState(
        ue_sorted, slices, [s.workload for s in config.slices], seed
    )
    lbcfg = config.lb_config()
    scheme_fn = SCHEMES[config.scheme]

    prev_dist = None
    allocation = None
    last_measure: dict[int, float] = {}
    invocations = 0
    load_samples: list[tuple[float, int, float]] = []
    handovers = {u.id: 0 for u in ue_sorted}
    bits_total = {u.id: 0.0 for u in ue_sorted}
    dt_s = config.control_interval_ms / 1000.0

    t = 0.0
    while t < config.duration_ms:
        if t > 0:
            positions, headings = step_mobility(
                positions, headings, mobile, config.mobility.speed_mps, dt_s,
                mob_rng, coverage_ok=chm.coverage_ok,
            )
        pos_map = {u.id: tuple(positions[idx_of[u.id]]) for u in ue_sorted}
        ch = chm.at(t, pos_map)

        if prev_dist is None:
            invoke = True
            changed = None
        else:
            now = {
                u.id: chm.measure_db(u.id, cell_by_id[prev_dist.cell_of(u.id)], pos_map[u.id], t)
                for u in ue_sorted
            }
            # a UE whose serving cell no longer reaches it always needs a
            # reassignment, whatever its dB delta says
            dead = {
                u.id for u in ue_sorted
                if ch.efficiency_of(u.id, prev_dist.cell_of(u.id)) <= 0
            }
            invoke = bool(dead) or should_invoke(now, last_measure, config.trigger_db)
            changed = dead | {
                uid for uid, v in now.items()
                if uid not in last_measure or abs(v - last_measure[uid]) >= config.trigger_db
            }
        if invoke:
            initial = initialize_distribution(prev_dist, ue_sorted, ch, cells, changed)
            result, allocation = scheme_fn(initial, cells, slices, ue_sorted, ch, lbcfg)
            if prev_dist is not None:
                for uid, _a, _b in diff_physical_handovers(prev_dist, result.distribution):
                    handovers[uid] += 1
            prev_dist = result.distribution
            invocations += 1
            for cid in sorted(result.demand.load_ratio):
                load_samples.append((t, cid, float(result.demand.load_ratio[cid])))
            last_measure = {
                u.id: chm.measure_db(u.id, cell_by_id[prev_dist.cell_of(u.id)], pos_map[u.id], t)
                for u in ue_sorted
            }

        workload.arrivals(t, t + config.control_interval_ms)
        report = account_throughput(
            allocation, prev_dist, ch, workload, config.control_interval_ms,
            cells, slices, ue_sorted, t,
        )
        for uid, b in report.bits.items():
            bits_total[uid] += b
        t += config.control_interval_ms

    duration_s = config.duration_ms / 1000.0
    return MetricsBundle(
        scheme=config.scheme,
        seed=seed,
        config_hash=config.config_hash(),
        duration_ms=config.duration_ms,
        control_interval_ms=config.control_interval_ms,
        invocations=invocations,
        load_ratio_samples=load_samples,
        ue_throughput_bps={uid: b / duration_s for uid, b in bits_total.items()},
        ue_slice={u.id: u.slice_id for u in ue_sorted},
        ue_weight={u.id: u.weight for u in ue_sorted},
        ue_mobile={u.id: u.is_mobile for u in ue_sorted},
        handover_count=handovers,
        flows=workload.flows,
        slice_epsilon={s.id: s.epsilon for s in slices},
    )
