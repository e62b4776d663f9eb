"""Channel quality: log-distance path loss, CQI quantization, per-(UE, cell)
efficiency maps, and CQI trace ingestion.

Defaults follow common urban-area values: macro coefficients (128.1, 37.6) and
small-cell coefficients (140.7, 36.7) with distance in km. The CQI ladder maps
SINR thresholds from -6 dB to +22 dB in 2 dB steps onto the standard 15-entry
spectral-efficiency table, scaled by a symbols-per-RB constant. Shadowing is
log-normal, drawn once per (UE, cell) and frozen for the whole run.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import Cell, ChannelState, EmptyTraceSet, UE

# bits per symbol for CQI 1..15 (index 0 unused)
CQI_EFFICIENCY = (
    0.0,
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770,
    1.1758, 1.4766, 1.9141, 2.4063, 2.7305,
    3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
)
SYMBOLS_PER_RB = 150
CQI_SINR_MIN_DB = -6.0
CQI_SINR_STEP_DB = 2.0


@dataclass(frozen=True)
class PathLossModel:
    macro_coeffs: tuple[float, float] = (128.1, 37.6)
    small_coeffs: tuple[float, float] = (140.7, 36.7)
    noise_floor_dbm: float = -92.0
    shadowing_sigma_db: float = 0.0

    def __post_init__(self):
        if self.macro_coeffs[1] <= 0 or self.small_coeffs[1] <= 0:
            raise ValueError("path-loss slope must be positive")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing sigma must be non-negative")


def rsrp(model: PathLossModel, cell: Cell, ue_position, shadow_db: float = 0.0) -> float:
    """Received power in dBm at ``ue_position``; distance clamped at 1 m."""
    dx = ue_position[0] - cell.position[0]
    dy = ue_position[1] - cell.position[1]
    dist_km = max(math.hypot(dx, dy), 1.0) / 1000.0
    a, b = model.macro_coeffs if cell.is_macro else model.small_coeffs
    return cell.tx_power_dbm - (a + b * math.log10(dist_km)) - shadow_db


def cqi_from_sinr(sinr_db: float) -> int:
    """Quantize SINR to CQI 1..15; 0 means out of coverage."""
    if sinr_db < CQI_SINR_MIN_DB:
        return 0
    return min(15, 1 + int((sinr_db - CQI_SINR_MIN_DB) // CQI_SINR_STEP_DB))


def sinr_for_cqi(cqi: int) -> float:
    """Lower SINR threshold of a CQI index."""
    return CQI_SINR_MIN_DB + CQI_SINR_STEP_DB * (cqi - 1)


def efficiency_from_cqi(cqi: int, symbols_per_rb: int = SYMBOLS_PER_RB) -> float:
    return CQI_EFFICIENCY[cqi] * symbols_per_rb


def efficiency_from_rsrp(
    rsrp_dbm: float, noise_floor_dbm: float, symbols_per_rb: int = SYMBOLS_PER_RB
) -> float:
    """Deliverable bits per RB: SINR -> CQI -> spectral efficiency. Monotone,
    zero below the CQI-1 threshold, saturating at the CQI-15 entry."""
    return efficiency_from_cqi(cqi_from_sinr(rsrp_dbm - noise_floor_dbm), symbols_per_rb)


def cell_coverage_radius_m(model: PathLossModel, cell: Cell) -> float:
    """Distance at which efficiency falls to the CQI-1 threshold, with no
    shadowing: the operational definition of being within a cell's range."""
    a, b = model.macro_coeffs if cell.is_macro else model.small_coeffs
    rsrp_min = model.noise_floor_dbm + CQI_SINR_MIN_DB
    return 1000.0 * 10 ** ((cell.tx_power_dbm - a - rsrp_min) / b)


@dataclass(frozen=True)
class CqiTrace:
    trace_id: int
    samples: tuple[tuple[float, int], ...]  # (t_ms, wideband cqi)
    mean_rsrp_dbm: float

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple((float(t), int(c)) for t, c in self.samples))
        if not self.samples:
            raise ValueError("trace must have at least one sample")
        times = [t for t, _ in self.samples]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("trace timestamps must be strictly increasing")
        if any(not 1 <= c <= 15 for _, c in self.samples):
            raise ValueError("trace CQIs must be in [1, 15]")

    def cqi_at(self, t_ms: float) -> int:
        """Step-hold lookup: the latest sample at or before t (first sample
        before the trace starts)."""
        cur = self.samples[0][1]
        for ts, c in self.samples:
            if ts > t_ms:
                break
            cur = c
        return cur


def bind_traces(
    ues: Sequence[UE],
    traces: Sequence[CqiTrace],
    modeled_rsrp: Mapping[int, float],
) -> dict[int, int]:
    """Assign each UE the trace whose mean RSRP is nearest the UE's modeled
    RSRP from its strongest cell; ties go to the lowest trace id."""
    if not traces:
        raise EmptyTraceSet("no CQI traces provided")
    ordered = sorted(traces, key=lambda t: t.trace_id)
    out = {}
    for u in ues:
        target = modeled_rsrp[u.id]
        out[u.id] = min(ordered, key=lambda t: (abs(t.mean_rsrp_dbm - target), t.trace_id)).trace_id
    return out


def load_trace_csv(path, trace_id: int, mean_rsrp_dbm: float) -> CqiTrace:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    samples = [(float(r["t_ms"]), int(r["cqi"])) for r in rows]
    return CqiTrace(trace_id, tuple(samples), mean_rsrp_dbm)


def load_trace_manifest(path) -> list[CqiTrace]:
    """Manifest CSV columns: trace_id, path, mean_rsrp_dbm. Relative paths are
    resolved against the manifest's directory."""
    import os

    base = os.path.dirname(os.path.abspath(path))
    traces = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            p = row["path"]
            if not os.path.isabs(p):
                p = os.path.join(base, p)
            traces.append(load_trace_csv(p, int(row["trace_id"]), float(row["mean_rsrp_dbm"])))
    if not traces:
        raise EmptyTraceSet(f"manifest {path} lists no traces")
    return traces


def _shadow_db(seed: int, ue_id: int, cell_id: int, sigma: float) -> float:
    """Frozen per-(UE, cell) log-normal shadowing, keyed so the draw does not
    depend on evaluation order."""
    if sigma == 0.0:
        return 0.0
    rng = np.random.default_rng((seed, ue_id, cell_id))
    return float(rng.normal(0.0, sigma))


class ChannelModel:
    """Produces ChannelState snapshots for a fixed topology.

    synthetic mode: efficiency from path loss plus frozen shadowing.
    trace mode: each UE's bound trace supplies the wideband CQI over time; the
    per-cell SINR is the CQI's threshold shifted by the offset between the
    UE's modeled RSRP from that cell and the trace's mean RSRP.
    """

    def __init__(self, cells, model: PathLossModel, seed: int = 0, mode: str = "synthetic",
                 traces=None, bindings=None, symbols_per_rb: int = SYMBOLS_PER_RB):
        if mode not in ("synthetic", "trace"):
            raise ValueError(f"unknown channel mode {mode!r}")
        if mode == "trace":
            if not traces:
                raise EmptyTraceSet("trace mode requires at least one trace")
            self.traces = {t.trace_id: t for t in traces}
            self.bindings = dict(bindings or {})
        self.cells = sorted(cells, key=lambda c: c.id)
        self.model = model
        self.seed = seed
        self.mode = mode
        self.symbols_per_rb = symbols_per_rb
        self._shadow: dict[tuple[int, int], float] = {}

    def shadow_db(self, ue_id: int, cell_id: int) -> float:
        key = (ue_id, cell_id)
        if key not in self._shadow:
            self._shadow[key] = _shadow_db(self.seed, ue_id, cell_id, self.model.shadowing_sigma_db)
        return self._shadow[key]

    def measure_db(self, ue_id: int, cell: Cell, position, t_ms: float = 0.0) -> float:
        """Wideband dB-domain channel measure used for trigger checks: the
        shadowed RSRP (synthetic) or the trace-modulated equivalent."""
        base = rsrp(self.model, cell, position, self.shadow_db(ue_id, cell.id))
        if self.mode == "trace":
            tr = self.traces[self.bindings[ue_id]]
            return base + sinr_for_cqi(tr.cqi_at(t_ms)) - (tr.mean_rsrp_dbm - self.model.noise_floor_dbm)
        return base

    def efficiency(self, ue_id: int, cell: Cell, position, t_ms: float = 0.0) -> float:
        sinr = self.measure_db(ue_id, cell, position, t_ms) - self.model.noise_floor_dbm
        return efficiency_from_cqi(cqi_from_sinr(sinr), self.symbols_per_rb)

    def at(self, t_ms: float, positions: Mapping[int, tuple[float, float]]) -> ChannelState:
        eff = {}
        for uid in sorted(positions):
            pos = positions[uid]
            for c in self.cells:
                eff[(uid, c.id)] = self.efficiency(uid, c, pos, t_ms)
        return ChannelState(eff)

    def coverage_ok(self, ue_id: int, position) -> bool:
        """True when at least one cell would serve this UE at this position,
        including its frozen shadowing."""
        return any(self.efficiency(ue_id, c, position) > 0 for c in self.cells)


def channel_at(time_ms, cells, ue_positions, mode="synthetic", model=None, seed=0,
               traces=None, bindings=None) -> ChannelState:
    """One-shot ChannelState snapshot; deterministic given seed and time."""
    model = model or PathLossModel()
    return ChannelModel(cells, model, seed=seed, mode=mode, traces=traces,
                        bindings=bindings).at(time_ms, ue_positions)
