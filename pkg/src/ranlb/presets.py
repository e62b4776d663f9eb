"""Packaged scenario presets.

``scenario1`` is the desk-scale analogue of the default evaluation setup: one
macrocell plus four small cells, eight equal-quota slices (four
proportional-fair, four datarate-fair), users clustered oddly/evenly across
the small-cell regions plus a macro-region population, half the users mobile,
and prioritized users with a 5x weight in two of the PF slices.

Note on geometry: four small cells at radial distance 500-700 m cannot be
pairwise 1000 m apart (four points within a 700 m radius have some pair at
most 700*sqrt(2) < 1000 m apart), so this preset uses an 800 m minimum
separation, which keeps the small-cell coverage areas disjoint.
"""

from __future__ import annotations

from .harness import (
    CellsSpec,
    ChannelSpec,
    MobilitySpec,
    PrioritizedSpec,
    ScenarioConfig,
    SliceSpec,
    WorkloadSpec,
)


def scenario1(
    seed: int = 0,
    scheme: str = "radioweaver",
    duration_ms: float = 20000.0,
    user_scale: float = 0.4,
    web_prioritized: bool = False,
) -> ScenarioConfig:
    """Desk-scale default scenario (~120 UEs at the default ``user_scale``).

    ``web_prioritized`` switches the prioritized PF slices to the web-flow
    workload used for flow-completion-time comparisons.
    """

    def rng_range(lo, hi):
        return (max(0, round(lo * user_scale)), max(1, round(hi * user_scale)))

    strong = rng_range(8, 12)
    weak = rng_range(0, 4)
    macro = rng_range(5, 30)

    slices = []
    for i in range(8):
        pf = i < 4  # first four slices: proportional fairness
        if i % 2 == 0:
            regions = {"C1": strong, "C2": strong, "C3": weak, "C4": weak, "macro": macro}
        else:
            regions = {"C1": weak, "C2": weak, "C3": strong, "C4": strong, "macro": macro}
        prioritized = PrioritizedSpec()
        workload = WorkloadSpec("backlogged")
        if pf and i < 2:
            prioritized = PrioritizedSpec(fraction=0.5, weight=5.0, regions=["C1", "C3"])
            if web_prioritized:
                workload = WorkloadSpec("web", mean_rate_bps=3e6)
        slices.append(
            SliceSpec(
                quota_share=0.125,
                epsilon=1.0 if pf else 0.0,
                users_per_region=regions,
                prioritized=prioritized,
                workload=workload,
                name=f"S{i + 1}",
            )
        )
    return ScenarioConfig(
        cells=CellsSpec(n_small=4, min_separation_m=800.0),
        slices=slices,
        mobility=MobilitySpec(mobile_fraction=0.5),
        channel=ChannelSpec(noise_floor_dbm=-84.0),
        duration_ms=duration_ms,
        control_interval_ms=500.0,
        trigger_db=3.0,
        seed=seed,
        scheme=scheme,
    )
