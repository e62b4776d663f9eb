"""ranlb: seedable simulator and algorithms for load-balanced handovers in
sliced multi-cell radio access networks."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .model import (
    AllocationScheme,
    Cell,
    ChannelState,
    Slice,
    UE,
    UserDistribution,
    Violation,
    validate_topology,
)
from .demand import DemandState, compute_demand_state, demand_ratios, effective_weight, slice_objective
from .engine import (
    LbConfig,
    LbResult,
    LogicalMove,
    amenable,
    diff_physical_handovers,
    initialize_distribution,
    run_load_balancer,
    transfer_between,
)
from .quota import allocate, static_allocation
from .baselines import SCHEMES, SchemeOutcome

__version__ = "0.1.0"
