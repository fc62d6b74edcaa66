"""DHT scale-out load rebalancing: ring model, feasibility bounds, fluid simulator."""

from .bounds import (
    ALL_SCENARIOS,
    BoundKind,
    BoundReport,
    ClusterParams,
    Scenario,
    StabilizationMode,
    WorkloadKind,
    bandwidth_bound_increasing,
    bandwidth_bound_stable,
    bound_report,
    catchup_time,
    inter_expansion_time,
    keys_capacity,
    min_feasible_n,
    stabilization_time,
    storage_bound_increasing,
    storage_bound_stable,
    time_bound_clear_increasing,
    time_bound_clear_stable,
    time_to_first_expansion,
)
from .ring import (
    BalanceStats,
    LimitedTokenEqualPart,
    LimitedTokenRandomPart,
    ManyTokenEqualPart,
    RebalanceReport,
    RingState,
    balance_stats,
    build_ring,
    join,
    leave,
    lookup,
)
from .sim import (
    SimConfig,
    SimEvent,
    SimOutcome,
    feasibility_threshold,
    run,
    validate_against_bounds,
)

__version__ = "0.1.0"
