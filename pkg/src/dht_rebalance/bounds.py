"""Closed-form feasibility bounds for one-node-at-a-time DHT scale-out.

Six bounds constrain the per-node write rate lambda (writes/s) that a
symmetric N-node cluster can sustain while rebalancing onto a joining node.
Writing B = bandwidth / value_size for the write rate that saturates one
node's bandwidth:

=====================  ============================  =========================
scenario               storage / bandwidth bound     time bound (clear mode)
=====================  ============================  =========================
increasing per-node    (1 - N*mu/(N+1)) * B          (sqrt(4N+1)-1)/(2N) * B
writes                 B / (N+1)
stable total writes    (1 + 1/N - mu) * B            (N+1)(sqrt(4N+1)-1)
                       B / N                           / (2N^2) * B
=====================  ============================  =========================

Concurrent stabilization (writes served during the join) is governed by the
storage and bandwidth bounds; clear stabilization (writes backlogged during
the join) by the time bound alone.  All bounds are strict: feasibility means
lambda < bound.  The replication factor cancels out of every bound; it is
kept in ClusterParams for capacity and simulator accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional


class InsufficientBandwidth(RuntimeError):
    """The write share alone saturates the joining node's bandwidth."""


class AlphaOutOfRange(ValueError):
    pass


class WorkloadKind(Enum):
    INCREASING_PER_NODE = "increasing"
    STABLE_TOTAL = "stable"


class StabilizationMode(Enum):
    CONCURRENT = "concurrent"
    CLEAR = "clear"


@dataclass(frozen=True)
class Scenario:
    workload: WorkloadKind
    mode: StabilizationMode

    @property
    def name(self) -> str:
        return f"{self.workload.value}-{self.mode.value}"

    @classmethod
    def parse(cls, name: str) -> "Scenario":
        try:
            wl, mode = name.split("-", 1)
            return cls(WorkloadKind(wl), StabilizationMode(mode))
        except ValueError:
            raise ValueError(f"unknown scenario: {name!r}") from None


ALL_SCENARIOS = tuple(
    Scenario(wl, mode) for wl in WorkloadKind for mode in StabilizationMode
)


@dataclass(frozen=True)
class ClusterParams:
    """Static description of a symmetric cluster.

    bandwidth and storage are bytes/s and bytes per node; value_size is bytes
    per write; mu is the fill ratio triggering expansion.
    """

    n: int
    bandwidth: float
    value_size: float
    mu: float
    replication: int = 1
    storage: float = 1e12

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.bandwidth <= 0 or self.value_size <= 0 or self.storage <= 0:
            raise ValueError("bandwidth, value_size and storage must be positive")
        if not 0 < self.mu <= 1:
            raise ValueError("mu must be in (0, 1]")
        if self.replication < 1:
            raise ValueError("replication must be >= 1")

    @property
    def max_write_rate(self) -> float:
        """B = bandwidth / value_size, writes/s saturating one node."""
        return self.bandwidth / self.value_size


class BoundKind(Enum):
    STORAGE = "storage"
    BANDWIDTH = "bandwidth"
    TIME = "time"


@dataclass(frozen=True)
class BoundEntry:
    kind: BoundKind
    value: float
    applicable: bool


@dataclass(frozen=True)
class BoundReport:
    scenario: Scenario
    entries: tuple[BoundEntry, ...]
    binding: BoundEntry


# ---------------------------------------------------------------------------
# the six bounds

def storage_bound_increasing(params: ClusterParams) -> float:
    """Max per-node write rate before writes fill the remaining (1-mu)S
    during a concurrent join, workload growing with the cluster."""
    n = params.n
    return (1.0 - n / (n + 1.0) * params.mu) * params.max_write_rate


def bandwidth_bound_increasing(params: ClusterParams) -> float:
    """Max per-node write rate before migration falls behind data arrival,
    workload growing with the cluster."""
    return params.max_write_rate / (params.n + 1.0)


def time_bound_clear_increasing(params: ClusterParams) -> float:
    """Max per-node write rate for which the post-join backlog catch-up
    completes before the next expansion, workload growing with the cluster."""
    n = params.n
    return (math.sqrt(4.0 * n + 1.0) - 1.0) / (2.0 * n) * params.max_write_rate


def storage_bound_stable(params: ClusterParams) -> float:
    """Storage-constrained per-node rate with a stable total workload."""
    n = params.n
    # (1 + 1/N - mu) * B, grouped so integer-valued cases stay exact
    return (n + 1.0 - n * params.mu) / n * params.max_write_rate


def bandwidth_bound_stable(params: ClusterParams) -> float:
    """Bandwidth-constrained per-node rate with a stable total workload:
    the system-wide rate N*lambda must stay below B."""
    return params.max_write_rate / params.n


def time_bound_clear_stable(params: ClusterParams) -> float:
    """Catch-up-constrained per-node rate with a stable total workload."""
    n = params.n
    return ((n + 1.0) * (math.sqrt(4.0 * n + 1.0) - 1.0)
            / (2.0 * n * n) * params.max_write_rate)


def stable_increasing_storage_gap(params: ClusterParams) -> float:
    """delta = 1/N - mu/(N+1): the stable storage bound exceeds the
    increasing one by delta * B."""
    return 1.0 / params.n - params.mu / (params.n + 1.0)


def bound_report(params: ClusterParams, scenario: Scenario) -> BoundReport:
    """All three bound kinds for a scenario; binding = min over applicable.

    Concurrent scenarios apply the storage and bandwidth bounds; clear
    scenarios apply the time bound only.  Non-applicable entries still carry
    the closed-form value from the other mode, for reference.
    """
    increasing = scenario.workload is WorkloadKind.INCREASING_PER_NODE
    if increasing:
        storage = storage_bound_increasing(params)
        bandwidth = bandwidth_bound_increasing(params)
        time_ = time_bound_clear_increasing(params)
    else:
        storage = storage_bound_stable(params)
        bandwidth = bandwidth_bound_stable(params)
        time_ = time_bound_clear_stable(params)

    concurrent = scenario.mode is StabilizationMode.CONCURRENT
    entries = (
        BoundEntry(BoundKind.STORAGE, storage, concurrent),
        BoundEntry(BoundKind.BANDWIDTH, bandwidth, concurrent),
        BoundEntry(BoundKind.TIME, time_, not concurrent),
    )
    binding = min((e for e in entries if e.applicable), key=lambda e: e.value)
    return BoundReport(scenario, entries, binding)


# ---------------------------------------------------------------------------
# derived quantities

def keys_capacity(params: ClusterParams) -> float:
    """Keys held at the expansion trigger: K = mu*S*N / (r*v)."""
    return (params.mu * params.storage * params.n
            / (params.replication * params.value_size))


def join_bandwidth(params: ClusterParams, scenario: Scenario, lam: float) -> float:
    """Bandwidth left for migration at the joining node.

    Concurrent: b minus the joining node's write share (v*lambda for an
    increasing workload, N/(N+1)*v*lambda for a stable one).  Clear: the
    full b, writes being backlogged.
    """
    if scenario.mode is StabilizationMode.CLEAR:
        return params.bandwidth
    share = params.value_size * lam
    if scenario.workload is WorkloadKind.STABLE_TOTAL:
        share *= params.n / (params.n + 1.0)
    return params.bandwidth - share


def stabilization_time(params: ClusterParams, scenario: Scenario, lam: float) -> float:
    """Duration of a single join: mu*S*N / ((N+1) * b_join)."""
    b_join = join_bandwidth(params, scenario, lam)
    if b_join <= 0:
        raise InsufficientBandwidth(
            "write share meets or exceeds node bandwidth; the join cannot finish")
    n = params.n
    return params.mu * params.storage * n / ((n + 1.0) * b_join)


def accumulated_backlog(params: ClusterParams, alpha: float,
                        workload: WorkloadKind) -> float:
    """Bytes backlogged over a clear join when writes use alpha*b per node."""
    _check_alpha(alpha)
    n = params.n
    if workload is WorkloadKind.INCREASING_PER_NODE:
        return params.mu * params.storage * n * alpha
    return n * n / (n + 1.0) * params.mu * params.storage * alpha


def catchup_time(params: ClusterParams, alpha: float,
                 workload: WorkloadKind) -> float:
    """Time to drain the clear-join backlog after the join completes."""
    _check_alpha(alpha)
    if alpha == 0.0:
        return 0.0
    n = params.n
    mu_s = params.mu * params.storage
    if workload is WorkloadKind.INCREASING_PER_NODE:
        return mu_s * n * alpha / ((n + 1.0) * (1.0 - alpha) * params.bandwidth)
    return (n * n * mu_s * alpha
            / ((n + 1.0) * (n + 1.0 - n * alpha) * params.bandwidth))


def inter_expansion_time(params: ClusterParams, alpha: float,
                         workload: WorkloadKind) -> float:
    """Time between consecutive expansion triggers."""
    _check_alpha(alpha, strict=True)
    n = params.n
    mu_s = params.mu * params.storage
    if workload is WorkloadKind.INCREASING_PER_NODE:
        return mu_s / ((n + 1.0) * alpha * params.bandwidth)
    return mu_s / (n * alpha * params.bandwidth)


def time_to_first_expansion(params: ClusterParams, alpha: float) -> float:
    """Fill time from empty to the first trigger: mu*S / (alpha*b)."""
    _check_alpha(alpha, strict=True)
    return params.mu * params.storage / (alpha * params.bandwidth)


def _check_alpha(alpha: float, strict: bool = False) -> None:
    if strict:
        ok = 0.0 < alpha < 1.0
    else:
        ok = 0.0 <= alpha < 1.0
    if not ok:
        raise AlphaOutOfRange(f"alpha={alpha} outside (0, 1)")


# ---------------------------------------------------------------------------
# capacity planning

def min_feasible_n(
    scenario: Scenario,
    rate: float,
    *,
    bandwidth: float,
    value_size: float,
    mu: float,
    replication: int = 1,
    storage: float = 1e12,
    kinds: Optional[set[BoundKind]] = None,
    n_max: int = 10 ** 6,
) -> Optional[int]:
    """Smallest cluster size at which the workload satisfies every applicable
    bound, or None if no N <= n_max qualifies.

    ``rate`` is the system-wide writes/s for a stable workload and the
    per-node writes/s for an increasing one.  ``kinds`` optionally restricts
    which of the applicable bounds are enforced (capacity-planning what-ifs).
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    b_rate = bandwidth / value_size
    stable = scenario.workload is WorkloadKind.STABLE_TOTAL
    concurrent = scenario.mode is StabilizationMode.CONCURRENT

    def enforced(kind: BoundKind) -> bool:
        return kinds is None or kind in kinds

    # A stable workload under the bandwidth bound requires rate < B outright.
    if stable and concurrent and enforced(BoundKind.BANDWIDTH) and rate >= b_rate:
        return None

    for n in range(1, n_max + 1):
        lam = rate / n if stable else rate
        ok = True
        if concurrent:
            if enforced(BoundKind.STORAGE):
                val = ((1.0 + 1.0 / n - mu) if stable
                       else (1.0 - n / (n + 1.0) * mu)) * b_rate
                ok = ok and lam < val
            if enforced(BoundKind.BANDWIDTH):
                val = b_rate / (n if stable else n + 1.0)
                ok = ok and lam < val
        else:
            if enforced(BoundKind.TIME):
                root = math.sqrt(4.0 * n + 1.0) - 1.0
                val = ((n + 1.0) * root / (2.0 * n * n) if stable
                       else root / (2.0 * n)) * b_rate
                ok = ok and lam < val
        if ok:
            return n
        # Increasing-workload bounds only fall with N: no later N can work.
        if not stable:
            return None
    return None


def with_n(params: ClusterParams, n: int) -> ClusterParams:
    return replace(params, n=n)
