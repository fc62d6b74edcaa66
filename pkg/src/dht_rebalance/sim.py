"""Event-driven fluid simulator of node-by-node DHT scale-out.

Writes and migration are continuous byte flows with piecewise-constant rates;
the next event time is always computed in closed form, so there is no time
step and no discretization error.  One expansion cycle:

* fill    -- every node ingests its write share until a node reaches mu*S,
             which triggers a one-node join (under symmetry all nodes trigger
             together, treated as a single event);
* join    -- concurrent mode: the joining node immediately takes its post-join
             write share and receives migration at b_join = b - share; clear
             mode: all writes divert to a backlog and migration uses the full
             bandwidth b;
* catchup -- clear mode only: after the join the backlog drains into storage
             with the bandwidth left over from resumed writes.

Three breakdown conditions are detected: a node exceeding its storage S
(storage_overflow), an old node hitting the expansion trigger again before
the join finishes (expansion_overlap), and a backlog still nonzero when the
next expansion fires (catchup_starvation).

In clear mode the next-trigger clock counts live write arrivals only: after a
join the system triggers again once new writes fill the mu*S headroom, while
the drained backlog adds to stored bytes without advancing that clock.  This
matches the closed-form inter-expansion times and makes the bisected
feasibility thresholds reproduce the time-oriented bounds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional

from .bounds import (
    BoundKind,
    ClusterParams,
    InsufficientBandwidth,
    Scenario,
    StabilizationMode,
    WorkloadKind,
    bound_report,
)

STORAGE_OVERFLOW = "storage_overflow"
EXPANSION_OVERLAP = "expansion_overlap"
CATCHUP_STARVATION = "catchup_starvation"

STABILIZED = "stabilized"
BREAKDOWN = "breakdown"
MAX_TIME_EXCEEDED = "max_time_exceeded"


class EmptyRange(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """One scale-out run from params.n nodes to n_target nodes.

    ``rate`` is writes/s per node for an increasing workload and system-wide
    writes/s for a stable one.  ``initial_fill`` is the starting fraction of
    the mu*S trigger level on each node.
    """

    params: ClusterParams
    scenario: Scenario
    rate: float
    n_target: int
    initial_fill: float = 0.0
    max_sim_time: float = 1e18

    def __post_init__(self):
        if self.n_target <= self.params.n:
            raise ValueError("n_target must exceed the initial node count")
        if self.max_sim_time <= 0:
            raise ValueError("max_sim_time must be positive")
        if self.rate < 0:
            raise ValueError("rate must be >= 0")
        if not 0.0 <= self.initial_fill <= 1.0:
            raise ValueError("initial_fill must be in [0, 1]")


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str  # expansion_triggered | join_started | join_completed |
               # catchup_completed | breakdown
    n: int     # system size after the event
    stored: tuple[float, ...]
    backlog: float = 0.0
    duration: Optional[float] = None
    breakdown_kind: Optional[str] = None


@dataclass(frozen=True)
class SimOutcome:
    kind: str  # stabilized | breakdown | max_time_exceeded
    final_n: int
    total_time: float
    breakdown_kind: Optional[str] = None
    at_n: Optional[int] = None
    at_time: Optional[float] = None


def _per_node_write_bytes(cfg: SimConfig, n: int) -> float:
    """Live per-node write inflow (bytes/s) at system size n."""
    v = cfg.params.value_size
    if cfg.scenario.workload is WorkloadKind.INCREASING_PER_NODE:
        return cfg.rate * v
    return cfg.rate * v / n


def run(cfg: SimConfig) -> tuple[list[SimEvent], SimOutcome]:
    p = cfg.params
    b, s_cap = p.bandwidth, p.storage
    mu_s = p.mu * s_cap
    clear = cfg.scenario.mode is StabilizationMode.CLEAR

    n = p.n
    t = 0.0
    stored = cfg.initial_fill * mu_s  # per node; old nodes stay symmetric
    events: list[SimEvent] = []

    def snapshot(count: int, value: float, extra: Optional[float] = None):
        vals = [value] * count
        if extra is not None:
            vals.append(extra)
        return tuple(vals)

    def outcome_max_time() -> tuple[list[SimEvent], SimOutcome]:
        return events, SimOutcome(MAX_TIME_EXCEEDED, n, cfg.max_sim_time)

    while True:
        # ---- fill to the expansion trigger at size n ----
        w = _per_node_write_bytes(cfg, n)
        if stored < mu_s:
            if w <= 0:
                return outcome_max_time()
            t += (mu_s - stored) / w
            stored = mu_s
        if t > cfg.max_sim_time:
            return outcome_max_time()
        events.append(SimEvent(t, "expansion_triggered", n, snapshot(n, stored)))

        # ---- join: n -> n + 1 ----
        events.append(SimEvent(t, "join_started", n + 1,
                               snapshot(n, stored, 0.0)))
        migration_total = stored * n / (n + 1.0)

        if not clear:
            w_post = _per_node_write_bytes(cfg, n + 1)
            if w_post >= b:
                raise InsufficientBandwidth(
                    "per-node write share meets or exceeds bandwidth")
            b_join = b - w_post
            t_join = migration_total / b_join
            old_rate = w_post - b_join / n  # net per old node during the join
            if old_rate >= 0:
                # the trigger level is never left behind: the next expansion
                # fires before this join completes
                events.append(SimEvent(t, "breakdown", n + 1,
                                       snapshot(n, stored, 0.0),
                                       breakdown_kind=EXPANSION_OVERLAP))
                return events, SimOutcome(BREAKDOWN, n, t, EXPANSION_OVERLAP,
                                          at_n=n, at_time=t)
            # joining node fills at the full b (writes + migration)
            if (migration_total + w_post * t_join) > s_cap:
                t_full = t + s_cap / b
                if t_full > cfg.max_sim_time:
                    return outcome_max_time()
                events.append(SimEvent(t_full, "breakdown", n + 1,
                                       snapshot(n, stored + old_rate * (t_full - t),
                                                s_cap),
                                       breakdown_kind=STORAGE_OVERFLOW))
                return events, SimOutcome(BREAKDOWN, n, t_full, STORAGE_OVERFLOW,
                                          at_n=n, at_time=t_full)
            t += t_join
            if t > cfg.max_sim_time:
                return outcome_max_time()
            # all n+1 nodes end symmetric: the joining node holds the migrated
            # share plus its writes, the old nodes drained to the same level
            stored = migration_total + w_post * t_join
            n += 1
            events.append(SimEvent(t, "join_completed", n,
                                   snapshot(n, stored), duration=t_join))
            if n >= cfg.n_target:
                return events, SimOutcome(STABILIZED, n, t)
            continue

        # ---- clear join ----
        t_join = migration_total / b
        live_total = (n + 1) * _per_node_write_bytes(cfg, n + 1)
        d_acc = live_total * t_join
        t0 = t + t_join
        if t0 > cfg.max_sim_time:
            return outcome_max_time()
        s_base = migration_total  # per-node stored right after the join
        n += 1
        events.append(SimEvent(t0, "join_completed", n,
                               snapshot(n, s_base), backlog=d_acc,
                               duration=t_join))

        w_next = _per_node_write_bytes(cfg, n)
        drain_total = n * (b - w_next)
        if d_acc > 0 and drain_total > 0:
            catchup_end = t0 + d_acc / drain_total
        elif d_acc > 0:
            catchup_end = math.inf
        else:
            catchup_end = t0

        # next-trigger clock: live writes refilling the mu*S headroom
        headroom = mu_s - s_base
        if w_next > 0 and headroom > 0:
            t_trig = t0 + headroom / w_next
        elif w_next > 0:
            t_trig = t0
        else:
            t_trig = math.inf

        # storage overflow while the backlog drains (per-node inflow is the
        # full b during catch-up, then w_next)
        horizon = min(t_trig, cfg.max_sim_time)
        t_full = math.inf
        if catchup_end > t0:
            cross = t0 + (s_cap - s_base) / b
            if cross <= min(catchup_end, horizon):
                t_full = cross
        if t_full == math.inf and catchup_end < horizon:
            s_at_catchup = s_base + d_acc / n + w_next * (catchup_end - t0)
            if w_next > 0 and s_at_catchup < s_cap:
                cross = catchup_end + (s_cap - s_at_catchup) / w_next
                if cross <= horizon:
                    t_full = cross
            elif s_at_catchup >= s_cap:
                t_full = catchup_end
        if t_full < math.inf:
            events.append(SimEvent(t_full, "breakdown", n,
                                   snapshot(n, s_cap),
                                   breakdown_kind=STORAGE_OVERFLOW))
            return events, SimOutcome(BREAKDOWN, n, t_full, STORAGE_OVERFLOW,
                                      at_n=n, at_time=t_full)

        if t_trig <= catchup_end and d_acc > 0:
            if t_trig > cfg.max_sim_time:
                return outcome_max_time()
            remaining = d_acc
            if drain_total > 0:
                remaining = d_acc - drain_total * (t_trig - t0)
            stored_trig = s_base + (d_acc - remaining) / n + w_next * (t_trig - t0)
            events.append(SimEvent(t_trig, "breakdown", n,
                                   snapshot(n, stored_trig), backlog=remaining,
                                   breakdown_kind=CATCHUP_STARVATION))
            return events, SimOutcome(BREAKDOWN, n, t_trig, CATCHUP_STARVATION,
                                      at_n=n, at_time=t_trig)

        if d_acc > 0:
            if catchup_end > cfg.max_sim_time:
                return outcome_max_time()
            events.append(SimEvent(catchup_end, "catchup_completed", n,
                                   snapshot(n, s_base + d_acc / n
                                            + w_next * (catchup_end - t0)),
                                   duration=catchup_end - t0))
        if n >= cfg.n_target:
            return events, SimOutcome(STABILIZED, n, max(catchup_end, t0))

        # resume filling; drained bytes count towards stored, the trigger
        # clock keeps running on live writes from t0
        if t_trig == math.inf:
            return outcome_max_time()
        t = t_trig
        stored = s_base + d_acc / n + w_next * (t_trig - t0)


# ---------------------------------------------------------------------------
# threshold search

def single_expansion_feasible(params: ClusterParams, scenario: Scenario,
                              lam: float) -> bool:
    """Does one n -> n+1 expansion stabilize at per-node rate lam?

    Nodes start prefilled to mu*S; in clear mode the run continues through
    catch-up and the follow-on fill so starvation can be observed.
    """
    rate = lam
    if scenario.workload is WorkloadKind.STABLE_TOTAL:
        rate = lam * params.n
    cfg = SimConfig(params, scenario, rate, n_target=params.n + 1,
                    initial_fill=1.0)
    try:
        _, outcome = run(cfg)
    except InsufficientBandwidth:
        return False
    return outcome.kind == STABILIZED


def feasibility_threshold(params: ClusterParams, scenario: Scenario,
                          tol: float = 1e-4, max_iter: int = 60) -> float:
    """Bisect the largest feasible per-node write rate over (0, b/v)."""
    if tol < 1e-6:
        raise ValueError("tol must be >= 1e-6")
    lo = 0.0
    hi = params.max_write_rate
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if single_expansion_feasible(params, scenario, mid):
            lo = mid
        else:
            hi = mid
        if lo > 0 and (hi - lo) <= tol * lo:
            break
    return lo


@dataclass(frozen=True)
class ValidationRow:
    n: int
    scenario: Scenario
    analytic_bound: float
    simulated_threshold: float
    relative_error: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple[ValidationRow, ...]
    tol: float

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)


def validate_against_bounds(n_values, scenario: Scenario,
                            base_params: ClusterParams,
                            tol: float = 0.02) -> ValidationReport:
    """Compare bisected thresholds to the analytic binding bound per size."""
    n_values = list(n_values)
    if not n_values:
        raise EmptyRange("n-range is empty")
    rows = []
    for n in n_values:
        params = replace(base_params, n=n)
        analytic = bound_report(params, scenario).binding.value
        simulated = feasibility_threshold(params, scenario, tol=1e-4)
        rel = abs(simulated - analytic) / analytic
        rows.append(ValidationRow(n, scenario, analytic, simulated, rel,
                                  rel <= tol))
    return ValidationReport(tuple(rows), tol)


# ---------------------------------------------------------------------------
# export

def event_to_dict(ev: SimEvent) -> dict:
    d = {
        "time": ev.time,
        "kind": ev.kind,
        "n": ev.n,
        "stored": list(ev.stored),
        "backlog": ev.backlog,
    }
    if ev.duration is not None:
        d["duration"] = ev.duration
    if ev.breakdown_kind is not None:
        d["breakdown_kind"] = ev.breakdown_kind
    return d


def write_trace(events: list[SimEvent], path: str) -> None:
    """JSON-lines trace, one event per line."""
    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps(event_to_dict(ev)) + "\n")


def summary_dict(events: list[SimEvent], outcome: SimOutcome) -> dict:
    joins = [
        {"n_new": ev.n, "completed_at": ev.time, "duration": ev.duration}
        for ev in events if ev.kind == "join_completed"
    ]
    d = {
        "outcome": outcome.kind,
        "final_n": outcome.final_n,
        "total_time": outcome.total_time,
        "joins": joins,
    }
    if outcome.kind == BREAKDOWN:
        d["breakdown_kind"] = outcome.breakdown_kind
        d["at_n"] = outcome.at_n
        d["at_time"] = outcome.at_time
    return d
