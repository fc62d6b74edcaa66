"""Command-line front end.

Commands: bounds, sweep, simulate, validate, case-study, ring-stats.
Exit codes: 0 ok, 2 usage/config error, 3 I/O error, 4 simulated breakdown,
5 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys

from . import bounds as bnd
from . import ring as rng_mod
from . import sim as sim_mod
from .bounds import (
    ALL_SCENARIOS,
    BoundKind,
    ClusterParams,
    Scenario,
    StabilizationMode,
    WorkloadKind,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_BREAKDOWN = 4
EXIT_VALIDATION = 5

DEFAULT_BANDWIDTH = 125_000_000.0  # 1 Gbps in bytes/s
DEFAULT_VALUE_SIZE = 16.0
DEFAULT_STORAGE = 1e12

# decimal prefixes; bit units divide by 8
_UNIT_BYTES = {
    "bps": 0.125, "Kbps": 125.0, "Mbps": 125_000.0, "Gbps": 125_000_000.0,
    "B/s": 1.0, "KB/s": 1e3, "MB/s": 1e6, "GB/s": 1e9,
}
_RATE_RE = re.compile(r"^\s*([0-9.]+(?:[eE][-+]?[0-9]+)?)\s*([A-Za-z/]+)?\s*$")


def parse_bandwidth(text) -> float:
    """'1Gbps' -> 125000000.0 bytes/s; a bare number is bytes/s."""
    if isinstance(text, (int, float)):
        value = float(text)
    else:
        m = _RATE_RE.match(str(text))
        if not m:
            raise ValueError(f"cannot parse bandwidth: {text!r}")
        value = float(m.group(1))
        unit = m.group(2)
        if unit is not None:
            if unit not in _UNIT_BYTES:
                raise ValueError(f"unknown bandwidth unit: {unit!r}")
            value *= _UNIT_BYTES[unit]
    if value <= 0:
        raise ValueError("bandwidth must be positive")
    return value


def format_bandwidth(bytes_per_s: float, unit: str) -> str:
    if unit not in _UNIT_BYTES:
        raise ValueError(f"unknown bandwidth unit: {unit!r}")
    scaled = bytes_per_s / _UNIT_BYTES[unit]
    text = f"{scaled:.12g}"
    return f"{text}{unit}"


def _parse_scenarios(text: str) -> list[Scenario]:
    if text == "all":
        return list(ALL_SCENARIOS)
    return [Scenario.parse(part.strip()) for part in text.split(",") if part.strip()]


def _params_from_args(args) -> ClusterParams:
    return ClusterParams(
        n=args.n,
        bandwidth=parse_bandwidth(args.bandwidth),
        value_size=float(args.value_size),
        mu=args.mu,
        replication=args.replication,
        storage=args.storage,
    )


# ---------------------------------------------------------------------------
# bounds

def cmd_bounds(args) -> int:
    try:
        params = _params_from_args(args)
        scenario = Scenario.parse(args.scenario)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = bnd.bound_report(params, scenario)
    if args.json:
        payload = {
            "scenario": scenario.name,
            "bounds": [
                {"kind": e.kind.value, "writes_per_s_per_node": e.value,
                 "applicable": e.applicable}
                for e in report.entries
            ],
            "binding": {"kind": report.binding.kind.value,
                        "writes_per_s_per_node": report.binding.value},
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"scenario: {scenario.name}")
        for e in report.entries:
            mark = "binding" if e == report.binding else (
                "applicable" if e.applicable else "n/a")
            print(f"  {e.kind.value:<10} {e.value:>16.6g} writes/s/node  [{mark}]")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def sweep_rows(n_min: int, n_max: int, mu_values, scenarios,
               bandwidth: float, value_size: float):
    """CurveCSV rows: (n, scenario, bound_kind, lambda).  The storage bound
    depends on mu, so its kind column carries the mu value; the bandwidth and
    time bounds are mu-independent and appear once."""
    rows = []
    for scenario in scenarios:
        concurrent = scenario.mode is StabilizationMode.CONCURRENT
        kinds = []
        if concurrent:
            kinds.append(("bandwidth", None))
            kinds.extend(("storage", mu) for mu in mu_values)
        else:
            kinds.append(("time", None))
        for kind, mu in kinds:
            label = kind if mu is None else f"storage(mu={mu:g})"
            for n in range(n_min, n_max + 1):
                params = ClusterParams(n=n, bandwidth=bandwidth,
                                       value_size=value_size,
                                       mu=mu if mu is not None else 0.5)
                report = bnd.bound_report(params, scenario)
                value = {e.kind.value: e.value for e in report.entries}[kind]
                rows.append((n, scenario.name, label, value))
    rows.sort(key=lambda r: (r[1], r[2], r[0]))
    return rows


def cmd_sweep(args) -> int:
    try:
        if not (1 <= args.n_min < args.n_max <= 10 ** 6):
            raise ValueError("need 1 <= n-min < n-max <= 10^6")
        mu_values = [float(x) for x in args.mu_list.split(",") if x]
        for mu in mu_values:
            if not 0 < mu <= 1:
                raise ValueError(f"mu={mu} outside (0, 1]")
        scenarios = _parse_scenarios(args.scenario_list)
        bandwidth = parse_bandwidth(args.bandwidth)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rows = sweep_rows(args.n_min, args.n_max, mu_values, scenarios,
                      bandwidth, float(args.value_size))
    try:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "scenario", "bound_kind",
                             "lambda_bound_writes_per_s"])
            for n, scenario, kind, value in rows:
                writer.writerow([n, scenario, kind, f"{value:.6g}"])
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

_CONFIG_FIELDS = {
    "n", "bandwidth", "value_size", "mu", "replication", "storage",
    "workload", "rate", "mode", "n_target", "initial_fill", "max_sim_time",
}
_CONFIG_REQUIRED = {"n", "bandwidth", "value_size", "mu", "workload", "rate",
                    "mode", "n_target"}


def load_sim_config(doc: dict) -> sim_mod.SimConfig:
    unknown = set(doc) - _CONFIG_FIELDS
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    missing = _CONFIG_REQUIRED - set(doc)
    if missing:
        raise ValueError(f"missing config fields: {sorted(missing)}")
    params = ClusterParams(
        n=int(doc["n"]),
        bandwidth=parse_bandwidth(doc["bandwidth"]),
        value_size=float(doc["value_size"]),
        mu=float(doc["mu"]),
        replication=int(doc.get("replication", 1)),
        storage=float(doc.get("storage", DEFAULT_STORAGE)),
    )
    scenario = Scenario(WorkloadKind(doc["workload"]),
                        StabilizationMode(doc["mode"]))
    return sim_mod.SimConfig(
        params=params,
        scenario=scenario,
        rate=float(doc["rate"]),
        n_target=int(doc["n_target"]),
        initial_fill=float(doc.get("initial_fill", 0.0)),
        max_sim_time=float(doc.get("max_sim_time", 1e18)),
    )


def cmd_simulate(args) -> int:
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
        cfg = load_sim_config(doc)
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        events, outcome = sim_mod.run(cfg)
    except bnd.InsufficientBandwidth as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.trace:
        try:
            sim_mod.write_trace(events, args.trace)
        except OSError as exc:
            print(f"error: cannot write {args.trace}: {exc}", file=sys.stderr)
            return EXIT_IO
    print(json.dumps(sim_mod.summary_dict(events, outcome), indent=2))
    return EXIT_BREAKDOWN if outcome.kind == sim_mod.BREAKDOWN else EXIT_OK


# ---------------------------------------------------------------------------
# validate

def cmd_validate(args) -> int:
    try:
        n_values = [int(x) for x in args.n_list.split(",") if x]
        if not n_values:
            raise ValueError("n-list is empty")
        scenarios = _parse_scenarios(args.scenario_list)
        if args.tol < 1e-6:
            raise ValueError("tol must be >= 1e-6")
        base = ClusterParams(n=1, bandwidth=parse_bandwidth(args.bandwidth),
                             value_size=float(args.value_size), mu=args.mu,
                             storage=args.storage)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    all_ok = True
    print(f"{'n':>4} {'scenario':<22} {'analytic':>14} {'simulated':>14} "
          f"{'rel_err':>10}  result")
    for scenario in scenarios:
        report = sim_mod.validate_against_bounds(n_values, scenario, base,
                                                 tol=args.tol)
        for row in report.rows:
            status = "pass" if row.passed else "FAIL"
            print(f"{row.n:>4} {scenario.name:<22} {row.analytic_bound:>14.6g} "
                  f"{row.simulated_threshold:>14.6g} "
                  f"{row.relative_error:>10.3e}  {status}")
            all_ok = all_ok and row.passed
    return EXIT_OK if all_ok else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# case study

def case_study(total_rate: float = 4_800_000.0,
               value_size: float = 240.0,
               bandwidth: float = DEFAULT_BANDWIDTH,
               mu: float = 0.5) -> dict:
    """Metro-IoT sizing exercise: a stable 4.8M writes/s workload of 240 B
    values against 1 Gbps nodes, mu = 0.5."""
    b_rate = bandwidth / value_size
    stable_concurrent = Scenario(WorkloadKind.STABLE_TOTAL,
                                 StabilizationMode.CONCURRENT)
    stable_clear = Scenario(WorkloadKind.STABLE_TOTAL, StabilizationMode.CLEAR)
    common = dict(bandwidth=bandwidth, value_size=value_size, mu=mu)
    return {
        "total_rate": total_rate,
        "value_size": value_size,
        "bandwidth": bandwidth,
        "mu": mu,
        "max_write_rate_per_node": b_rate,
        "concurrent_stable_feasible": total_rate < b_rate,
        "min_n_all_bounds": bnd.min_feasible_n(stable_concurrent, total_rate,
                                               **common),
        "min_n_storage_only": bnd.min_feasible_n(
            stable_concurrent, total_rate, kinds={BoundKind.STORAGE}, **common),
        "min_n_clear": bnd.min_feasible_n(stable_clear, total_rate, **common),
        "reported_reference_nodes": {"concurrent_stable": 13, "clear_stable": 17},
    }


def cmd_case_study(args) -> int:
    try:
        data = case_study(
            total_rate=args.override_total_rate,
            value_size=args.override_value_size,
            bandwidth=parse_bandwidth(args.override_bandwidth),
            mu=args.override_mu,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    b_rate = data["max_write_rate_per_node"]
    print("Metro-IoT case study")
    print(f"  total write rate     : {data['total_rate']:,.0f} writes/s")
    print(f"  value size           : {data['value_size']:g} B")
    print(f"  node bandwidth       : {data['bandwidth']:,.0f} B/s")
    print(f"  (a) single-node write ceiling b/v = {b_rate:,.1f} writes/s")
    if data["concurrent_stable_feasible"]:
        print("  (b) concurrent stable rebalancing: feasible "
              f"(total rate < {b_rate:,.1f}); smallest qualifying size "
              f"N = {data['min_n_all_bounds']}")
    else:
        print("  (b) concurrent stable rebalancing: infeasible at every N — "
              "the system-wide rate meets or exceeds what one node can "
              "receive, so the bandwidth bound fails for all N")
    print(f"  (c) smallest N satisfying the storage bound alone: "
          f"{data['min_n_storage_only']}")
    print(f"  (d) smallest N satisfying the clear-mode time bound: "
          f"{data['min_n_clear']}")
    ref = data["reported_reference_nodes"]
    print(f"  reference values from the original study: about "
          f"{ref['concurrent_stable']} nodes (concurrent, stable writes) and "
          f"about {ref['clear_stable']} nodes (clear stabilization).")
    print("  note: those reference counts rest on a workload-to-curve "
          "transformation that is not fully specified, so they are echoed "
          "here as-is; the derived values above follow directly from the "
          "bound formulas.")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ring stats

def cmd_ring_stats(args) -> int:
    try:
        if args.strategy == "many-token-equal-part":
            if args.q is None:
                raise ValueError("--q required for many-token-equal-part")
            strategy = rng_mod.ManyTokenEqualPart(q=args.q)
        elif args.strategy == "limited-token-equal-part":
            if args.tokens_per_node is None:
                raise ValueError("--t required for limited-token-equal-part")
            strategy = rng_mod.LimitedTokenEqualPart(args.tokens_per_node)
        elif args.strategy == "limited-token-random-part":
            if args.tokens_per_node is None:
                raise ValueError("--t required for limited-token-random-part")
            strategy = rng_mod.LimitedTokenRandomPart(args.tokens_per_node)
        else:
            raise ValueError(f"unknown strategy {args.strategy!r}")
        ring = rng_mod.build_ring(args.nodes, strategy, args.seed)
        stats = rng_mod.balance_stats(ring, args.keys, r=args.replication,
                                      seed=args.seed)
        _, report = rng_mod.join(ring, args.nodes, seed=args.seed,
                                 key_sample=args.keys, sample_seed=args.seed,
                                 replication=args.replication)
    except (rng_mod.RingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    payload = {
        "balance": {
            "n": stats.n,
            "k_sampled": stats.k_sampled,
            "max_load": stats.max_load,
            "mean_load": stats.mean_load,
            "epsilon_hat": stats.epsilon_hat,
            "per_node_load": {str(k): v for k, v in stats.per_node_load.items()},
        },
        "join": {
            "node": report.joined_or_left,
            "moved_partition_count": len(report.moved_partitions),
            "moved_key_estimate": report.moved_key_estimate,
        },
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dht-rebalance",
        description="DHT scale-out rebalancing: feasibility bounds, fluid "
                    "simulation and ring statistics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="evaluate the feasibility bounds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--bandwidth", default="1Gbps")
    p.add_argument("--value-size", default="16", dest="value_size")
    p.add_argument("--replication", type=int, default=1)
    p.add_argument("--storage", type=float, default=DEFAULT_STORAGE,
                   help="bytes per node; bounds do not depend on it, "
                        "simulation durations do")
    p.add_argument("--scenario", required=True,
                   help="increasing-concurrent | increasing-clear | "
                        "stable-concurrent | stable-clear")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="emit bound curves over N as CSV")
    p.add_argument("--n-min", type=int, required=True, dest="n_min")
    p.add_argument("--n-max", type=int, required=True, dest="n_max")
    p.add_argument("--mu-list", default="0.3,0.5,0.7", dest="mu_list")
    p.add_argument("--scenario-list", default="all", dest="scenario_list")
    p.add_argument("--bandwidth", default="1Gbps")
    p.add_argument("--value-size", default="16", dest="value_size")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="run a scale-out simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--trace", default=None,
                   help="write a JSON-lines event trace here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate",
                       help="cross-check simulated thresholds against the bounds")
    p.add_argument("--n-list", required=True, dest="n_list")
    p.add_argument("--scenario-list", default="all", dest="scenario_list")
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--bandwidth", default="1Gbps")
    p.add_argument("--value-size", default="16", dest="value_size")
    p.add_argument("--storage", type=float, default=DEFAULT_STORAGE)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("case-study", help="metro-IoT sizing analysis")
    p.add_argument("--override-total-rate", type=float, default=4_800_000.0,
                   dest="override_total_rate")
    p.add_argument("--override-value-size", type=float, default=240.0,
                   dest="override_value_size")
    p.add_argument("--override-bandwidth", default="1Gbps",
                   dest="override_bandwidth")
    p.add_argument("--override-mu", type=float, default=0.5,
                   dest="override_mu")
    p.set_defaults(func=cmd_case_study)

    p = sub.add_parser("ring-stats",
                       help="balance statistics and one-join movement report")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--strategy", default="many-token-equal-part")
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--t", type=int, default=None, dest="tokens_per_node")
    p.add_argument("--keys", type=int, default=1_000_000)
    p.add_argument("--replication", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ring_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
