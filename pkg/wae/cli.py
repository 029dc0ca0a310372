#!/usr/bin/env python3
"""
wae command line: simulate, orchestrate, oracle, serve, compare.

Exit status is 0 on success, 1 on a validation or config error and 2 on a
usage error or an I/O or bind failure.
"""
import argparse
import json
import logging
import os
import sys
import time

from rich.console import Console
from rich.markup import escape
from tqdm import tqdm

import core.logger  # noqa
from core.loader import ConfigError, SnapshotFile, apply_overrides, load_scenario, load_snapshot
from wae.domain import Topology, WaeError
from wae.oracle import compare_with_heuristic
from wae.orchestration import DEFAULT_THRESHOLD, orchestrate
from wae.reports import (
    comparison_table,
    compare_reports,
    latency_table,
    read_report,
    summarize,
    utilization_table,
    write_period_csv,
    write_report,
    write_summary,
)
from wae.simulator import run_topologies

console = Console(stderr=True)
logger = logging.getLogger(__name__)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]

parser = argparse.ArgumentParser(
        prog="wae",
        description="Workload Automation Engine: CDN edge container orchestration and PoP simulation")
parser.add_argument(
        "--log-level", default=None, type=str.upper, choices=LOG_LEVELS,
        help="logging level (default: WAE_LOG_LEVEL or INFO)")
subparsers = parser.add_subparsers(dest="command", required=True)

simulate_parser = subparsers.add_parser("simulate", help="run the configured topologies and write reports")
simulate_parser.add_argument(
        "--config", "-c", type=str, default=None,
        help="scenario config (default: WAE_CONFIG or the bundled evaluation scenario)")
simulate_parser.add_argument(
        "--seed", type=int, default=None,
        help="override the scenario seed")
simulate_parser.add_argument(
        "--out", "-o", type=str, default="results",
        help="output directory")
simulate_parser.add_argument(
        "--topology", "-t", action="append", choices=[t.value for t in Topology], default=None,
        help="run only this topology (repeatable)")
simulate_parser.add_argument(
        "--threshold", type=float, default=None,
        help="override the orchestration threshold")
simulate_parser.add_argument(
        "--period", type=float, default=None,
        help="override the simulated re-orchestration period, in seconds")
simulate_parser.add_argument(
        "--quiet", "-q", default=False, action="store_true",
        help="no progress bar or tables")

orchestrate_parser = subparsers.add_parser("orchestrate", help="run one orchestration round on a snapshot file")
orchestrate_parser.add_argument("snapshot", type=str, help="snapshot file (JSON)")
orchestrate_parser.add_argument("--threshold", type=float, default=None, help="override the threshold")
orchestrate_parser.add_argument("--iteration-cap", type=int, default=64, help="maximum full passes")
orchestrate_parser.add_argument(
        "--no-guard", default=False, action="store_true",
        help="allow shrinking the last container of a demanded type")
orchestrate_parser.add_argument("--out", "-o", type=str, default=None, help="also write the outcome here")

oracle_parser = subparsers.add_parser("oracle", help="exact minimum-container solution for a snapshot file")
oracle_parser.add_argument("snapshot", type=str, help="snapshot file (JSON)")
oracle_parser.add_argument("--threshold", type=float, default=None, help="override the threshold")
oracle_parser.add_argument("--out", "-o", type=str, default=None, help="also write the result here")

serve_parser = subparsers.add_parser("serve", help="run the Data Collection / Service Discovery service")
serve_parser.add_argument("--config", "-c", type=str, default=None, help="scenario config")
serve_parser.add_argument("--host", type=str, default=None, help="bind address (default: config or WAE_HOST)")
serve_parser.add_argument("--port", type=int, default=None, help="bind port (default: config or WAE_PORT)")

compare_parser = subparsers.add_parser("compare", help="per-metric deltas between two run reports")
compare_parser.add_argument("a", type=str, help="baseline report")
compare_parser.add_argument("b", type=str, help="report to compare")


def _emit(document: dict, out: str | None) -> None:
    text = json.dumps(document, indent=2)
    print(text)
    if out:
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            f.write(text + "\n")


def _threshold(args, snapshot: SnapshotFile) -> float:
    if args.threshold is not None:
        return args.threshold
    return snapshot.threshold if snapshot.threshold is not None else DEFAULT_THRESHOLD


def cmd_simulate(args) -> int:
    config = load_scenario(args.config)
    topologies = [Topology(t) for t in args.topology] if args.topology else None
    config = apply_overrides(config, seed=args.seed, threshold=args.threshold,
                             period_seconds=args.period, topologies=topologies)
    logger.info(f"Simulating '{config.name}' seed={config.seed}: {', '.join(t.value for t in config.topologies)}")

    with tqdm(total=config.periods * len(config.topologies), desc="periods", unit="period",
              disable=args.quiet, file=sys.stderr) as progress:
        reports = run_topologies(config, on_period=lambda _: progress.update(1))

    os.makedirs(args.out, exist_ok=True)
    for topology, report in reports.items():
        write_report(report, os.path.join(args.out, f"{topology.value}.json"))
        write_period_csv(report, os.path.join(args.out, f"{topology.value}.csv"))
    summary = summarize(reports.values())
    write_summary(summary, os.path.join(args.out, "summary.json"))

    if not args.quiet:
        console.print(latency_table(summary))
        for report in reports.values():
            console.print(utilization_table(report))
        if summary.cpu_gain_pct is not None:
            console.print(f"Containerized hosts run {summary.cpu_gain_pct:+.1f} pt CPU and "
                          f"{summary.net_gain_pct:+.1f} pt network utilisation against bare-metal edges")
    logger.info(f"Reports written to {args.out}")
    return 0


def cmd_orchestrate(args) -> int:
    document = load_snapshot(args.snapshot)
    snapshot = document.to_snapshot()
    outcome = orchestrate(snapshot, threshold=_threshold(args, document), iteration_cap=args.iteration_cap,
                          last_container_guard=not args.no_guard)
    result = document.model_dump(exclude={"outcome"})
    result["assignment"] = outcome.result.to_lists()
    result["outcome"] = {
        "status": outcome.status.value,
        "iterations": outcome.iterations,
        "initial": snapshot.assignment.to_lists(),
        "container_count": outcome.result.container_count(),
        "requests_normalized": list(outcome.requests_normalized),
        "placement_normalized": list(outcome.placement_normalized),
        "max_gap": outcome.max_gap,
        "trace": [
            {"iteration": s.iteration, "type": s.function_type.value, "action": s.action.value,
             "machine": s.machine, "outcome": s.outcome.value, "oscillation": s.oscillation}
            for s in outcome.trace
        ],
    }
    _emit(result, args.out)
    return 0


def cmd_oracle(args) -> int:
    document = load_snapshot(args.snapshot)
    snapshot = document.to_snapshot()
    started = time.perf_counter()
    comparison = compare_with_heuristic(snapshot, threshold=_threshold(args, document))
    elapsed = time.perf_counter() - started
    oracle = comparison.oracle

    result = document.model_dump(exclude={"outcome"})
    result["outcome"] = {
        "infeasible": oracle.infeasible,
        "optimal_matrix": oracle.matrix.to_lists() if oracle.matrix is not None else None,
        "optimal_count": oracle.optimal_count,
        "feasible_count": oracle.feasible_count,
        "enumerated": oracle.enumerated,
        "heuristic_status": comparison.heuristic.status.value,
        "heuristic_matrix": comparison.heuristic.result.to_lists(),
        "heuristic_count": comparison.heuristic_count,
        "heuristic_feasible": comparison.heuristic_feasible,
        "gap": comparison.gap,
        "seconds": round(elapsed, 4),
    }
    _emit(result, args.out)
    return 0


def cmd_serve(args) -> int:
    from app import serve

    config = load_scenario(args.config)
    if args.host or args.port is not None:
        service = config.service.model_copy(update={k: v for k, v in (("host", args.host), ("port", args.port))
                                                    if v is not None})
        config = config.model_copy(update={"service": service})
    return serve(config)


def cmd_compare(args) -> int:
    a, b = read_report(args.a), read_report(args.b)
    rows = compare_reports(a, b)
    console.print(comparison_table(f"{a.topology.value} ({args.a})", f"{b.topology.value} ({args.b})", rows))
    print(json.dumps({name: {"a": x, "b": y, "delta": d} for name, x, y, d in rows}, indent=2))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "orchestrate": cmd_orchestrate,
    "oracle": cmd_oracle,
    "serve": cmd_serve,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    args = parser.parse_args(argv)
    if args.log_level:
        logging.getLogger().setLevel(args.log_level)

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        console.print(f"[bold red]config error:[/] {escape(str(e))}", highlight=False, soft_wrap=True)
        return 1
    except WaeError as e:
        console.print(f"[bold red]error:[/] {type(e).__name__}: {escape(str(e))}", highlight=False, soft_wrap=True)
        return 1
    except OSError as e:
        console.print(f"[bold red]error:[/] {escape(str(e))}", highlight=False, soft_wrap=True)
        return 2
    except KeyboardInterrupt:
        return 0


if __name__ == "__main__":
    sys.exit(main())
