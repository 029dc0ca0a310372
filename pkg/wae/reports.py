"""
RunReport models and the files the CLI writes from them.

Reports are pydantic models dumped as JSON (they load back with
read_report). The per-period CSV is flat, one row per period, for plotting.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from typing import Iterable, Optional

from pydantic import BaseModel, Field, ValidationError
from rich.table import Table

from core.loader import ConfigError, format_validation_error
from wae.domain import EDGE_TYPES, Topology

logger = logging.getLogger(__name__)

REPORT_VERSION = 1


class MachineUsage(BaseModel):
    machine: int
    label: str
    cpu_utilization: float
    net_out_utilization: float


class OrchestrationRecord(BaseModel):
    status: str
    iterations: int
    grows: int
    shrinks: int
    blocked: int
    commands: int
    result: list[list[int]]


class PeriodRecord(BaseModel):
    period: int
    start: float
    end: float
    requests: dict[str, int]
    served: int
    dropped: int
    latency_mean: dict[str, Optional[float]]
    latency_p95: dict[str, Optional[float]]
    mean_latency: Optional[float]
    machines: list[MachineUsage]
    container_count: int
    assignment: Optional[list[list[int]]] = None
    orchestration: Optional[OrchestrationRecord] = None


class CostSummary(BaseModel):
    machines: int
    unit_machine_cost: float
    total: float


class RunTotals(BaseModel):
    generated: int
    served: int
    dropped: int
    in_flight: int
    mean_latency: Optional[float]
    p95_latency: Optional[float]
    latency_mean: dict[str, Optional[float]]
    mean_cpu_utilization: list[MachineUsage]


class RunReport(BaseModel):
    version: int = REPORT_VERSION
    scenario: str
    topology: Topology
    seed: int
    period_seconds: float
    real_period_seconds: float
    time_compression: float
    simulated_seconds: float
    real_equivalent_seconds: float
    cost: CostSummary
    periods: list[PeriodRecord] = Field(default_factory=list)
    totals: RunTotals

    @property
    def mean_latency(self) -> float:
        return self.totals.mean_latency or 0.0


class ComparisonSummary(BaseModel):
    scenario: str
    mean_latency_ms: dict[str, Optional[float]]
    latency_reduction_pct: dict[str, Optional[float]]
    cost: dict[str, float]
    cost_reduction_pct: Optional[float]
    utilization: dict[str, list[MachineUsage]]
    cpu_gain_pct: Optional[float] = None
    net_gain_pct: Optional[float] = None


def write_report(report: RunReport, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(report.model_dump_json(indent=2))
        f.write("\n")
    logger.debug(f"Wrote report {path}")
    return path


def read_report(path: str) -> RunReport:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError("file not found", path=path) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}: {e.msg}", path=path) from e
    try:
        return RunReport.model_validate(data)
    except ValidationError as e:
        raise ConfigError("not a run report", path=path, errors=format_validation_error(e)) from e


def period_rows(report: RunReport) -> list[dict]:
    rows = []
    for p in report.periods:
        row = {
            "topology": report.topology.value,
            "period": p.period,
            "start": p.start,
            "end": p.end,
            "served": p.served,
            "dropped": p.dropped,
            "container_count": p.container_count,
            "mean_latency": p.mean_latency,
        }
        for t in EDGE_TYPES:
            row[f"requests_{t.value}"] = p.requests.get(t.value, 0)
            row[f"latency_mean_{t.value}"] = p.latency_mean.get(t.value)
            row[f"latency_p95_{t.value}"] = p.latency_p95.get(t.value)
        for usage in p.machines:
            row[f"cpu_{usage.label}"] = usage.cpu_utilization
            row[f"net_{usage.label}"] = usage.net_out_utilization
        row["status"] = p.orchestration.status if p.orchestration else ""
        rows.append(row)
    return rows


def write_period_csv(report: RunReport, path: str) -> str:
    rows = period_rows(report)
    fieldnames: list[str] = []
    for row in rows:
        fieldnames.extend(k for k in row if k not in fieldnames)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return path


def read_period_csv(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def reduction_pct(baseline: float | None, value: float | None) -> float | None:
    if baseline is None or value is None or baseline <= 0:
        return None
    return 100.0 * (baseline - value) / baseline


def _edge_usage(report: RunReport) -> list[MachineUsage]:
    edges = {t.value for t in EDGE_TYPES}
    usage = report.totals.mean_cpu_utilization
    if report.topology is Topology.BARE_METAL:
        return [u for u in usage if u.label in edges]
    return usage


def summarize(reports: Iterable[RunReport]) -> ComparisonSummary:
    """Latency and cost reductions against BareMetal, plus the utilisation tables."""
    by_topology = {r.topology: r for r in reports}
    if not by_topology:
        raise ValueError("nothing to summarize")
    scenario = next(iter(by_topology.values())).scenario
    baseline = by_topology.get(Topology.BARE_METAL)

    latency = {t.value: (r.totals.mean_latency * 1000.0 if r.totals.mean_latency is not None else None)
               for t, r in by_topology.items()}
    reduction = {
        t.value: reduction_pct(baseline.totals.mean_latency, r.totals.mean_latency) if baseline else None
        for t, r in by_topology.items() if t is not Topology.BARE_METAL
    }
    cost = {t.value: r.cost.total for t, r in by_topology.items()}
    containerized = [r for t, r in by_topology.items() if t.containerized]
    cost_reduction = reduction_pct(baseline.cost.total, containerized[0].cost.total) \
        if baseline and containerized else None

    cpu_gain = net_gain = None
    orchestrated = by_topology.get(Topology.ORCHESTRATED) or (containerized[0] if containerized else None)
    if baseline and orchestrated:
        bm = _edge_usage(baseline)
        ct = _edge_usage(orchestrated)
        if bm and ct:
            cpu_gain = 100.0 * (sum(u.cpu_utilization for u in ct) / len(ct)
                                - sum(u.cpu_utilization for u in bm) / len(bm))
            net_gain = 100.0 * (sum(u.net_out_utilization for u in ct) / len(ct)
                                - sum(u.net_out_utilization for u in bm) / len(bm))

    return ComparisonSummary(
        scenario=scenario,
        mean_latency_ms=latency,
        latency_reduction_pct=reduction,
        cost=cost,
        cost_reduction_pct=cost_reduction,
        utilization={t.value: r.totals.mean_cpu_utilization for t, r in by_topology.items()},
        cpu_gain_pct=cpu_gain,
        net_gain_pct=net_gain,
    )


def _fmt(value: float | None, suffix: str = "", digits: int = 2) -> str:
    return "-" if value is None else f"{value:.{digits}f}{suffix}"


def latency_table(summary: ComparisonSummary) -> Table:
    table = Table(title=f"Latency and cost ({summary.scenario})")
    table.add_column("Topology", style="bold")
    table.add_column("Mean latency", justify="right")
    table.add_column("vs BareMetal", justify="right")
    table.add_column("Cost", justify="right")
    for topology, ms in summary.mean_latency_ms.items():
        table.add_row(topology, _fmt(ms, " ms", 3),
                      _fmt(summary.latency_reduction_pct.get(topology), "% less", 1),
                      _fmt(summary.cost.get(topology), "", 1))
    if summary.cost_reduction_pct is not None:
        table.caption = f"Deployment cost reduction: {summary.cost_reduction_pct:.1f}%"
    return table


def utilization_table(report: RunReport) -> Table:
    title = "Resource usage per server" if report.topology is Topology.BARE_METAL else "Resource usage per host"
    table = Table(title=f"{title} ({report.topology.value})")
    table.add_column("Machine", style="bold")
    table.add_column("CPU", justify="right")
    table.add_column("Network out", justify="right")
    for usage in report.totals.mean_cpu_utilization:
        table.add_row(usage.label, _fmt(usage.cpu_utilization * 100, "%", 1),
                      _fmt(usage.net_out_utilization * 100, "%", 1))
    return table


def write_summary(summary: ComparisonSummary, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(summary.model_dump_json(indent=2))
        f.write("\n")
    return path


def compare_reports(a: RunReport, b: RunReport) -> list[tuple[str, float | None, float | None, float | None]]:
    """(metric, a, b, b - a) for the headline numbers of two reports."""
    def delta(x, y):
        return None if x is None or y is None else y - x

    metrics = [
        ("mean_latency_ms", _ms(a.totals.mean_latency), _ms(b.totals.mean_latency)),
        ("p95_latency_ms", _ms(a.totals.p95_latency), _ms(b.totals.p95_latency)),
        ("generated", a.totals.generated, b.totals.generated),
        ("served", a.totals.served, b.totals.served),
        ("dropped", a.totals.dropped, b.totals.dropped),
        ("cost", a.cost.total, b.cost.total),
    ]
    for t in EDGE_TYPES:
        metrics.append((f"latency_ms_{t.value}", _ms(a.totals.latency_mean.get(t.value)),
                        _ms(b.totals.latency_mean.get(t.value))))
    return [(name, x, y, delta(x, y)) for name, x, y in metrics]


def _ms(seconds: float | None) -> float | None:
    return None if seconds is None else seconds * 1000.0


def comparison_table(a_name: str, b_name: str, rows) -> Table:
    table = Table(title=f"{a_name} -> {b_name}")
    table.add_column("Metric", style="bold")
    table.add_column("A", justify="right")
    table.add_column("B", justify="right")
    table.add_column("Delta", justify="right")
    for name, x, y, d in rows:
        table.add_row(name, _fmt(x, digits=3), _fmt(y, digits=3), _fmt(d, digits=3))
    return table
