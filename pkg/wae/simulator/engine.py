"""
PoP simulation loop.

Arrivals are dispatched in time order, period by period. At the end of each
period the queues are stepped to the boundary, telemetry is emitted, and the
Orchestrated topology runs one orchestration round and realizes it through
service discovery before the next period starts.

BareMetal: one dedicated server per edge type plus a load balancer server
that every request crosses first. Containerized topologies route directly to
edge containers spread over `machines.count` hosts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from core.loader import ScenarioConfig
from wae.discovery import ContainerRecord, initial_records, realize, running_matrix
from wae.domain import (
    EDGE_TYPES,
    AssignmentMatrix,
    M,
    MachineTelemetry,
    RequestVector,
    Topology,
    validate_snapshot,
)
from wae.ippool import AddressPool
from wae.orchestration import OrchestrationOutcome, orchestrate
from wae.reports import MachineUsage, OrchestrationRecord, PeriodRecord, RunReport, RunTotals
from wae.simulator.cost import compute_cost
from wae.simulator.queues import Completion, QueueState, RoundRobinRouter, service_time, step_queues
from wae.simulator.workload import WorkloadStream, generate_workload

logger = logging.getLogger(__name__)

LOAD_BALANCER = "load_balancer"


@dataclass
class PeriodAccounting:
    n_hosts: int
    cpu_work: np.ndarray = field(init=False)
    bytes_out: np.ndarray = field(init=False)
    arrivals: np.ndarray = field(init=False)
    dropped: np.ndarray = field(init=False)

    def __post_init__(self):
        self.cpu_work = np.zeros(self.n_hosts)
        self.bytes_out = np.zeros(self.n_hosts)
        self.arrivals = np.zeros(M, dtype=np.int64)
        self.dropped = np.zeros(M, dtype=np.int64)


class SimulatedPoP:
    def __init__(self, config: ScenarioConfig, topology: Topology):
        self.config = config
        self.topology = topology
        self.period_seconds = config.orchestration.period_seconds
        self.state = QueueState(queue_cap=config.latency.queue_cap, n_types=M)
        self.router = RoundRobinRouter(self.state)
        self.demand = [config.latency.service_demand[t] for t in EDGE_TYPES]
        self.pool: AddressPool | None = None
        self.records: tuple[ContainerRecord, ...] = ()

        if topology is Topology.BARE_METAL:
            self.n_hosts = M + 1
            self.lb_host = M
            self.labels = [t.value for t in EDGE_TYPES] + [LOAD_BALANCER]
            self.assignment = AssignmentMatrix(np.eye(M, dtype=np.int8))
        else:
            self.n_hosts = config.machines.count
            self.lb_host = None
            self.labels = [f"host-{n}" for n in range(self.n_hosts)]
            self.pool = AddressPool(config.pool.subnet, config.pool.gateway)
            self.records, _ = realize(initial_records(self.n_hosts), config.start_assignment(), self.pool)
            self.assignment = running_matrix(self.records, self.n_hosts)

        self._on_assignment()
        self.accounting = PeriodAccounting(self.n_hosts)
        self.generated = 0
        self.served = 0
        self.dropped = 0
        self.latencies: list[list[float]] = [[] for _ in range(M)]

    def _on_assignment(self) -> None:
        self.router.update(self.assignment)
        self.sharing = [self.assignment.containers_on(n) for n in range(self.assignment.n_machines)]

    def dispatch(self, t: float, type_index: int, size: float, response_bytes: float) -> bool:
        """Send one request into the PoP; False when it is dropped."""
        acct = self.accounting
        machines = self.config.machines
        lat = self.config.latency
        cap = lat.queue_cap
        cpu_work = self.demand[type_index]
        acct.arrivals[type_index] += 1
        self.generated += 1

        if self.topology is Topology.BARE_METAL:
            lb = self.state.stage(LOAD_BALANCER, self.lb_host)
            lb_time = service_time(size, lat.lb_service_demand, response_bytes, 1,
                                   machines.cpu_capacity, machines.link_capacity)
            forwarded = lb.offer(t, lb_time, t, type_index, cap, None)
            if forwarded is None:
                return self._drop(type_index)
            acct.cpu_work[self.lb_host] += lat.lb_service_demand * size
            acct.bytes_out[self.lb_host] += response_bytes * size
            machine, arrival = type_index, forwarded
        else:
            machine = self.router.route(type_index)
            if machine is None:
                return self._drop(type_index)
            arrival = t

        k = self.sharing[machine]
        edge_time = service_time(size, cpu_work, response_bytes, k, machines.cpu_capacity, machines.link_capacity)
        done = self.state.queue(machine, type_index).offer(arrival, edge_time, t, type_index, cap, self.state.sink)
        if done is None:
            return self._drop(type_index)
        acct.cpu_work[machine] += cpu_work * size
        acct.bytes_out[machine] += response_bytes * size
        if self.topology.containerized:
            acct.cpu_work[machine] += lat.lb_service_demand
        return True

    def _drop(self, type_index: int) -> bool:
        self.accounting.dropped[type_index] += 1
        self.dropped += 1
        return False

    def overhead_units(self, machine: int) -> float:
        """Role VNFs and container runtime load on a containerized host over one period."""
        if not self.topology.containerized:
            return 0.0
        overhead = self.config.overhead
        return (overhead.host_baseline + overhead.per_container * self.sharing[machine]) * self.period_seconds

    def in_flight(self) -> int:
        return self.state.in_flight()


def emit_telemetry(pop: SimulatedPoP, period: int) -> tuple[list[MachineTelemetry], RequestVector]:
    """
    Per-machine utilisation over the period just closed, clamped to [0, 1],
    and the per-type arrival counts.
    """
    machines = pop.config.machines
    span = pop.period_seconds
    telemetry = []
    for n in range(pop.n_hosts):
        cpu = (pop.accounting.cpu_work[n] + pop.overhead_units(n)) / (machines.cpu_capacity * span)
        net = pop.accounting.bytes_out[n] / (machines.link_capacity * span)
        telemetry.append(MachineTelemetry(
            machine=n,
            cpu_utilization=float(min(1.0, max(0.0, cpu))),
            net_out_utilization=float(min(1.0, max(0.0, net))),
            period_id=period,
        ))
    return telemetry, RequestVector(tuple(int(c) for c in pop.accounting.arrivals))


def _stats(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values)
    return float(arr.mean()), float(np.percentile(arr, 95))


def _orchestration_round(pop: SimulatedPoP, telemetry, requests) -> OrchestrationRecord:
    o = pop.config.orchestration
    snapshot = validate_snapshot(telemetry, requests, pop.assignment)
    outcome: OrchestrationOutcome = orchestrate(snapshot, threshold=o.threshold, iteration_cap=o.iteration_cap,
                                                last_container_guard=o.last_container_guard)
    pop.records, commands = realize(pop.records, outcome.result, pop.pool)
    pop.assignment = running_matrix(pop.records, pop.n_hosts)
    pop._on_assignment()
    logger.debug(f"period {snapshot.period_id}: {outcome.status.value}, {len(commands)} command(s), "
                 f"{outcome.result.container_count()} container(s)")
    return OrchestrationRecord(
        status=outcome.status.value,
        iterations=outcome.iterations,
        grows=outcome.grows,
        shrinks=outcome.shrinks,
        blocked=len(outcome.blocked),
        commands=len(commands),
        result=outcome.result.to_lists(),
    )


def close_period(pop: SimulatedPoP, period: int) -> PeriodRecord:
    start = period * pop.period_seconds
    end = start + pop.period_seconds
    completed: list[Completion] = step_queues(pop.state, end - pop.state.clock)

    per_type: list[list[float]] = [[] for _ in range(M)]
    for c in completed:
        per_type[c.type_index].append(c.latency)
    for m in range(M):
        pop.latencies[m].extend(per_type[m])
    pop.served += len(completed)

    telemetry, requests = emit_telemetry(pop, period)
    used = pop.assignment
    container_count = used.container_count() if pop.topology.containerized else M
    sharing = list(pop.sharing)

    orchestration = None
    if pop.topology is Topology.ORCHESTRATED:
        orchestration = _orchestration_round(pop, telemetry, requests)

    stats = [_stats(v) for v in per_type]
    everything = [x for v in per_type for x in v]
    record = PeriodRecord(
        period=period,
        start=start,
        end=end,
        requests={t.value: int(requests.counts[m]) for m, t in enumerate(EDGE_TYPES)},
        served=len(completed),
        dropped=int(pop.accounting.dropped.sum()),
        latency_mean={t.value: stats[m][0] for m, t in enumerate(EDGE_TYPES)},
        latency_p95={t.value: stats[m][1] for m, t in enumerate(EDGE_TYPES)},
        mean_latency=float(np.mean(everything)) if everything else 0.0,
        machines=[MachineUsage(machine=t.machine, label=pop.labels[t.machine], cpu_utilization=t.cpu_utilization,
                               net_out_utilization=t.net_out_utilization) for t in telemetry],
        container_count=container_count,
        assignment=used.to_lists() if pop.topology.containerized else None,
        orchestration=orchestration,
    )
    logger.debug(f"{pop.topology.value} period {period}: served={record.served} dropped={record.dropped} "
                 f"containers={sum(sharing)}")
    pop.accounting = PeriodAccounting(pop.n_hosts)
    return record


def _totals(pop: SimulatedPoP, periods: list[PeriodRecord]) -> RunTotals:
    everything = [x for v in pop.latencies for x in v]
    mean, p95 = _stats(everything)
    usage = []
    for n in range(pop.n_hosts):
        cpu = [p.machines[n].cpu_utilization for p in periods]
        net = [p.machines[n].net_out_utilization for p in periods]
        usage.append(MachineUsage(machine=n, label=pop.labels[n], cpu_utilization=float(np.mean(cpu)),
                                  net_out_utilization=float(np.mean(net))))
    return RunTotals(
        generated=pop.generated,
        served=pop.served,
        dropped=pop.dropped,
        in_flight=pop.in_flight(),
        mean_latency=mean if mean is not None else 0.0,
        p95_latency=p95 if p95 is not None else 0.0,
        latency_mean={t.value: _stats(pop.latencies[m])[0] for m, t in enumerate(EDGE_TYPES)},
        mean_cpu_utilization=usage,
    )


def scenario_workload(config: ScenarioConfig) -> WorkloadStream:
    return generate_workload(config.phases, config.seed, horizon=config.horizon,
                             period_seconds=config.orchestration.period_seconds)


def run_scenario(config: ScenarioConfig, topology: Topology | None = None,
                 workload: WorkloadStream | None = None,
                 on_period: Callable[[PeriodRecord], None] | None = None) -> RunReport:
    """Simulate one topology over `config.periods` periods and return its RunReport."""
    topology = topology or config.topologies[0]
    workload = workload if workload is not None else scenario_workload(config)
    pop = SimulatedPoP(config, topology)
    period_seconds = config.orchestration.period_seconds

    times = workload.times.tolist()
    types = workload.types.tolist()
    sizes = workload.sizes.tolist()
    response_bytes = workload.response_bytes.tolist()

    i = 0
    periods: list[PeriodRecord] = []
    for period in range(config.periods):
        end = (period + 1) * period_seconds
        while i < len(times) and times[i] < end:
            pop.dispatch(times[i], types[i], sizes[i], response_bytes[i])
            i += 1
        record = close_period(pop, period)
        periods.append(record)
        if on_period is not None:
            on_period(record)

    totals = _totals(pop, periods)
    logger.info(f"{topology.value}: {totals.generated} requests, mean latency "
                f"{(totals.mean_latency or 0.0) * 1000:.3f} ms, {totals.dropped} dropped")
    return RunReport(
        scenario=config.name,
        topology=topology,
        seed=config.seed,
        period_seconds=period_seconds,
        real_period_seconds=config.orchestration.real_period_seconds,
        time_compression=config.time_compression,
        simulated_seconds=config.horizon,
        real_equivalent_seconds=config.horizon * config.time_compression,
        cost=compute_cost(topology, config),
        periods=periods,
        totals=totals,
    )


def run_topologies(config: ScenarioConfig, topologies: Iterable[Topology] | None = None,
                   on_period: Callable[[PeriodRecord], None] | None = None) -> dict[Topology, RunReport]:
    """Every topology sees the same arrival stream."""
    workload = scenario_workload(config)
    return {
        topology: run_scenario(config, topology, workload=workload, on_period=on_period)
        for topology in (topologies or config.topologies)
    }
