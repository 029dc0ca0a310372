"""
Data Collection and Service Discovery state behind the HTTP service.

Instance Managers push one telemetry payload per (period, machine); a tick
assembles the closing period into a snapshot, orchestrates it, diffs the
result against the container records and publishes per-machine command lists.
Readers always see one whole round: the published round is swapped in a
single assignment under the publish lock.
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Annotated, Any, Literal

from pydantic import AliasChoices, BaseModel, ConfigDict, Field, ValidationError

from wae.discovery import (
    AssignmentCommand,
    CommandAction,
    ContainerRecord,
    ContainerState,
    commands_by_machine,
    initial_records,
    realize,
    running_matrix,
)
from wae.domain import (
    M,
    AssignmentMatrix,
    FunctionType,
    MachineTelemetry,
    RequestVector,
    WaeError,
    validate_snapshot,
)
from wae.ippool import AddressPool
from wae.orchestration import DEFAULT_ITERATION_CAP, DEFAULT_THRESHOLD, orchestrate

logger = logging.getLogger(__name__)

WIRE_VERSION = 1
STATE_VERSION = 1


class MalformedPayload(WaeError):
    def __init__(self, field_path: str, message: str):
        self.field = field_path
        self.message = message
        super().__init__(f"{field_path}: {message}")


class UnknownMachine(WaeError):
    def __init__(self, machine: int):
        self.machine = machine
        super().__init__(f"unknown machine {machine}")


class IncompleteSnapshot(WaeError):
    def __init__(self, period_id: int | None, missing: list[int]):
        self.period_id = period_id
        self.missing = missing
        if period_id is None:
            super().__init__("no telemetry received yet")
        else:
            super().__init__(f"period {period_id} is missing telemetry from machine(s) {missing}")


class TelemetryPayload(BaseModel):
    """Wire format v1 of one Instance Manager report; short names follow the C, T, R symbols."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    version: Literal[1] = WIRE_VERSION
    period_id: int = Field(ge=0)
    machine: int = Field(ge=0)
    cpu_utilization: float = Field(ge=0.0, le=1.0, allow_inf_nan=False,
                                   validation_alias=AliasChoices("cpu_utilization", "c"))
    net_out_utilization: float = Field(ge=0.0, le=1.0, allow_inf_nan=False,
                                       validation_alias=AliasChoices("net_out_utilization", "t"))
    requests: list[Annotated[int, Field(ge=0)]] = Field(min_length=M, max_length=M,
                                                        validation_alias=AliasChoices("requests", "r"))

    def telemetry(self) -> MachineTelemetry:
        return MachineTelemetry(self.machine, self.cpu_utilization, self.net_out_utilization, self.period_id)


def parse_payload(data: Any) -> TelemetryPayload:
    if isinstance(data, TelemetryPayload):
        return data
    try:
        return TelemetryPayload.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise MalformedPayload(where, first["msg"]) from e


class RoundSummary(BaseModel):
    round_id: int
    period_id: int
    status: str
    iterations: int
    grows: int
    shrinks: int
    blocked: int
    commands: int
    result: list[list[int]]
    completed_at: float


@dataclass(frozen=True)
class PublishedRound:
    summary: RoundSummary | None = None
    commands: dict[int, tuple[dict, ...]] = field(default_factory=dict)


class WaeService:
    def __init__(self, n_machines: int, pool: AddressPool, assignment: AssignmentMatrix | None = None,
                 threshold: float = DEFAULT_THRESHOLD, iteration_cap: int = DEFAULT_ITERATION_CAP,
                 last_container_guard: bool = True):
        self.n_machines = n_machines
        self.pool = pool
        self.threshold = threshold
        self.iteration_cap = iteration_cap
        self.last_container_guard = last_container_guard

        self._ingest_lock = threading.Lock()
        self._tick_lock = threading.Lock()
        self._publish_lock = threading.Lock()

        self._telemetry: dict[int, dict[int, TelemetryPayload]] = {}
        self._closed_period: int | None = None
        self._round = PublishedRound()
        self.records: tuple[ContainerRecord, ...] = initial_records(n_machines)
        if assignment is not None:
            self.records, _ = realize(self.records, assignment, pool)

    # Data Collection

    def ingest(self, data: Any) -> dict:
        payload = parse_payload(data)
        if payload.machine >= self.n_machines:
            raise UnknownMachine(payload.machine)
        with self._ingest_lock:
            period = self._telemetry.setdefault(payload.period_id, {})
            replaced = payload.machine in period
            period[payload.machine] = payload
        logger.debug(f"telemetry period={payload.period_id} machine={payload.machine}"
                     f"{' (overwrote earlier report)' if replaced else ''}")
        return {"status": "accepted", "period_id": payload.period_id, "machine": payload.machine,
                "replaced": replaced}

    def latest_period(self) -> int | None:
        with self._ingest_lock:
            pending = [p for p in self._telemetry if self._closed_period is None or p > self._closed_period]
        return max(pending) if pending else None

    def snapshot(self, period_id: int):
        """Point-in-time snapshot of one period, validated against the current assignment."""
        with self._ingest_lock:
            reports = dict(self._telemetry.get(period_id, {}))
        missing = [n for n in range(self.n_machines) if n not in reports]
        if missing:
            raise IncompleteSnapshot(period_id, missing)
        requests = RequestVector.zeros(M)
        for payload in reports.values():
            requests = requests + RequestVector(tuple(payload.requests))
        telemetry = [reports[n].telemetry() for n in range(self.n_machines)]
        return validate_snapshot(telemetry, requests, running_matrix(self.records, self.n_machines))

    # Orchestration

    def orchestration_tick(self, now: float | None = None, period_id: int | None = None) -> RoundSummary:
        """
        Close one period: validate, orchestrate, diff and publish.

        Raises IncompleteSnapshot, leaving records, pool and the published
        round untouched, when any machine has not reported for the period.
        """
        with self._tick_lock:
            period_id = self.latest_period() if period_id is None else period_id
            if period_id is None:
                raise IncompleteSnapshot(None, list(range(self.n_machines)))
            snapshot = self.snapshot(period_id)
            outcome = orchestrate(snapshot, threshold=self.threshold, iteration_cap=self.iteration_cap,
                                  last_container_guard=self.last_container_guard)
            records, commands = realize(self.records, outcome.result, self.pool)

            summary = RoundSummary(
                round_id=(self._round.summary.round_id + 1) if self._round.summary else 1,
                period_id=period_id,
                status=outcome.status.value,
                iterations=outcome.iterations,
                grows=outcome.grows,
                shrinks=outcome.shrinks,
                blocked=len(outcome.blocked),
                commands=len(commands),
                result=outcome.result.to_lists(),
                completed_at=time.time() if now is None else now,
            )
            grouped = {n: tuple(c.to_wire() for c in cmds)
                       for n, cmds in commands_by_machine(commands, self.n_machines).items()}
            with self._publish_lock:
                self.records = records
                self._round = PublishedRound(summary=summary, commands=grouped)
            with self._ingest_lock:
                self._closed_period = period_id
                for p in [p for p in self._telemetry if p < period_id]:
                    del self._telemetry[p]

        logger.info(f"Round {summary.round_id} (period {period_id}): {summary.status}, "
                    f"+{summary.grows}/-{summary.shrinks} containers, {summary.commands} command(s)")
        return summary

    def safe_tick(self) -> RoundSummary | None:
        """Scheduler entry point: a skipped round is logged, never raised."""
        try:
            return self.orchestration_tick()
        except IncompleteSnapshot as e:
            logger.warning(f"Skipping orchestration round: {e}")
        except WaeError as e:
            logger.error(f"Orchestration round failed: {e}")
        return None

    # Service Discovery

    def fetch_assignments(self, machine: int) -> list[dict]:
        return self.assignments_for(machine)[1]

    def assignments_for(self, machine: int) -> tuple[RoundSummary | None, list[dict]]:
        """The published round's summary and this machine's commands, read from one round."""
        if not 0 <= machine < self.n_machines:
            raise UnknownMachine(machine)
        with self._publish_lock:
            published = self._round
        return published.summary, list(published.commands.get(machine, ()))

    def last_round(self) -> RoundSummary | None:
        with self._publish_lock:
            return self._round.summary

    def containers(self) -> list[dict]:
        with self._publish_lock:
            records = self.records
        return [{"machine": r.machine, "type": r.function_type.value, "state": r.state.value,
                 "address": r.address} for r in records]

    def health(self) -> dict:
        summary = self.last_round()
        with self._ingest_lock:
            buffered = sorted(self._telemetry)
        return {
            "status": "ok",
            "machines": self.n_machines,
            "buffered_periods": buffered,
            "pool": {"subnet": str(self.pool.subnet), "free": self.pool.available(),
                     "allocated": len(self.pool.allocated)},
            "last_round": summary.model_dump() if summary else None,
        }

    # State snapshot

    def to_state(self) -> dict:
        with self._publish_lock:
            published = self._round
            records = self.records
        return {
            "version": STATE_VERSION,
            "n_machines": self.n_machines,
            "records": [{"machine": r.machine, "type": r.function_type.value, "state": r.state.value,
                         "address": r.address} for r in records],
            "pool": self.pool.to_dict(),
            "round": published.summary.model_dump() if published.summary else None,
            "commands": {str(n): list(cmds) for n, cmds in published.commands.items()},
            "closed_period": self._closed_period,
        }

    def save_state(self, path: str) -> str:
        state = self.to_state()
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(state, f, indent=2)
        os.replace(tmp, path)
        logger.info(f"State snapshot written to {path}")
        return path

    @classmethod
    def from_state(cls, state: dict, **kwargs) -> "WaeService":
        if state.get("version") != STATE_VERSION:
            raise WaeError(f"unsupported state snapshot version {state.get('version')!r}")
        pool = AddressPool.from_dict(state["pool"])
        service = cls(int(state["n_machines"]), pool, **kwargs)
        service.records = tuple(
            ContainerRecord(machine=int(r["machine"]), function_type=FunctionType(r["type"]),
                            state=ContainerState(r["state"]), address=r.get("address"))
            for r in state["records"]
        )
        running = sum(1 for r in service.records if r.running)
        if running != len(pool.allocated):
            raise WaeError(f"state snapshot holds {running} running containers but "
                           f"{len(pool.allocated)} allocated addresses")
        if state.get("round"):
            commands = {int(n): tuple(cmds) for n, cmds in state.get("commands", {}).items()}
            service._round = PublishedRound(summary=RoundSummary.model_validate(state["round"]), commands=commands)
        service._closed_period = state.get("closed_period")
        return service

    @classmethod
    def load_state(cls, path: str, **kwargs) -> "WaeService":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_state(json.load(f), **kwargs)


def command_from_wire(data: dict) -> AssignmentCommand:
    return AssignmentCommand(machine=int(data["machine"]), function_type=FunctionType(data["type"]),
                             action=CommandAction(data["action"]), address=data.get("address"))
