"""
Config and snapshot loading.

Scenario configs and snapshot files are JSON. Both are parsed into pydantic
models; any validation failure becomes a ConfigError listing one
`path.to.field: message` line per problem.
"""
import json
import logging
import os
from typing import Literal, Optional

from pydantic import AliasChoices, BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from wae.domain import (
    EDGE_TYPES,
    AssignmentMatrix,
    DimensionMismatch,
    FunctionType,
    M,
    MachineTelemetry,
    RequestVector,
    Topology,
    ValidatedSnapshot,
    WaeError,
    validate_snapshot,
)

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_SCENARIO_PATH = os.path.join(PROJECT_ROOT, "EVALUATION_SCENARIO.json")
# names accepted in place of a path for the bundled scenario
BUNDLED_SCENARIOS = {"paper-scenario": DEFAULT_SCENARIO_PATH, "evaluation": DEFAULT_SCENARIO_PATH}

logger = logging.getLogger(__name__)


class ConfigError(WaeError):
    """Raised when a config or snapshot file cannot be read or fails validation."""

    def __init__(self, message: str, path: str | None = None, errors: list[str] | None = None):
        self.path = path
        self.errors = errors or []
        head = f"{path}: {message}" if path else message
        super().__init__("\n  ".join([head, *self.errors]))


def format_validation_error(error: ValidationError) -> list[str]:
    lines = []
    for item in error.errors():
        where = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{where}: {item['msg']}")
    return lines


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class MachinesConfig(_Model):
    count: int = Field(3, ge=1)
    cpu_capacity: float = Field(1000.0, gt=0, description="abstract service units per second")
    link_capacity: float = Field(1.25e8, gt=0, description="bytes per second")


class PoolConfig(_Model):
    subnet: str = "203.0.113.0/24"
    gateway: Optional[str] = "203.0.113.1"


class WorkloadPhaseConfig(_Model):
    type: FunctionType
    total_users: int = Field(ge=0)
    ramp_up: float = Field(0.0, ge=0)
    requests_per_user_per_second: float = Field(gt=0)
    mean_response_size: float = Field(gt=0, description="bytes")
    start: float = Field(0.0, ge=0)
    duration: Optional[float] = Field(None, gt=0, description="seconds; null runs to the end of the scenario")
    schedule: Optional[list[float]] = Field(None, description="per-period user multipliers, cycled")

    @field_validator("type")
    @classmethod
    def _edge_only(cls, value: FunctionType) -> FunctionType:
        if not value.orchestrated:
            raise ValueError(f"{value.value} is not an edge type; workloads target one of "
                             f"{', '.join(t.value for t in EDGE_TYPES)}")
        return value

    @field_validator("schedule")
    @classmethod
    def _nonnegative_schedule(cls, value):
        if value is not None:
            if not value:
                raise ValueError("schedule must not be empty")
            if any(x < 0 for x in value):
                raise ValueError("schedule multipliers must be >= 0")
        return value

    @model_validator(mode="after")
    def _ramp_within_duration(self):
        if self.duration is not None and self.ramp_up > self.duration:
            raise ValueError(f"ramp_up ({self.ramp_up}) exceeds duration ({self.duration})")
        return self


def _default_demands() -> dict[FunctionType, float]:
    return {
        FunctionType.SMALL_EDGE: 0.3,
        FunctionType.LARGE_EDGE: 1.0,
        FunctionType.VOD_EDGE: 1.0,
        FunctionType.LIVE_EDGE: 1.0,
    }


class LatencyConfig(_Model):
    service_demand: dict[FunctionType, float] = Field(default_factory=_default_demands,
                                                      description="CPU service units per request")
    queue_cap: int = Field(200, ge=1, description="requests in system per container before drops")
    lb_service_demand: float = Field(0.02, ge=0, description="load balancer CPU units per request")

    @field_validator("service_demand")
    @classmethod
    def _positive_demands(cls, value: dict[FunctionType, float]):
        merged = {**_default_demands(), **value}
        for function_type, demand in merged.items():
            if not function_type.orchestrated:
                raise ValueError(f"{function_type.value} is not an edge type")
            if demand <= 0:
                raise ValueError(f"{function_type.value}: service demand must be > 0")
        return merged


class OverheadConfig(_Model):
    host_baseline: float = Field(130.0, ge=0, description="role VNFs per host, service units per second")
    per_container: float = Field(30.0, ge=0, description="per running edge container, service units per second")


class OrchestrationConfig(_Model):
    threshold: float = Field(0.1, gt=0, lt=1)
    period_seconds: float = Field(60.0, gt=0, description="simulated seconds between re-orchestrations")
    real_period_seconds: float = Field(600.0, gt=0, description="real period the simulated one stands for")
    iteration_cap: int = Field(64, ge=1)
    last_container_guard: bool = True


class CostConfig(_Model):
    unit_machine_cost: float = Field(1.0, ge=0)
    traditional_roles: list[FunctionType] = Field(default_factory=lambda: list(FunctionType))
    traditional_extra_machines: int = Field(2, ge=0, description="origin and replica machines of the traditional PoP")


class ServiceConfig(_Model):
    host: str = "0.0.0.0"
    port: int = Field(8000, ge=0, le=65535)
    period_seconds: float = Field(600.0, gt=0)
    snapshot_path: Optional[str] = ".wae/state.json"


class ScenarioConfig(_Model):
    version: Literal[1] = 1
    name: str = "scenario"
    seed: int = 42
    periods: int = Field(5, ge=1)
    machines: MachinesConfig = Field(default_factory=MachinesConfig)
    pool: PoolConfig = Field(default_factory=PoolConfig)
    phases: list[WorkloadPhaseConfig] = Field(default_factory=list)
    latency: LatencyConfig = Field(default_factory=LatencyConfig)
    overhead: OverheadConfig = Field(default_factory=OverheadConfig)
    orchestration: OrchestrationConfig = Field(default_factory=OrchestrationConfig)
    cost: CostConfig = Field(default_factory=CostConfig)
    topologies: list[Topology] = Field(default_factory=lambda: list(Topology))
    initial_assignment: Optional[list[list[int]]] = None
    service: ServiceConfig = Field(default_factory=ServiceConfig)

    @model_validator(mode="after")
    def _check_initial_assignment(self):
        a = self.initial_assignment
        if a is None:
            return self
        if len(a) != self.machines.count:
            raise ValueError(f"initial_assignment has {len(a)} rows, machines.count is {self.machines.count}")
        for n, row in enumerate(a):
            if len(row) != M:
                raise ValueError(f"initial_assignment row {n} has {len(row)} columns, expected {M}")
            if any(v not in (0, 1) for v in row):
                raise ValueError(f"initial_assignment row {n} is not binary")
        return self

    @property
    def horizon(self) -> float:
        return self.periods * self.orchestration.period_seconds

    @property
    def time_compression(self) -> float:
        return self.orchestration.real_period_seconds / self.orchestration.period_seconds

    def start_assignment(self) -> AssignmentMatrix:
        if self.initial_assignment is not None:
            return AssignmentMatrix(self.initial_assignment)
        return AssignmentMatrix.round_robin(self.machines.count, M)


class MachineSample(_Model):
    machine: int = Field(ge=0)
    cpu_utilization: float = Field(validation_alias=AliasChoices("c", "cpu_utilization"))
    net_out_utilization: float = Field(validation_alias=AliasChoices("t", "net_out_utilization"))


class SnapshotFile(_Model):
    """One period's C, T, R and A, as read by the orchestrate and oracle commands."""

    version: Literal[1] = 1
    period_id: int = 0
    machines: list[MachineSample]
    requests: list[int] = Field(validation_alias=AliasChoices("r", "requests"))
    assignment: list[list[int]] = Field(validation_alias=AliasChoices("A", "assignment"))
    threshold: Optional[float] = Field(None, gt=0, lt=1)
    # orchestrate and oracle write their result here, so their output reads back as a snapshot
    outcome: Optional[dict] = None

    def to_snapshot(self) -> ValidatedSnapshot:
        widths = {len(row) for row in self.assignment}
        if len(widths) > 1:
            raise DimensionMismatch("assignment matrix row length", "equal rows", sorted(widths))
        assignment = AssignmentMatrix(self.assignment) if self.assignment else AssignmentMatrix.zeros(0)
        telemetry = [
            MachineTelemetry(s.machine, s.cpu_utilization, s.net_out_utilization, self.period_id)
            for s in self.machines
        ]
        return validate_snapshot(telemetry, RequestVector(tuple(self.requests)), assignment)

    @classmethod
    def from_snapshot(cls, snapshot: ValidatedSnapshot) -> "SnapshotFile":
        return cls(
            period_id=snapshot.period_id,
            machines=[MachineSample(machine=t.machine, cpu_utilization=t.cpu_utilization,
                                    net_out_utilization=t.net_out_utilization) for t in snapshot.telemetry],
            requests=list(snapshot.requests.counts),
            assignment=snapshot.assignment.to_lists(),
        )


def load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise ConfigError("file not found", path=path) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}", path=path) from e
    except OSError as e:
        raise ConfigError(f"cannot read file: {e.strerror}", path=path) from e


def _env_overrides(config: ScenarioConfig) -> ScenarioConfig:
    service = config.service.model_copy()
    try:
        if os.getenv("WAE_HOST"):
            service.host = os.environ["WAE_HOST"]
        if os.getenv("WAE_PORT"):
            service.port = int(os.environ["WAE_PORT"])
        if os.getenv("WAE_PERIOD_SECONDS"):
            service.period_seconds = float(os.environ["WAE_PERIOD_SECONDS"])
    except ValueError as e:
        raise ConfigError(f"bad environment override: {e}") from e
    if os.getenv("WAE_SNAPSHOT_PATH"):
        service.snapshot_path = os.environ["WAE_SNAPSHOT_PATH"]
    return config.model_copy(update={"service": service})


def parse_scenario(data: dict, path: str | None = None) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError("invalid scenario config", path=path, errors=format_validation_error(e)) from e


def load_scenario(path: str | None = None, env: bool = True) -> ScenarioConfig:
    """
    Load a scenario file; without a path, WAE_CONFIG or the bundled evaluation
    scenario is used. `paper-scenario` and `evaluation` name the bundled file.
    """
    path = path or os.getenv("WAE_CONFIG") or DEFAULT_SCENARIO_PATH
    path = BUNDLED_SCENARIOS.get(path, path)
    logger.debug(f"Loading scenario config from {path}")
    config = parse_scenario(load_json(path), path=path)
    return _env_overrides(config) if env else config


def load_snapshot(path: str) -> SnapshotFile:
    data = load_json(path)
    try:
        return SnapshotFile.model_validate(data)
    except ValidationError as e:
        raise ConfigError("invalid snapshot file", path=path, errors=format_validation_error(e)) from e


def apply_overrides(config: ScenarioConfig, seed: int | None = None, threshold: float | None = None,
                    period_seconds: float | None = None, topologies: list[Topology] | None = None) -> ScenarioConfig:
    """Command-line overrides, re-validated like the file itself."""
    data = config.model_dump()
    if seed is not None:
        data["seed"] = seed
    if threshold is not None:
        data["orchestration"]["threshold"] = threshold
    if period_seconds is not None:
        data["orchestration"]["period_seconds"] = period_seconds
    if topologies:
        data["topologies"] = list(topologies)
    return parse_scenario(data, path="<command line>")
