"""
Core value types shared by every WAE module.

Vectors and matrices are indexed by the canonical edge order in EDGE_TYPES;
machine ids are dense integers 0..N-1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NewType, Sequence

import numpy as np


class WaeError(Exception):
    """Base class for every error raised by the engine."""


class DimensionMismatch(WaeError):
    def __init__(self, what: str, expected, actual):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class DuplicateMachine(WaeError):
    def __init__(self, machine: int):
        self.machine = machine
        super().__init__(f"machine {machine} reported more than once")


class MissingMachine(WaeError):
    def __init__(self, machine: int):
        self.machine = machine
        super().__init__(f"no telemetry for machine {machine}")


class OutOfRangeUtilization(WaeError):
    def __init__(self, machine: int, field_name: str, value: float):
        self.machine = machine
        self.field = field_name
        self.value = value
        super().__init__(f"machine {machine}: {field_name}={value} is outside [0, 1]")


class NegativeRequestCount(WaeError):
    def __init__(self, index: int, value: int):
        self.index = index
        self.value = value
        super().__init__(f"request count at index {index} is negative ({value})")


class InvalidAssignment(WaeError):
    def __init__(self, machine: int, column: int, value):
        self.machine = machine
        self.column = column
        self.value = value
        super().__init__(f"assignment[{machine}][{column}]={value} is not 0 or 1")


class FunctionType(str, Enum):
    """CDN roles. Only the four edge types are orchestrated; the rest feed the cost model."""

    SMALL_EDGE = "small_edge"
    LARGE_EDGE = "large_edge"
    VOD_EDGE = "vod_edge"
    LIVE_EDGE = "live_edge"
    LOAD_BALANCER = "load_balancer"
    DNS = "dns"
    MID_CACHE = "mid_cache"

    @property
    def orchestrated(self) -> bool:
        return self in EDGE_TYPES

    @property
    def index(self) -> int:
        if not self.orchestrated:
            raise ValueError(f"{self.value} is not an orchestrated edge type")
        return EDGE_TYPES.index(self)

    @classmethod
    def from_index(cls, index: int) -> "FunctionType":
        return EDGE_TYPES[index]


EDGE_TYPES: tuple[FunctionType, ...] = (
    FunctionType.SMALL_EDGE,
    FunctionType.LARGE_EDGE,
    FunctionType.VOD_EDGE,
    FunctionType.LIVE_EDGE,
)
ROLE_TYPES: tuple[FunctionType, ...] = (
    FunctionType.LOAD_BALANCER,
    FunctionType.DNS,
    FunctionType.MID_CACHE,
)
M = len(EDGE_TYPES)

MachineId = NewType("MachineId", int)


class Topology(str, Enum):
    BARE_METAL = "BareMetal"
    STATIC_CONTAINERS = "StaticContainers"
    ORCHESTRATED = "Orchestrated"

    @property
    def containerized(self) -> bool:
        return self is not Topology.BARE_METAL


@dataclass(frozen=True)
class MachineTelemetry:
    machine: int
    cpu_utilization: float
    net_out_utilization: float
    period_id: int = 0


@dataclass(frozen=True)
class RequestVector:
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))

    @classmethod
    def zeros(cls, size: int = M) -> "RequestVector":
        return cls((0,) * size)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float)

    def __add__(self, other: "RequestVector") -> "RequestVector":
        if len(other.counts) != len(self.counts):
            raise DimensionMismatch("request vector length", len(self.counts), len(other.counts))
        return RequestVector(tuple(a + b for a, b in zip(self.counts, other.counts)))


class AssignmentMatrix:
    """Immutable binary N x M matrix; entries[n][m] == 1 iff machine n runs type m."""

    __slots__ = ("_entries",)

    def __init__(self, entries):
        arr = np.array(entries, dtype=float, copy=True)
        if arr.ndim != 2:
            raise DimensionMismatch("assignment matrix rank", 2, arr.ndim)
        bad = np.argwhere((arr != 0) & (arr != 1))
        if len(bad):
            n, m = (int(i) for i in bad[0])
            raise InvalidAssignment(n, m, arr[n, m])
        self._entries = arr.astype(np.int8)
        self._entries.flags.writeable = False

    @classmethod
    def zeros(cls, n_machines: int, n_types: int = M) -> "AssignmentMatrix":
        return cls(np.zeros((n_machines, n_types), dtype=np.int8))

    @classmethod
    def round_robin(cls, n_machines: int, n_types: int = M) -> "AssignmentMatrix":
        """Cold start: one container per type, type m on machine m mod N."""
        entries = np.zeros((n_machines, n_types), dtype=np.int8)
        for m in range(n_types):
            entries[m % n_machines, m] = 1
        return cls(entries)

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def shape(self) -> tuple[int, int]:
        return self._entries.shape

    @property
    def n_machines(self) -> int:
        return self._entries.shape[0]

    @property
    def n_types(self) -> int:
        return self._entries.shape[1]

    def __getitem__(self, key):
        return int(self._entries[key])

    def column(self, m: int) -> np.ndarray:
        return self._entries[:, m]

    def column_sums(self) -> np.ndarray:
        return self._entries.sum(axis=0).astype(int)

    def container_count(self) -> int:
        return int(self._entries.sum())

    def containers_on(self, machine: int) -> int:
        return int(self._entries[machine].sum())

    def with_cell(self, machine: int, m: int, value: int) -> "AssignmentMatrix":
        entries = self._entries.copy()
        entries[machine, m] = value
        return AssignmentMatrix(entries)

    def hamming(self, other: "AssignmentMatrix") -> int:
        if other.shape != self.shape:
            raise DimensionMismatch("assignment matrix shape", self.shape, other.shape)
        return int(np.count_nonzero(self._entries != other._entries))

    def to_lists(self) -> list[list[int]]:
        return self._entries.astype(int).tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, AssignmentMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._entries, other._entries))

    __hash__ = None

    def __repr__(self) -> str:
        return f"AssignmentMatrix({self.to_lists()})"


@dataclass(frozen=True)
class NormalizedDistribution:
    """Nonnegative weights summing to 1; `empty` marks the all-zero stand-in for a zero-sum input."""

    weights: tuple[float, ...]
    empty: bool = False

    @classmethod
    def empty_of(cls, size: int) -> "NormalizedDistribution":
        return cls((0.0,) * size, empty=True)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, i: int) -> float:
        return self.weights[i]


@dataclass(frozen=True)
class ValidatedSnapshot:
    telemetry: tuple[MachineTelemetry, ...]
    requests: RequestVector
    assignment: AssignmentMatrix = field(compare=False)

    @property
    def n_machines(self) -> int:
        return len(self.telemetry)

    @property
    def period_id(self) -> int:
        return self.telemetry[0].period_id if self.telemetry else 0

    @property
    def cpu(self) -> np.ndarray:
        return np.array([t.cpu_utilization for t in self.telemetry], dtype=float)

    @property
    def net(self) -> np.ndarray:
        return np.array([t.net_out_utilization for t in self.telemetry], dtype=float)


def _in_unit_interval(value: float) -> bool:
    return not math.isnan(value) and 0.0 <= value <= 1.0


def validate_snapshot(
        telemetry: Iterable[MachineTelemetry],
        requests: RequestVector,
        assignment: AssignmentMatrix,
        n_types: int = M,
) -> ValidatedSnapshot:
    """
    Check one period's inputs and return them as a ValidatedSnapshot.

    The machine count N is taken from the assignment matrix; telemetry must
    name each of 0..N-1 exactly once.
    """
    telemetry = list(telemetry)

    if len(requests.counts) != n_types:
        raise DimensionMismatch("request vector length", n_types, len(requests.counts))
    for m, count in enumerate(requests.counts):
        if count < 0:
            raise NegativeRequestCount(m, count)

    rows, cols = assignment.shape
    if cols != n_types:
        raise DimensionMismatch("assignment matrix columns", n_types, cols)
    if rows < 1:
        raise DimensionMismatch("assignment matrix rows", ">= 1", rows)

    seen: set[int] = set()
    for t in telemetry:
        if t.machine in seen:
            raise DuplicateMachine(t.machine)
        seen.add(t.machine)

    outside = sorted(machine for machine in seen if not 0 <= machine < rows)
    if outside:
        raise DimensionMismatch("assignment matrix rows", f"> {outside[-1]}", rows)
    for machine in range(rows):
        if machine not in seen:
            raise MissingMachine(machine)

    for t in telemetry:
        if not _in_unit_interval(t.cpu_utilization):
            raise OutOfRangeUtilization(t.machine, "cpu_utilization", t.cpu_utilization)
        if not _in_unit_interval(t.net_out_utilization):
            raise OutOfRangeUtilization(t.machine, "net_out_utilization", t.net_out_utilization)

    ordered = tuple(sorted(telemetry, key=lambda t: t.machine))
    return ValidatedSnapshot(telemetry=ordered, requests=requests, assignment=assignment)


def telemetry_from_vectors(cpu: Sequence[float], net: Sequence[float], period_id: int = 0) -> list[MachineTelemetry]:
    if len(cpu) != len(net):
        raise DimensionMismatch("telemetry vector length", len(cpu), len(net))
    return [
        MachineTelemetry(machine=n, cpu_utilization=float(c), net_out_utilization=float(t), period_id=period_id)
        for n, (c, t) in enumerate(zip(cpu, net))
    ]
