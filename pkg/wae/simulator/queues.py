"""
Per-container single-server FIFO queues.

Requests are dispatched in arrival order, so each queue's start and completion
times follow from the Lindley recursion: a request starts at
max(arrival, previous completion). A queue keeps the completion times of the
requests still in system; those are handed out as completions when the clock
passes them (step_queues).
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable

from wae.domain import AssignmentMatrix


@dataclass(frozen=True, order=True)
class Completion:
    time: float
    arrival: float
    type_index: int
    machine: int

    @property
    def latency(self) -> float:
        return self.time - self.arrival


class ContainerQueue:
    """One single-server FIFO queue. `terminal` queues report their completions as served."""

    __slots__ = ("key", "machine", "type_index", "terminal", "in_system", "free_at")

    def __init__(self, key: Hashable, machine: int, type_index: int, terminal: bool = True):
        self.key = key
        self.machine = machine
        self.type_index = type_index
        self.terminal = terminal
        self.in_system: deque[tuple[float, float, int]] = deque()
        self.free_at = 0.0

    def settle(self, now: float, sink: list | None) -> None:
        """Retire every request completed by `now`, pushing terminal ones onto the sink heap."""
        in_system = self.in_system
        while in_system and in_system[0][0] <= now:
            done, arrival, type_index = in_system.popleft()
            if self.terminal and sink is not None:
                heapq.heappush(sink, Completion(done, arrival, type_index, self.machine))

    def offer(self, now: float, service_time: float, origin: float, type_index: int,
              cap: int, sink: list | None) -> float | None:
        """
        Queue a request arriving at `now`. Returns its completion time, or None
        when `cap` requests are already in system and it is dropped. `origin`
        is when the request entered the PoP.
        """
        self.settle(now, sink)
        if len(self.in_system) >= cap:
            return None
        start = now if now > self.free_at else self.free_at
        done = start + service_time
        self.free_at = done
        self.in_system.append((done, origin, type_index))
        return done

    def __len__(self) -> int:
        return len(self.in_system)


@dataclass
class QueueState:
    queue_cap: int
    n_types: int
    clock: float = 0.0
    queues: dict[Hashable, ContainerQueue] = field(default_factory=dict)
    cursors: list[int] = field(default_factory=list)
    sink: list[Completion] = field(default_factory=list)

    def __post_init__(self):
        if not self.cursors:
            self.cursors = [0] * self.n_types

    def queue(self, machine: int, type_index: int) -> ContainerQueue:
        key = (machine, type_index)
        q = self.queues.get(key)
        if q is None:
            q = self.queues[key] = ContainerQueue(key, machine, type_index)
        return q

    def stage(self, name: str, machine: int) -> ContainerQueue:
        """A non-terminal FIFO stage in front of the edge queues (the bare-metal load balancer)."""
        q = self.queues.get(name)
        if q is None:
            q = self.queues[name] = ContainerQueue(name, machine, -1, terminal=False)
        return q

    def in_flight(self) -> int:
        return sum(len(q) for q in self.queues.values() if q.terminal) + len(self.sink)

    def in_flight_at_stages(self) -> int:
        """Requests still inside a non-terminal stage; they will reach an edge queue later."""
        return sum(len(q) for q in self.queues.values() if not q.terminal)


class RoundRobinRouter:
    """Per-type round robin over the machines running that type."""

    def __init__(self, state: QueueState):
        self.state = state
        self.hosts: list[list[int]] = [[] for _ in range(state.n_types)]

    def update(self, assignment: AssignmentMatrix) -> None:
        self.hosts = [
            [int(n) for n in range(assignment.n_machines) if assignment[n, m] == 1]
            for m in range(assignment.n_types)
        ]

    def route(self, type_index: int) -> int | None:
        hosts = self.hosts[type_index]
        if not hosts:
            return None
        cursor = self.state.cursors[type_index]
        self.state.cursors[type_index] = cursor + 1
        return hosts[cursor % len(hosts)]


def route(type_index: int, assignment: AssignmentMatrix, state: QueueState) -> int | None:
    """Machine whose container of `type_index` gets the next request; None means drop."""
    router = RoundRobinRouter(state)
    router.update(assignment)
    return router.route(type_index)


def service_time(size: float, cpu_work: float, response_bytes: float, sharing: int,
                 cpu_capacity: float, link_capacity: float) -> float:
    """
    X * k * max(d / C, b / L): the container owns 1/k of its machine's CPU and
    link, and the scarcer of the two sets its rate.
    """
    return size * sharing * max(cpu_work / cpu_capacity, response_bytes / link_capacity)


def step_queues(state: QueueState, dt: float) -> list[Completion]:
    """Advance the clock by dt and return the requests that completed in that window, in order."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    now = state.clock + dt
    for q in state.queues.values():
        q.settle(now, state.sink)
    completed = []
    while state.sink and state.sink[0].time <= now:
        completed.append(heapq.heappop(state.sink))
    state.clock = now
    return completed
