"""
Service Discovery Module.

Every machine carries one container of every edge type, either running (with a
public address) or paused (without one). diff() turns a desired assignment
matrix into the shortest list of Start/Pause commands; apply() replays them.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

import numpy as np

from wae.domain import EDGE_TYPES, AssignmentMatrix, DimensionMismatch, FunctionType, M, WaeError
from wae.ippool import AddressPool

logger = logging.getLogger(__name__)

ContainerKey = tuple[int, str]


class ContainerState(str, Enum):
    RUNNING = "running"
    PAUSED = "paused"


class CommandAction(str, Enum):
    START = "start"
    PAUSE = "pause"


class IllegalTransition(WaeError):
    def __init__(self, machine: int, function_type: FunctionType, action: CommandAction, state: ContainerState | None):
        self.machine = machine
        self.function_type = function_type
        self.action = action
        self.state = state
        where = f"{function_type.value} on machine {machine}"
        super().__init__(f"cannot {action.value} {where}: container is {state.value if state else 'unknown'}")


class IncompleteRecords(WaeError):
    def __init__(self, missing: list[ContainerKey]):
        self.missing = missing
        super().__init__(f"no container record for {', '.join(f'{m}/{t}' for m, t in missing[:5])}"
                         + (" ..." if len(missing) > 5 else ""))


@dataclass(frozen=True)
class ContainerRecord:
    machine: int
    function_type: FunctionType
    state: ContainerState = ContainerState.PAUSED
    address: str | None = None

    def __post_init__(self):
        if (self.state is ContainerState.RUNNING) != (self.address is not None):
            raise WaeError(f"{self.function_type.value} on machine {self.machine}: "
                           f"a {self.state.value} container must{'' if self.address is None else ' not'} hold an address")

    @property
    def key(self) -> ContainerKey:
        return self.machine, self.function_type.value

    @property
    def running(self) -> bool:
        return self.state is ContainerState.RUNNING


@dataclass(frozen=True)
class AssignmentCommand:
    machine: int
    function_type: FunctionType
    action: CommandAction
    address: str | None = None

    @property
    def key(self) -> ContainerKey:
        return self.machine, self.function_type.value

    def to_wire(self) -> dict:
        return {
            "machine": self.machine,
            "type": self.function_type.value,
            "action": self.action.value,
            "address": self.address,
        }


def _index(records: Iterable[ContainerRecord]) -> dict[ContainerKey, ContainerRecord]:
    indexed: dict[ContainerKey, ContainerRecord] = {}
    for record in records:
        if record.key in indexed:
            raise WaeError(f"duplicate container record for {record.machine}/{record.function_type.value}")
        indexed[record.key] = record
    return indexed


def _ordered(indexed: dict[ContainerKey, ContainerRecord]) -> tuple[ContainerRecord, ...]:
    return tuple(sorted(indexed.values(), key=lambda r: (r.machine, r.function_type.index)))


def initial_records(n_machines: int, n_types: int = M) -> tuple[ContainerRecord, ...]:
    """One paused container of each type on every machine."""
    return tuple(
        ContainerRecord(machine=n, function_type=EDGE_TYPES[m])
        for n in range(n_machines)
        for m in range(n_types)
    )


def running_matrix(records: Iterable[ContainerRecord], n_machines: int, n_types: int = M) -> AssignmentMatrix:
    entries = np.zeros((n_machines, n_types), dtype=np.int8)
    for record in records:
        if not 0 <= record.machine < n_machines:
            raise DimensionMismatch("container record machine", f"< {n_machines}", record.machine)
        if record.running:
            entries[record.machine, record.function_type.index] = 1
    return AssignmentMatrix(entries)


def diff(current: Iterable[ContainerRecord], desired: AssignmentMatrix,
         pool: AddressPool) -> list[AssignmentCommand]:
    """
    Minimal commands taking `current` to `desired`: every Pause first, then
    every Start, each group ordered by (machine, type).

    The pool is only read. Start addresses are the ones allocate() will hand
    out once the paused containers' addresses are back in the pool, so
    apply() reproduces them exactly.
    """
    indexed = _index(current)
    n_machines, n_types = desired.shape
    missing = [(n, EDGE_TYPES[m].value) for n in range(n_machines) for m in range(n_types)
               if (n, EDGE_TYPES[m].value) not in indexed]
    if missing:
        raise IncompleteRecords(missing)

    pauses: list[AssignmentCommand] = []
    starts: list[tuple[int, FunctionType]] = []
    for n in range(n_machines):
        for m in range(n_types):
            function_type = EDGE_TYPES[m]
            record = indexed[(n, function_type.value)]
            want = desired[n, m] == 1
            if record.running and not want:
                pauses.append(AssignmentCommand(n, function_type, CommandAction.PAUSE, record.address))
            elif want and not record.running:
                starts.append((n, function_type))

    addresses = pool.lowest_free(len(starts), also_free=[c.address for c in pauses]) if starts else []
    commands = pauses + [
        AssignmentCommand(n, function_type, CommandAction.START, address)
        for (n, function_type), address in zip(starts, addresses)
    ]
    if commands:
        logger.debug(f"diff: {len(pauses)} pause, {len(starts)} start")
    return commands


def apply(current: Iterable[ContainerRecord], commands: Iterable[AssignmentCommand],
          pool: AddressPool | None = None) -> tuple[ContainerRecord, ...]:
    """
    Replay commands in order. With a pool, a Pause releases the container's
    address and a Start claims the address its command carries.
    """
    indexed = _index(current)
    for command in commands:
        record = indexed.get(command.key)
        state = record.state if record else None
        if command.action is CommandAction.START:
            if record is None or record.running or command.address is None:
                raise IllegalTransition(command.machine, command.function_type, command.action, state)
            if pool is not None:
                pool.claim(command.address, command.key)
            indexed[command.key] = replace(record, state=ContainerState.RUNNING, address=command.address)
        else:
            if record is None or not record.running:
                raise IllegalTransition(command.machine, command.function_type, command.action, state)
            if pool is not None:
                pool.release(record.address)
            indexed[command.key] = replace(record, state=ContainerState.PAUSED, address=None)
    return _ordered(indexed)


def realize(current: Iterable[ContainerRecord], desired: AssignmentMatrix,
            pool: AddressPool) -> tuple[tuple[ContainerRecord, ...], list[AssignmentCommand]]:
    """diff + apply in one step; the pool is left untouched if diff fails."""
    current = tuple(current)
    commands = diff(current, desired, pool)
    return apply(current, commands, pool), commands


def commands_by_machine(commands: Iterable[AssignmentCommand], n_machines: int) -> dict[int, list[AssignmentCommand]]:
    grouped: dict[int, list[AssignmentCommand]] = {n: [] for n in range(n_machines)}
    for command in commands:
        grouped[command.machine].append(command)
    return grouped
