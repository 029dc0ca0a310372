"""
CDN-specialized container orchestration.

Grows and shrinks edge containers until, for every edge type, the share of
host load placed on that type (D^N) sits within `threshold` of the share of
client requests for it (R^N).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from wae.domain import AssignmentMatrix, FunctionType, M, ValidatedSnapshot, WaeError
from wae.normalization import combined_load, normalize, normalize_or_empty

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.1
DEFAULT_ITERATION_CAP = 64
BAND_TOLERANCE = 1e-9


class InvalidThreshold(WaeError):
    def __init__(self, threshold: float):
        self.threshold = threshold
        super().__init__(f"threshold must lie in (0, 1), got {threshold}")


class Infeasible(WaeError):
    """A Grow or Shrink step the band check called for could not be taken."""


class NoEligibleMachine(Infeasible):
    def __init__(self, type_index: int):
        self.type_index = type_index
        super().__init__(f"every machine already hosts type {type_index}")


class LastContainerGuard(Infeasible):
    def __init__(self, type_index: int, machine: int):
        self.type_index = type_index
        self.machine = machine
        super().__init__(f"refusing to drop the last container of demanded type {type_index} (machine {machine})")


class NoHostingMachine(WaeError):
    def __init__(self, type_index: int):
        self.type_index = type_index
        super().__init__(f"no machine hosts type {type_index}")


class OrchestrationStatus(str, Enum):
    CONVERGED = "converged"
    ITERATION_CAP_REACHED = "iteration_cap_reached"
    NO_DEMAND = "no_demand"


class StepAction(str, Enum):
    GROW = "grow"
    SHRINK = "shrink"


class StepOutcome(str, Enum):
    APPLIED = "applied"
    NO_ELIGIBLE_MACHINE = "no_eligible_machine"
    LAST_CONTAINER_GUARD = "last_container_guard"


@dataclass(frozen=True)
class TraceStep:
    iteration: int
    type_index: int
    action: StepAction
    machine: int | None
    outcome: StepOutcome = StepOutcome.APPLIED
    # True when this step undoes the previous applied step on the same cell
    oscillation: bool = False

    @property
    def applied(self) -> bool:
        return self.outcome is StepOutcome.APPLIED

    @property
    def function_type(self) -> FunctionType:
        return FunctionType.from_index(self.type_index)


@dataclass(frozen=True)
class OrchestrationOutcome:
    result: AssignmentMatrix
    status: OrchestrationStatus
    iterations: int
    trace: tuple[TraceStep, ...] = ()
    initial: AssignmentMatrix | None = field(default=None, compare=False)
    requests_normalized: tuple[float, ...] = ()
    placement_normalized: tuple[float, ...] = ()

    @property
    def grows(self) -> int:
        return sum(1 for s in self.trace if s.applied and s.action is StepAction.GROW)

    @property
    def shrinks(self) -> int:
        return sum(1 for s in self.trace if s.applied and s.action is StepAction.SHRINK)

    @property
    def blocked(self) -> tuple[TraceStep, ...]:
        return tuple(s for s in self.trace if not s.applied)

    @property
    def oscillations(self) -> int:
        return sum(1 for s in self.trace if s.oscillation)

    @property
    def max_gap(self) -> float:
        if not self.requests_normalized or not self.placement_normalized:
            return 0.0
        r = np.asarray(self.requests_normalized)
        d = np.asarray(self.placement_normalized)
        return float(np.max(np.abs(r - d)))


def _type_index(function_type: FunctionType | int) -> int:
    return function_type.index if isinstance(function_type, FunctionType) else int(function_type)


def _entries(a: AssignmentMatrix | np.ndarray) -> np.ndarray:
    return a.entries if isinstance(a, AssignmentMatrix) else np.asarray(a)


def find_min_loaded_machine(a: AssignmentMatrix | np.ndarray, v_sum: Sequence[float],
                            function_type: FunctionType | int) -> int:
    """Least-loaded machine that does not host the type yet; ties go to the lowest index."""
    m = _type_index(function_type)
    candidates = np.flatnonzero(_entries(a)[:, m] == 0)
    if len(candidates) == 0:
        raise NoEligibleMachine(m)
    loads = np.asarray(v_sum, dtype=float)[candidates]
    return int(candidates[np.argmin(loads)])


def find_max_loaded_machine(a: AssignmentMatrix | np.ndarray, v_sum: Sequence[float],
                            function_type: FunctionType | int, demanded: bool = False,
                            guard: bool = True) -> int:
    """
    Most-loaded machine hosting the type; ties go to the lowest index.

    With `guard` on, the last container of a `demanded` type is never offered
    for removal.
    """
    m = _type_index(function_type)
    column = _entries(a)[:, m]
    hosts = np.flatnonzero(column == 1)
    if len(hosts) == 0:
        raise NoHostingMachine(m)
    loads = np.asarray(v_sum, dtype=float)[hosts]
    machine = int(hosts[np.argmax(loads)])
    if guard and demanded and len(hosts) == 1:
        raise LastContainerGuard(m, machine)
    return machine


def run_algorithm(v_sum: Sequence[float], requests: Sequence[float], assignment: AssignmentMatrix,
                  threshold: float = DEFAULT_THRESHOLD, iteration_cap: int = DEFAULT_ITERATION_CAP,
                  last_container_guard: bool = True) -> OrchestrationOutcome:
    """
    The heuristic on raw vectors, for any number of types.

    One iteration is a full pass over the types. D^N is recomputed only at
    the end of a pass, so every type in a pass is compared against the
    placement as it stood when the pass began.
    """
    if not 0 < threshold < 1:
        raise InvalidThreshold(threshold)

    v_sum = np.asarray(v_sum, dtype=float)
    r = np.asarray(requests, dtype=float)
    entries = assignment.entries.copy()

    if r.sum() == 0:
        return OrchestrationOutcome(result=assignment, status=OrchestrationStatus.NO_DEMAND,
                                    iterations=0, initial=assignment)

    r_n = normalize(r, what="request vector R").as_array()
    d_n = normalize_or_empty(v_sum @ entries, what="placement vector D").as_array()

    trace: list[TraceStep] = []
    last_applied: dict[tuple[int, int], StepAction] = {}

    def record(step: TraceStep):
        trace.append(step)
        if not step.applied:
            logger.debug(f"blocked {step.action.value} of type {step.type_index}: {step.outcome.value}")

    for iteration in range(1, iteration_cap + 1):
        changed = False
        blocked = False
        for m in range(entries.shape[1]):
            demanded = r[m] > 0
            starved = last_container_guard and demanded and not entries[:, m].any()

            if r_n[m] - threshold > d_n[m] or starved:
                action = StepAction.GROW
                try:
                    machine = find_min_loaded_machine(entries, v_sum, m)
                except NoEligibleMachine:
                    record(TraceStep(iteration, m, action, None, StepOutcome.NO_ELIGIBLE_MACHINE))
                    blocked = True
                    continue
                entries[machine, m] = 1
            elif r_n[m] + threshold < d_n[m]:
                action = StepAction.SHRINK
                try:
                    machine = find_max_loaded_machine(entries, v_sum, m, demanded=demanded,
                                                      guard=last_container_guard)
                except LastContainerGuard as e:
                    record(TraceStep(iteration, m, action, e.machine, StepOutcome.LAST_CONTAINER_GUARD))
                    blocked = True
                    continue
                entries[machine, m] = 0
            else:
                continue

            previous = last_applied.get((machine, m))
            record(TraceStep(iteration, m, action, machine,
                             oscillation=previous is not None and previous is not action))
            last_applied[(machine, m)] = action
            changed = True

        d_n = normalize_or_empty(v_sum @ entries, what="placement vector D").as_array()

        if not changed:
            # a stalled pass repeats forever once nothing can move
            status = OrchestrationStatus.ITERATION_CAP_REACHED if blocked else OrchestrationStatus.CONVERGED
            return _outcome(entries, status, iteration, trace, assignment, r_n, d_n)

    return _outcome(entries, OrchestrationStatus.ITERATION_CAP_REACHED, iteration_cap, trace, assignment, r_n, d_n)


def _outcome(entries, status, iterations, trace, initial, r_n, d_n) -> OrchestrationOutcome:
    return OrchestrationOutcome(
        result=AssignmentMatrix(entries),
        status=status,
        iterations=iterations,
        trace=tuple(trace),
        initial=initial,
        requests_normalized=tuple(float(x) for x in r_n),
        placement_normalized=tuple(float(x) for x in d_n),
    )


def orchestrate(snapshot: ValidatedSnapshot, threshold: float = DEFAULT_THRESHOLD,
                iteration_cap: int = DEFAULT_ITERATION_CAP,
                last_container_guard: bool = True) -> OrchestrationOutcome:
    if snapshot.assignment.n_types != M:
        raise WaeError(f"snapshot must carry {M} edge types, got {snapshot.assignment.n_types}")
    v_sum = combined_load(snapshot.cpu, snapshot.net)
    outcome = run_algorithm(v_sum, snapshot.requests.counts, snapshot.assignment,
                            threshold=threshold, iteration_cap=iteration_cap,
                            last_container_guard=last_container_guard)
    logger.debug(f"period {snapshot.period_id}: {outcome.status.value} after {outcome.iterations} iteration(s), "
                 f"+{outcome.grows}/-{outcome.shrinks} containers")
    return outcome
