import numpy as np
import pytest

from conftest import make_snapshot
from wae.domain import AssignmentMatrix, FunctionType
from wae.oracle import check_feasible, feasibility
from wae.orchestration import (
    Infeasible,
    InvalidThreshold,
    LastContainerGuard,
    NoEligibleMachine,
    NoHostingMachine,
    OrchestrationStatus,
    StepAction,
    StepOutcome,
    find_max_loaded_machine,
    find_min_loaded_machine,
    orchestrate,
    run_algorithm,
)


class TestFindMinLoadedMachine:
    def test_unique_minimum(self):
        assert find_min_loaded_machine(np.zeros((3, 1), dtype=int), [0.9, 0.2, 0.5], 0) == 1

    def test_tie_goes_to_lowest_index(self):
        assert find_min_loaded_machine(np.zeros((2, 1), dtype=int), [0.3, 0.3], 0) == 0

    def test_hosts_are_not_eligible(self):
        assert find_min_loaded_machine(np.array([[1], [0]]), [0.1, 0.5], 0) == 1

    def test_every_machine_hosts(self):
        with pytest.raises(NoEligibleMachine):
            find_min_loaded_machine(np.ones((2, 1), dtype=int), [0.1, 0.5], 0)

    def test_accepts_function_types(self):
        a = AssignmentMatrix([[0, 0, 0, 0], [0, 0, 0, 0]])
        assert find_min_loaded_machine(a, [0.5, 0.1], FunctionType.VOD_EDGE) == 1


class TestFindMaxLoadedMachine:
    def test_unique_maximum(self):
        assert find_max_loaded_machine(np.ones((2, 1), dtype=int), [0.9, 0.2], 0) == 0

    def test_tie_goes_to_lowest_index(self):
        assert find_max_loaded_machine(np.ones((2, 1), dtype=int), [0.4, 0.4], 0) == 0

    def test_guard_fires_only_on_the_last_container(self):
        with pytest.raises(LastContainerGuard) as e:
            find_max_loaded_machine(np.array([[0], [1]]), [0.1, 0.5], 0, demanded=True)
        assert e.value.machine == 1
        assert find_max_loaded_machine(np.array([[0], [1]]), [0.1, 0.5], 0, demanded=False) == 1
        assert find_max_loaded_machine(np.array([[0], [1]]), [0.1, 0.5], 0, demanded=True, guard=False) == 1
        assert find_max_loaded_machine(np.array([[1], [1]]), [0.1, 0.5], 0, demanded=True) == 1

    def test_no_host(self):
        with pytest.raises(NoHostingMachine):
            find_max_loaded_machine(np.zeros((2, 1), dtype=int), [0.1, 0.5], 0)


def test_fixed_point_converges_in_one_pass():
    snapshot = make_snapshot([0.5] * 3, [0.0] * 3, [1, 1, 1, 1], np.ones((3, 4)))
    outcome = orchestrate(snapshot)
    assert outcome.status is OrchestrationStatus.CONVERGED
    assert outcome.iterations == 1
    assert outcome.result == snapshot.assignment
    assert outcome.trace == ()


def test_no_demand_returns_input():
    snapshot = make_snapshot([0.2, 0.3], [0.1, 0.1], [0, 0, 0, 0], [[1, 0, 0, 0], [0, 1, 0, 0]])
    outcome = orchestrate(snapshot)
    assert outcome.status is OrchestrationStatus.NO_DEMAND
    assert outcome.iterations == 0
    assert outcome.result == snapshot.assignment


def test_invalid_threshold():
    for threshold in (0.0, 1.0, -0.1):
        with pytest.raises(InvalidThreshold):
            run_algorithm([1.0], [1], AssignmentMatrix([[1]]), threshold=threshold)


class TestTwoByTwo:
    v_sum = [0.5, 0.5]
    requests = [1, 9]
    start = AssignmentMatrix([[1, 0], [1, 0]])

    def test_without_guard_the_band_is_reached(self):
        outcome = run_algorithm(self.v_sum, self.requests, self.start, last_container_guard=False)
        assert outcome.status is OrchestrationStatus.CONVERGED
        assert outcome.result.to_lists() == [[0, 1], [0, 1]]
        assert outcome.result.column(1).sum() >= 1
        assert feasibility(outcome.result, self.v_sum, self.requests, require_coverage=False).feasible

    def test_first_pass_shrinks_type_zero_and_grows_type_one(self):
        outcome = run_algorithm(self.v_sum, self.requests, self.start, last_container_guard=False)
        first = [s for s in outcome.trace if s.iteration == 1]
        assert [(s.type_index, s.action, s.machine) for s in first] == [
            (0, StepAction.SHRINK, 0),
            (1, StepAction.GROW, 0),
        ]

    def test_guard_keeps_type_zero_alive(self):
        outcome = run_algorithm(self.v_sum, self.requests, self.start)
        assert outcome.status is OrchestrationStatus.ITERATION_CAP_REACHED
        assert outcome.result.to_lists() == [[0, 1], [1, 1]]
        assert outcome.result.column(0).sum() == 1
        assert any(s.outcome is StepOutcome.LAST_CONTAINER_GUARD for s in outcome.blocked)


def test_evaluation_snapshot_grows_small_edge(evaluation_snapshot):
    outcome = orchestrate(evaluation_snapshot)
    assert outcome.result.to_lists() == [[1, 0, 0, 0], [1, 1, 0, 0], [1, 0, 1, 0]]
    assert outcome.result.column(FunctionType.SMALL_EDGE.index).sum() == 3
    assert outcome.status is OrchestrationStatus.ITERATION_CAP_REACHED
    assert outcome.iterations == 3
    assert outcome.grows == 2
    assert outcome.shrinks == 1
    # demanded types keep a container
    assert all(outcome.result.column(m).sum() >= 1 for m in range(3))


def test_evaluation_snapshot_is_stable(evaluation_snapshot):
    again = make_snapshot([0.32, 0.28, 0.25], [0.48, 0.42, 0.51], [5000, 1500, 500, 0],
                          orchestrate(evaluation_snapshot).result.to_lists())
    assert orchestrate(again).result == orchestrate(evaluation_snapshot).result


def test_starved_type_is_grown():
    # inside the band already, but type 1 has demand and no container
    outcome = run_algorithm([0.4, 0.6], [1, 1], AssignmentMatrix([[1, 0], [0, 0]]), threshold=0.5)
    assert outcome.status is OrchestrationStatus.CONVERGED
    assert outcome.grows == 1
    assert outcome.result.to_lists() == [[1, 1], [0, 0]]


def test_deterministic():
    rng = np.random.default_rng(11)
    v = rng.uniform(0, 2, size=4)
    r = rng.integers(0, 100, size=4)
    a = AssignmentMatrix(rng.integers(0, 2, size=(4, 4)))
    first = run_algorithm(v, r, a)
    assert all(run_algorithm(v, r, a) == first for _ in range(5))


def replay(start, trace):
    """Apply the trace's steps to the start matrix, checking each one against the cell it touches."""
    state = np.array(start.to_lists())
    for step in trace:
        if not step.applied:
            continue
        if step.action is StepAction.GROW:
            assert state[step.machine, step.type_index] == 0, step
            state[step.machine, step.type_index] = 1
        else:
            assert state[step.machine, step.type_index] == 1, step
            state[step.machine, step.type_index] = 0
    return state.tolist()


def test_random_runs_are_sound():
    rng = np.random.default_rng(1234)
    converged = 0
    runs = 1000
    for _ in range(runs):
        n = int(rng.integers(2, 9))
        cpu = rng.uniform(0, 1, size=n)
        net = rng.uniform(0, 1, size=n)
        requests = rng.integers(0, 50, size=4)
        start = rng.integers(0, 2, size=(n, 4))
        snapshot = make_snapshot(cpu, net, requests, start)
        outcome = orchestrate(snapshot)

        assert outcome.result.shape == (n, 4)
        assert outcome.iterations <= 64
        assert replay(snapshot.assignment, outcome.trace) == outcome.result.to_lists()
        # containers = grows - shrinks applied to the starting matrix
        assert outcome.result.container_count() == snapshot.assignment.container_count() \
            + outcome.grows - outcome.shrinks
        if outcome.status is OrchestrationStatus.CONVERGED:
            converged += 1
            assert check_feasible(outcome.result, snapshot).feasible
        if outcome.status is not OrchestrationStatus.NO_DEMAND:
            demanded = requests > 0
            assert np.all(outcome.result.column_sums()[demanded] >= 1) or outcome.blocked
    assert converged > runs // 2


def test_blocked_steps_are_infeasible_errors():
    no_room = NoEligibleMachine(2)
    guard = LastContainerGuard(1, machine=0)
    assert isinstance(no_room, Infeasible) and isinstance(guard, Infeasible)
    assert str(no_room) == "every machine already hosts type 2"
    assert "last container of demanded type 1 (machine 0)" in str(guard)
