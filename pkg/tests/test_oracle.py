import itertools
import logging
import time

import numpy as np
import pytest

from conftest import make_snapshot
from wae.domain import AssignmentMatrix
from wae.oracle import (
    MAX_CELLS,
    TooLarge,
    check_feasible,
    compare_with_heuristic,
    exact_min_containers,
    feasibility,
    matrix_code,
    matrix_from_code,
    solve_exact,
)
from wae.orchestration import OrchestrationStatus, orchestrate

logger = logging.getLogger(__name__)


def test_single_cell():
    result = solve_exact([0.5], [1], n_types=1)
    assert result.matrix.to_lists() == [[1]]
    assert result.optimal_count == 1
    assert result.enumerated == 2


def test_tie_break_picks_smallest_code():
    result = solve_exact([0.5, 0.5], [1], n_types=1)
    assert result.optimal_count == 1
    assert result.matrix.to_lists() == [[1], [0]]


def test_no_demand_needs_no_containers():
    result = solve_exact([0.5, 0.4, 0.3], [0, 0, 0, 0], n_types=4)
    assert result.optimal_count == 0
    assert result.matrix.container_count() == 0


def test_too_large():
    with pytest.raises(TooLarge):
        solve_exact(np.ones(6), [1, 1, 1, 1], n_types=4)
    assert MAX_CELLS == 20


def test_vanishing_band_is_infeasible(evaluation_snapshot):
    result = exact_min_containers(evaluation_snapshot, threshold=0.001)
    assert result.infeasible
    assert result.optimal_count is None


def test_feasibility_checks(evaluation_snapshot):
    # a 0.1 band cannot be met: any VoD container carries at least 0.7 of 3.66 load
    assert exact_min_containers(evaluation_snapshot).infeasible
    optimum = exact_min_containers(evaluation_snapshot, threshold=0.2)
    assert not optimum.infeasible
    assert check_feasible(optimum.matrix, evaluation_snapshot, threshold=0.2).feasible

    report = check_feasible(AssignmentMatrix.zeros(3), evaluation_snapshot)
    assert not report.feasible
    assert report.uncovered == (0, 1, 2)


def test_converged_heuristic_is_feasible():
    snapshot = make_snapshot([0.5, 0.5], [0.0, 0.0], [1, 9, 0, 0], [[1, 0, 0, 0], [1, 0, 0, 0]])
    outcome = orchestrate(snapshot, last_container_guard=False)
    assert outcome.status is OrchestrationStatus.CONVERGED
    assert check_feasible(outcome.result, snapshot, require_coverage=False).feasible


def test_single_machine_gap_is_zero():
    snapshot = make_snapshot([0.5], [0.0], [1, 0, 0, 0], [[1, 0, 0, 0]])
    comparison = compare_with_heuristic(snapshot)
    assert comparison.gap == 0
    assert comparison.heuristic_feasible


def test_evaluation_size_is_fast(evaluation_snapshot):
    started = time.perf_counter()
    result = exact_min_containers(evaluation_snapshot)
    assert time.perf_counter() - started < 1.0
    assert result.enumerated == 4096


def test_codes():
    a = AssignmentMatrix([[1, 0], [0, 1]])
    assert matrix_code(a) == 1 + 8
    assert matrix_from_code(9, 2, 2) == a


def _brute_force(v, r, n, m, threshold):
    """Independent enumeration with plain Python loops."""
    total_r = sum(r)
    r_n = [x / total_r for x in r] if total_r else [0.0] * m
    best, feasible = None, 0
    for cells in itertools.product((0, 1), repeat=n * m):
        rows = [cells[i * m:(i + 1) * m] for i in range(n)]
        x = [sum(v[i] * rows[i][j] for i in range(n)) for j in range(m)]
        total_x = sum(x)
        x_n = [xi / total_x for xi in x] if total_x > 0 else [0.0] * m
        if any(abs(a - b) > threshold + 1e-9 for a, b in zip(r_n, x_n)):
            continue
        if any(r[j] > 0 and not any(rows[i][j] for i in range(n)) for j in range(m)):
            continue
        feasible += 1
        count = sum(cells)
        if best is None or count < best:
            best = count
    return best, feasible


def test_agrees_with_independent_enumeration():
    rng = np.random.default_rng(99)
    for _ in range(200):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 4))
        v = rng.uniform(0, 2, size=n).tolist()
        r = rng.integers(0, 10, size=m).tolist()
        threshold = float(rng.choice([0.05, 0.1, 0.2, 0.3]))
        result = solve_exact(v, r, n_types=m, threshold=threshold)
        best, feasible = _brute_force(v, r, n, m, threshold)
        assert result.optimal_count == best
        assert result.feasible_count == feasible
        if best is not None:
            assert feasibility(result.matrix, v, r, threshold).feasible
            assert result.matrix.container_count() == best


def test_heuristic_never_beats_the_oracle(record_property):
    rng = np.random.default_rng(5)
    runs, converged, gaps = 200, 0, []
    for _ in range(runs):
        n = int(rng.integers(1, 4))
        snapshot = make_snapshot(rng.uniform(0, 1, size=n), rng.uniform(0, 1, size=n),
                                 rng.integers(0, 20, size=4), rng.integers(0, 2, size=(n, 4)))
        comparison = compare_with_heuristic(snapshot)
        if comparison.heuristic.status is OrchestrationStatus.CONVERGED:
            converged += 1
            assert comparison.heuristic_feasible
            assert check_feasible(comparison.heuristic.result, snapshot).feasible
        if comparison.heuristic_feasible:
            # the oracle minimizes over every matrix inside the band
            assert not comparison.oracle.infeasible
            assert comparison.gap >= 0
            gaps.append(comparison.gap)

    rate, mean_gap = converged / runs, float(np.mean(gaps)) if gaps else 0.0
    logger.info(f"heuristic vs oracle over {runs} instances: converged {rate:.1%}, mean container gap {mean_gap:.2f}")
    record_property("convergence_rate", rate)
    record_property("mean_gap", mean_gap)
    assert converged > 0
    assert mean_gap >= 0
