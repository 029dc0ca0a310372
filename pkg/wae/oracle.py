"""
Exact solver for the container-minimisation problem.

Enumerates every binary N x M matrix, keeps the ones whose normalized
placement X^N lies within the threshold band around R^N for every type (and
that host every demanded type at least once), and returns the feasible
matrix with the fewest containers.

Matrices are identified by an integer code in which row-major cell i
contributes 2**i; ties on container count go to the smallest code.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from wae.domain import AssignmentMatrix, DimensionMismatch, ValidatedSnapshot, WaeError
from wae.normalization import combined_load, normalize_or_empty
from wae.orchestration import (
    BAND_TOLERANCE,
    DEFAULT_THRESHOLD,
    InvalidThreshold,
    OrchestrationOutcome,
    orchestrate,
)

MAX_CELLS = 20
CHUNK_SIZE = 1 << 16


class TooLarge(WaeError):
    def __init__(self, cells: int):
        self.cells = cells
        super().__init__(f"{cells} matrix cells exceed the enumeration bound of {MAX_CELLS} (2^{MAX_CELLS} matrices)")


@dataclass(frozen=True)
class OracleResult:
    matrix: AssignmentMatrix | None
    optimal_count: int | None
    feasible_count: int
    enumerated: int

    @property
    def infeasible(self) -> bool:
        return self.matrix is None


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    slack: tuple[float, ...]
    uncovered: tuple[int, ...] = ()


@dataclass(frozen=True)
class HeuristicComparison:
    oracle: OracleResult
    heuristic: OrchestrationOutcome
    heuristic_count: int
    heuristic_feasible: bool

    @property
    def gap(self) -> int | None:
        if self.oracle.optimal_count is None:
            return None
        return self.heuristic_count - self.oracle.optimal_count


def matrix_code(matrix: AssignmentMatrix) -> int:
    bits = matrix.entries.reshape(-1).astype(np.int64)
    return int((bits << np.arange(bits.size, dtype=np.int64)).sum())


def matrix_from_code(code: int, n_machines: int, n_types: int) -> AssignmentMatrix:
    cells = n_machines * n_types
    bits = (code >> np.arange(cells)) & 1
    return AssignmentMatrix(bits.reshape(n_machines, n_types))


def _band_mask(x: np.ndarray, r_n: np.ndarray, threshold: float) -> np.ndarray:
    """x: (B, M) placement vectors; returns which rows keep X^N inside the band."""
    totals = x.sum(axis=1, keepdims=True)
    x_n = np.divide(x, totals, out=np.zeros_like(x), where=totals > 0)
    return np.all(np.abs(r_n - x_n) <= threshold + BAND_TOLERANCE, axis=1)


def solve_exact(v_sum: Sequence[float], requests: Sequence[float], n_types: int,
                threshold: float = DEFAULT_THRESHOLD) -> OracleResult:
    if not 0 < threshold < 1:
        raise InvalidThreshold(threshold)
    v_sum = np.asarray(v_sum, dtype=float)
    r = np.asarray(requests, dtype=float)
    if r.shape[0] != n_types:
        raise DimensionMismatch("request vector length", n_types, r.shape[0])
    n_machines = v_sum.shape[0]
    cells = n_machines * n_types
    if cells > MAX_CELLS:
        raise TooLarge(cells)

    r_n = normalize_or_empty(r, what="request vector R").as_array()
    demanded = r > 0
    shifts = np.arange(cells, dtype=np.int64)
    total = 1 << cells

    best_code: int | None = None
    best_count: int | None = None
    feasible = 0
    for start in range(0, total, CHUNK_SIZE):
        codes = np.arange(start, min(start + CHUNK_SIZE, total), dtype=np.int64)
        mats = ((codes[:, None] >> shifts) & 1).astype(np.int8).reshape(-1, n_machines, n_types)
        x = np.einsum("n,bnm->bm", v_sum, mats)
        ok = _band_mask(x, r_n, threshold)
        if demanded.any():
            ok &= np.all(mats.sum(axis=1)[:, demanded] >= 1, axis=1)
        if not ok.any():
            continue
        feasible += int(ok.sum())
        counts = mats.sum(axis=(1, 2))[ok]
        local = int(np.argmin(counts))  # first minimum is the smallest code in the chunk
        if best_count is None or counts[local] < best_count:
            best_count = int(counts[local])
            best_code = int(codes[ok][local])

    matrix = None if best_code is None else matrix_from_code(best_code, n_machines, n_types)
    return OracleResult(matrix=matrix, optimal_count=best_count, feasible_count=feasible, enumerated=total)


def exact_min_containers(snapshot: ValidatedSnapshot, threshold: float = DEFAULT_THRESHOLD) -> OracleResult:
    v_sum = combined_load(snapshot.cpu, snapshot.net)
    return solve_exact(v_sum, snapshot.requests.counts, snapshot.assignment.n_types, threshold)


def feasibility(matrix: AssignmentMatrix, v_sum: Sequence[float], requests: Sequence[float],
                threshold: float = DEFAULT_THRESHOLD, require_coverage: bool = True) -> FeasibilityReport:
    v_sum = np.asarray(v_sum, dtype=float)
    r = np.asarray(requests, dtype=float)
    if matrix.n_machines != v_sum.shape[0] or matrix.n_types != r.shape[0]:
        raise DimensionMismatch("matrix shape", (v_sum.shape[0], r.shape[0]), matrix.shape)
    r_n = normalize_or_empty(r).as_array()
    x_n = normalize_or_empty(v_sum @ matrix.entries).as_array()
    slack = r_n - x_n
    in_band = bool(np.all(np.abs(slack) <= threshold + BAND_TOLERANCE))
    uncovered = tuple(int(m) for m in np.flatnonzero((r > 0) & (matrix.column_sums() == 0)))
    ok = in_band and not (require_coverage and uncovered)
    return FeasibilityReport(feasible=ok, slack=tuple(float(s) for s in slack), uncovered=uncovered)


def check_feasible(matrix: AssignmentMatrix, snapshot: ValidatedSnapshot,
                   threshold: float = DEFAULT_THRESHOLD, require_coverage: bool = True) -> FeasibilityReport:
    v_sum = combined_load(snapshot.cpu, snapshot.net)
    return feasibility(matrix, v_sum, snapshot.requests.counts, threshold, require_coverage)


def compare_with_heuristic(snapshot: ValidatedSnapshot, threshold: float = DEFAULT_THRESHOLD,
                           **orchestrate_kwargs) -> HeuristicComparison:
    oracle = exact_min_containers(snapshot, threshold)
    outcome = orchestrate(snapshot, threshold=threshold, **orchestrate_kwargs)
    feasible = check_feasible(outcome.result, snapshot, threshold).feasible
    return HeuristicComparison(oracle=oracle, heuristic=outcome,
                               heuristic_count=outcome.result.container_count(),
                               heuristic_feasible=feasible)
