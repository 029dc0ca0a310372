"""
Normalization module: turns raw C, T, R vectors into comparable distributions.

normalize() is the proportional map f(x_i) = x_i / sum(x). The same map is used
for request counts and for per-type resource placement, so R^N and D^N are
both probability vectors and can be compared entry by entry.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from wae.domain import AssignmentMatrix, DimensionMismatch, NormalizedDistribution, WaeError


class ZeroSum(WaeError):
    def __init__(self, what: str = "vector"):
        self.what = what
        super().__init__(f"{what} sums to zero; cannot normalize")


class NegativeEntry(WaeError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"entry {index} is negative ({value})")


def normalize(v: Sequence[float], what: str = "vector") -> NormalizedDistribution:
    arr = np.asarray(v, dtype=float)
    negative = np.flatnonzero(arr < 0)
    if len(negative):
        raise NegativeEntry(int(negative[0]), float(arr[negative[0]]))
    total = arr.sum()
    if total <= 0:
        raise ZeroSum(what)
    return NormalizedDistribution(tuple(float(x) for x in arr / total))


def normalize_or_empty(v: Sequence[float], what: str = "vector") -> NormalizedDistribution:
    """normalize(), but a zero-sum input yields the flagged all-zero distribution."""
    try:
        return normalize(v, what)
    except ZeroSum:
        return NormalizedDistribution.empty_of(len(v))


def combined_load(c: Sequence[float], t: Sequence[float]) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    t = np.asarray(t, dtype=float)
    if c.shape != t.shape:
        raise DimensionMismatch("cpu / net vector length", c.shape, t.shape)
    return c + t


def placement_vector(v_sum: Sequence[float], a: AssignmentMatrix | np.ndarray) -> np.ndarray:
    """D = V_sum . A: every machine's load counted once per type it hosts."""
    entries = a.entries if isinstance(a, AssignmentMatrix) else np.asarray(a)
    v_sum = np.asarray(v_sum, dtype=float)
    if v_sum.shape[0] != entries.shape[0]:
        raise DimensionMismatch("load vector length vs assignment rows", entries.shape[0], v_sum.shape[0])
    return v_sum @ entries


def load_distribution(v_sum: Sequence[float], a: AssignmentMatrix | np.ndarray) -> NormalizedDistribution:
    return normalize(placement_vector(v_sum, a), what="placement vector D")
