"""
Seeded request arrivals for the simulated PoP.

Each phase is a population of users that ramps up in one-second steps (a
5000-user phase with a 5 s ramp has 1000 users active during the first
second, 2000 during the second, and so on) and then holds. Every active user
sends requests as a Poisson process. Each request also draws a size factor
X ~ Exp(1) that scales its bytes and CPU work.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from core.loader import WorkloadPhaseConfig

RAMP_STEP = 1.0


@dataclass(frozen=True)
class WorkloadStream:
    times: np.ndarray
    types: np.ndarray
    sizes: np.ndarray
    # mean response bytes of the phase each request came from
    response_bytes: np.ndarray

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @classmethod
    def empty(cls) -> "WorkloadStream":
        return cls(np.zeros(0), np.zeros(0, dtype=np.int8), np.zeros(0), np.zeros(0))

    def counts(self, n_types: int) -> np.ndarray:
        return np.bincount(self.types.astype(np.int64), minlength=n_types)


def active_users(phase: WorkloadPhaseConfig, t: float) -> int:
    """Users active at `t` seconds into the phase, before any schedule multiplier."""
    if t < 0 or phase.total_users == 0:
        return 0
    if phase.ramp_up < RAMP_STEP:
        return phase.total_users
    step = max(1, math.ceil(t / RAMP_STEP))
    return round(phase.total_users * min(1.0, step * RAMP_STEP / phase.ramp_up))


def _segments(phase: WorkloadPhaseConfig, horizon: float, period_seconds: float | None):
    """Piecewise-constant (start, end, users) pieces of the phase, in absolute time."""
    end = min(horizon, phase.start + phase.duration) if phase.duration is not None else horizon
    cuts = {phase.start, end}
    t = phase.start
    while phase.ramp_up >= RAMP_STEP and t < phase.start + phase.ramp_up:
        t += RAMP_STEP
        cuts.add(min(t, end))
    if phase.schedule and period_seconds:
        k = math.ceil(phase.start / period_seconds)
        while k * period_seconds < end:
            cuts.add(k * period_seconds)
            k += 1
    edges = sorted(c for c in cuts if phase.start <= c <= end)

    for lo, hi in zip(edges, edges[1:]):
        if hi <= lo:
            continue
        users = active_users(phase, hi - phase.start)
        if phase.schedule and period_seconds:
            users *= phase.schedule[int(lo // period_seconds) % len(phase.schedule)]
        yield lo, hi, users


def phase_arrivals(phase: WorkloadPhaseConfig, rng: np.random.Generator, horizon: float,
                   period_seconds: float | None = None) -> np.ndarray:
    chunks = []
    for lo, hi, users in _segments(phase, horizon, period_seconds):
        rate = users * phase.requests_per_user_per_second
        if rate <= 0:
            continue
        n = rng.poisson(rate * (hi - lo))
        chunks.append(np.sort(rng.uniform(lo, hi, size=n)))
    return np.concatenate(chunks) if chunks else np.zeros(0)


def generate_workload(phases: Sequence[WorkloadPhaseConfig], seed: int, horizon: float | None = None,
                      period_seconds: float | None = None) -> WorkloadStream:
    """
    Merge every phase's arrivals into one time-sorted stream.

    Phases draw from independent child streams of one SeedSequence, so a
    phase's arrivals do not change when another phase is edited.
    """
    if horizon is None:
        if any(p.duration is None for p in phases):
            raise ValueError("a horizon is required when a phase has no duration")
        horizon = max((p.start + p.duration for p in phases), default=0.0)

    children = np.random.SeedSequence(seed).spawn(len(phases))
    times, types, sizes, response_bytes = [], [], [], []
    for phase, child in zip(phases, children):
        rng = np.random.default_rng(child)
        t = phase_arrivals(phase, rng, horizon, period_seconds)
        times.append(t)
        types.append(np.full(t.shape[0], phase.type.index, dtype=np.int8))
        sizes.append(rng.exponential(1.0, size=t.shape[0]))
        response_bytes.append(np.full(t.shape[0], phase.mean_response_size))

    if not times or sum(t.shape[0] for t in times) == 0:
        return WorkloadStream.empty()
    times = np.concatenate(times)
    order = np.argsort(times, kind="stable")
    return WorkloadStream(times[order], np.concatenate(types)[order], np.concatenate(sizes)[order],
                          np.concatenate(response_bytes)[order])
