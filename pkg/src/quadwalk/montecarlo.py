"""Stochastic cross-check of the dynamic-programming probabilities.

Paths are simulated in fixed-size blocks; block b draws from a Philox
stream keyed by (seed, b), so the result depends only on (seed, reps) and
is bit-identical no matter how blocks are distributed over workers.
Plain Monte Carlo on purpose: the DP is the precision tool, this is an
independence check.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dp import ExitSpec
from .errors import InputError
from .steps import StepDistribution

__all__ = ["McEstimate", "simulate_survival", "BLOCK_SIZE"]

BLOCK_SIZE = 1 << 14


@dataclass(frozen=True)
class McEstimate:
    """Bernoulli mean with a 95% normal-approximation interval."""

    mean: float
    half_width_95: float
    reps: int
    seed: int

    @property
    def low(self) -> float:
        return self.mean - self.half_width_95

    @property
    def high(self) -> float:
        return self.mean + self.half_width_95


def _survival_count(sd_arrays, x, n, count, threshold, seed, block_idx) -> int:
    cum, dxs, dys = sd_arrays
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, block_idx], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    a = np.full(count, x[0], dtype=np.int64)
    b = np.full(count, x[1], dtype=np.int64)
    alive = np.ones(count, dtype=bool)
    for _ in range(n):
        u = rng.random(count)
        idx = np.searchsorted(cum, u, side="right")
        a += dxs[idx]
        b += dys[idx]
        alive &= (a >= threshold) & (b >= threshold)
        if not alive.any():
            break
    return int(alive.sum())


def simulate_survival(sd: StepDistribution, x, n: int, reps: int, seed: int,
                      workers: int = 1,
                      spec: ExitSpec | None = None) -> McEstimate:
    """Fraction of simulated paths with exit time > n.

    Identical (seed, reps) give bit-identical estimates for any worker
    count; reps are processed in blocks of BLOCK_SIZE paths.
    """
    if reps < 1:
        raise InputError("reps must be >= 1")
    if n < 0:
        raise InputError("n must be >= 0")
    threshold = (spec or ExitSpec()).threshold
    if n == 0:
        return McEstimate(mean=1.0, half_width_95=0.0, reps=reps, seed=seed)
    atoms = sd.atoms
    cum = np.cumsum([w for _, _, w in atoms])
    cum[-1] = 1.0  # guard the top edge against rounding
    dxs = np.array([dx for dx, _, _ in atoms], dtype=np.int64)
    dys = np.array([dy for _, dy, _ in atoms], dtype=np.int64)
    arrays = (cum, dxs, dys)
    blocks = []
    start = 0
    b = 0
    while start < reps:
        blocks.append((b, min(BLOCK_SIZE, reps - start)))
        start += BLOCK_SIZE
        b += 1

    def work(item):
        idx, count = item
        return _survival_count(arrays, x, n, count, threshold, seed, idx)

    if workers <= 1:
        counts = [work(it) for it in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(work, blocks))
    hits = sum(counts)
    mean = hits / reps
    hw = 1.96 * math.sqrt(mean * (1.0 - mean) / reps)
    return McEstimate(mean=mean, half_width_95=hw, reps=reps, seed=seed)
