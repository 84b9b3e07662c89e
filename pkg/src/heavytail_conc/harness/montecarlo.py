"""Seeded, chunked Monte Carlo with order-independent reductions.

Every chunk draws from its own stream derived from ``(seed, stream_id,
chunk_index)``, so the sample set never depends on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from ..dist import Distribution1D, TransportMap

DEFAULT_CHUNK = 2048


def stream(seed: int, stream_id: int, chunk: int) -> np.random.Generator:
    """Generator for one chunk of one stream."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream_id), int(chunk))))


def chunk_sizes(trials: int, chunk: int = DEFAULT_CHUNK):
    full, rest = divmod(int(trials), int(chunk))
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(fn: Callable, trials: int, seed: int, stream_id: int = 0,
               chunk: int = DEFAULT_CHUNK, workers: int = 1) -> list:
    """``[fn(rng_i, m_i)]`` over chunks, returned in chunk order."""
    sizes = chunk_sizes(trials, chunk)
    jobs = [(stream(seed, stream_id, i), m) for i, m in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(rng, m) for rng, m in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def sample_product(law, n: int, rng: np.random.Generator, m: int) -> np.ndarray:
    """``(m, n)`` draws from an i.i.d. law or a :class:`TransportMap`."""
    if isinstance(law, TransportMap):
        return law(rng.standard_normal((m, law.n)))
    if isinstance(law, Distribution1D):
        return np.asarray(law.sample(rng, (m, n)), dtype=float)
    raise TypeError("law must be a Distribution1D or TransportMap")


def wilson_interval(k, trials: int, alpha: float = 0.05):
    """Wilson score interval for ``k`` successes out of ``trials``."""
    lo, hi = proportion_confint(np.asarray(k), trials, alpha=alpha, method="wilson")
    return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


@dataclass
class EmpiricalDeviation:
    """Sorted ``|f(X) - median|`` from the second pass, with the pass-1 median."""

    median: float
    deviations: np.ndarray
    trials: int
    excluded: int

    def exceed_count(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.deviations.size - np.searchsorted(self.deviations, u, side="right")

    def survival(self, u) -> np.ndarray:
        return self.exceed_count(u) / max(self.deviations.size, 1)

    def curve(self, t_grid, alpha: float = 0.05) -> dict:
        k = self.exceed_count(t_grid)
        lo, hi = wilson_interval(k, self.deviations.size, alpha)
        return {"t": np.asarray(t_grid, dtype=float), "count": k,
                "prob": k / self.deviations.size, "ci_low": lo, "ci_high": hi}


def _evaluate(f, law, n):
    def run(rng, m):
        vals = np.asarray(f(sample_product(law, n, rng, m)), dtype=float)
        return vals
    return run


def mc_survival(f, law, n: int, trials: int, seed: int, workers: int = 1,
                chunk: int = DEFAULT_CHUNK) -> EmpiricalDeviation:
    """Two-pass estimate of ``P{|f(X) - M f(X)| > u}``.

    Pass 1 (stream 0) fixes the empirical median; pass 2 (stream 1) draws a
    fresh sample whose absolute deviations are stored sorted.  Non-finite
    values are dropped and counted.
    """
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    first = np.concatenate(map_chunks(_evaluate(f, law, n), trials, seed, 0, chunk, workers))
    first = first[np.isfinite(first)]
    median = float(np.median(first))
    second = np.concatenate(map_chunks(_evaluate(f, law, n), trials, seed, 1, chunk, workers))
    good = np.isfinite(second)
    dev = np.sort(np.abs(second[good] - median))
    return EmpiricalDeviation(median, dev, int(trials), int((~good).sum()))


def mc_values(fn: Callable, trials: int, seed: int, stream_id: int = 0, workers: int = 1,
              chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """Concatenated ``fn(rng, m)`` outputs in chunk order."""
    return np.concatenate(map_chunks(fn, trials, seed, stream_id, chunk, workers))


def binomial_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)
