"""Random walks in the random environment generated by the sharing rows.

Two walkers moving in the same realised environment have a difference
``Z = W - W~`` whose return probability equals the expected sum of squared
entries in a column of the n-step sharing-matrix product. Both sides are
estimated here by independent simulations.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import specfun
from .exchange import SharingSpec, exchange_masses, pull_column
from .specfun import DistributionSpec, RngLike, as_generator, spawn_generators

WALKER_CHUNK = 50_000
MC_SAMPLES = 1_000_000
_CELL_BUDGET = 2_000_000


class Estimate(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True)
class WalkerPair:
    positions: tuple
    step: int = 0
    size: int | None = None

    def __post_init__(self):
        w, wt = (int(v) for v in self.positions)
        if self.size is not None:
            if self.size < 1:
                raise ValueError("torus size must be positive")
            if not (0 <= w < self.size and 0 <= wt < self.size):
                raise ValueError("positions must lie in 0..size-1")
        object.__setattr__(self, "positions", (w, wt))

    @property
    def difference(self) -> int:
        return self.positions[0] - self.positions[1]


def _categorical(rows: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(rows, axis=1)
    u = gen.random(rows.shape[0]) * cum[:, -1]
    idx = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(idx, rows.shape[1] - 1)


def move_walkers(w1: np.ndarray, w2: np.ndarray, s: SharingSpec, gen: np.random.Generator):
    """One step for many independent pairs.

    Co-located walkers pick their moves independently from one shared
    realised row; separated walkers each see their own row.
    """
    offs = np.asarray(s.offsets)
    rows1 = s.sample_rows(w1.size, gen)
    rows2 = s.sample_rows(w1.size, gen)
    together = w1 == w2
    rows2[together] = rows1[together]
    return w1 + offs[_categorical(rows1, gen)], w2 + offs[_categorical(rows2, gen)]


def step_walker_pair(wp: WalkerPair, s: SharingSpec, rng: RngLike) -> WalkerPair:
    gen = as_generator(rng)
    a, b = move_walkers(np.array([wp.positions[0]]), np.array([wp.positions[1]]), s, gen)
    a, b = int(a[0]), int(b[0])
    if wp.size is not None:
        a, b = a % wp.size, b % wp.size
    return WalkerPair((a, b), wp.step + 1, wp.size)


def _run_chunks(fn, sizes: Sequence[int], rng: RngLike, threads: int):
    gens = spawn_generators(rng, len(sizes))
    jobs = list(zip(sizes, gens))
    if threads <= 1 or len(jobs) == 1:
        return [fn(m, g) for m, g in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _chunk_sizes(total: int, chunk: int) -> list[int]:
    chunk = max(1, chunk)
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def estimate_return_probability(s: SharingSpec, n: int, replicas: int, rng: RngLike,
                                threads: int = 1) -> Estimate:
    """Fraction of same-environment walker pairs that coincide after ``n`` steps."""
    if replicas < 1000:
        raise ValueError("at least 1000 replicas are required")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return Estimate(1.0, 0.0)

    def run(m, gen):
        w1 = np.zeros(m, dtype=np.int64)
        w2 = np.zeros(m, dtype=np.int64)
        for _ in range(n):
            w1, w2 = move_walkers(w1, w2, s, gen)
        return int(np.count_nonzero(w1 == w2))

    hits = sum(_run_chunks(run, _chunk_sizes(replicas, WALKER_CHUNK), rng, threads))
    p = hits / replicas
    return Estimate(p, math.sqrt(p * (1.0 - p) / replicas))


def _torus_for(s: SharingSpec, n: int, N: int | None) -> int:
    need = 2 * n * s.max_offset + 1
    if N is None:
        return max(need, 2 * s.max_offset + 1)
    if N < need:
        raise ValueError(f"torus size {N} lets an {n}-step walk wrap; need >= {need}")
    return N


def sum_squared_columns(s: SharingSpec, n: int, N: int | None, replicas: int, rng: RngLike,
                        threads: int = 1) -> Estimate:
    """Monte Carlo mean of the squared-entry sum of one column of ``Pi(n) ... Pi(1)``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    N = _torus_for(s, n, N)
    if n == 0:
        return Estimate(1.0, 0.0)
    k = len(s.offsets)
    j = N // 2

    def run(m, gen):
        v = np.zeros((m, N))
        v[:, j] = 1.0
        for _ in range(n):
            rows = s.sample_rows(m * N, gen).reshape(m, N, k)
            v = pull_column(v, rows, s.offsets)
        return np.einsum("ij,ij->i", v, v)

    chunk = max(1, _CELL_BUDGET // (N * k))
    vals = np.concatenate(_run_chunks(run, _chunk_sizes(replicas, chunk), rng, threads))
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.inf
    return Estimate(float(vals.mean()), se)


def z_transition_distribution(at_zero: bool, s: SharingSpec, rng: RngLike | None = None,
                              samples: int = MC_SAMPLES) -> dict[int, float]:
    """Law of one increment of the difference chain, from state 0 or from elsewhere.

    Away from 0 the walkers move independently with the mean weights. At 0
    the increment law needs ``E pi_j1 pi_j2``; this is exact for fixed
    weights and for two-diagonal rows, and estimated from ``samples``
    realised rows otherwise.
    """
    offs = list(s.offsets)
    k = len(offs)
    if not at_zero or s.kind == "deterministic_window":
        p = s.mean_weights()
        second = np.outer(p, p)
    elif s.kind == "two_diagonal":
        m1 = specfun.mean(s.G)
        m2 = specfun.variance(s.G) + m1 * m1
        cross = m1 - m2
        second = np.array([[m2, cross], [cross, 1.0 - 2.0 * m1 + m2]])
    else:
        if rng is None:
            raise ValueError("a random source is needed for the Monte Carlo estimate")
        rows = s.sample_rows(samples, rng)
        second = rows.T @ rows / samples
    out: dict[int, float] = {}
    for a in range(k):
        for b in range(k):
            d = offs[a] - offs[b]
            out[d] = out.get(d, 0.0) + float(second[a, b])
    return dict(sorted(out.items()))


def z_chain_return_probability(s: SharingSpec, n: int, rng: RngLike | None = None,
                               samples: int = MC_SAMPLES) -> float:
    """P(Z^n = 0) by propagating the difference chain's law exactly over n steps."""
    at0 = z_transition_distribution(True, s, rng, samples)
    off = z_transition_distribution(False, s)
    reach = n * 2 * s.max_offset
    size = 2 * reach + 1
    law = np.zeros(size)
    law[reach] = 1.0
    for _ in range(n):
        new = np.zeros(size)
        mass0 = law[reach]
        rest = law.copy()
        rest[reach] = 0.0
        for d, q in off.items():
            new += q * np.roll(rest, d)
        for d, q in at0.items():
            new[reach + d] += q * mass0
        law = new
    return float(law[reach])


def variance_decay_trace(F: DistributionSpec, s: SharingSpec, steps: Sequence[int], N: int | None,
                         replicas: int, rng: RngLike, threads: int = 1) -> list[dict]:
    """Empirical variance of coordinate 0 of the centred masses after n exchange steps.

    Each row also carries the column-sum estimate and the ratio
    ``var / (sigma^2 * column_sum)`` with a delta-method standard error.
    """
    sigma2 = specfun.variance(F)
    if not math.isfinite(sigma2):
        raise ValueError(f"{F} has infinite variance")
    mu = specfun.mean(F)
    k = len(s.offsets)
    gens = spawn_generators(rng, 2 * len(steps))
    rows_out = []
    for idx, n in enumerate(steps):
        n = int(n)
        size = _torus_for(s, n, N)
        gen = gens[2 * idx]
        delta = specfun.sample(F, gen, size=replicas * size).reshape(replicas, size) - mu
        for _ in range(n):
            rows = s.sample_rows(replicas * size, gen).reshape(replicas, size, k)
            delta = exchange_masses(delta, rows, s.offsets)
        x = delta[:, 0]
        var = float(x.var(ddof=1))
        m4 = float(np.mean((x - x.mean()) ** 4))
        var_se = math.sqrt(max(m4 - var * var, 0.0) / replicas)
        col = sum_squared_columns(s, n, size, replicas, gens[2 * idx + 1], threads)
        ratio = var / (sigma2 * col.value)
        ratio_se = ratio * math.hypot(var_se / var, col.stderr / col.value)
        rows_out.append({
            "n": n, "variance": var, "variance_se": var_se,
            "column_sum": col.value, "column_sum_se": col.stderr,
            "sigma2": sigma2, "ratio": ratio, "ratio_se": ratio_se,
        })
    return rows_out


def write_trace_csv(path, rows: Sequence[tuple]) -> None:
    """Rows of ``(n, estimate, stderr, method)``."""
    from .renewal import format_real

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "estimate", "stderr", "method"])
        for n, est, se, method in rows:
            w.writerow([int(n), format_real(est), format_real(se), method])
