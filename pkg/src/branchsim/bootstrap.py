"""Iterative bootstrap sampling of the branching recursion.

Instead of expanding a tree with ``E[N]^k`` nodes per sample, the bootstrap
keeps a pool of ``m`` values per level.  Level 0 holds i.i.d. draws of Q.
Each advancement draws ``m`` fresh branching vectors and combines every
vector with values resampled uniformly *with replacement* from the previous
pool:

    new[i] = sum_{r=1..n_i} c[i][r] * pool[idx[i][r]] + q[i]

The pool entries are identically distributed but only conditionally
independent given the previous pool; their empirical law converges to the
depth-``j`` recursion law as ``m`` grows.  Total cost for depth ``k`` is
exactly ``k * m`` vector draws plus ``m`` initial Q draws - linear in the
depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .model import DRAW_COUNTER, BranchingVectorSpec, sample_q, sample_vectors


@dataclass(frozen=True)
class SamplePool:
    """The ``m`` approximate samples held at one bootstrap level."""

    level: int
    values: np.ndarray
    m: int
    seed_lineage: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.level < 0:
            raise ValueError(f"pool level must be >= 0, got {self.level}")
        if self.m != values.size:
            raise ValueError(f"pool advertises m={self.m} but holds {values.size}")
        if values.size == 0:
            raise ValueError("empty pools are not allowed")
        if not np.all(np.isfinite(values)):
            raise ValueError("pool values must be finite")

    def mean(self) -> float:
        return float(self.values.mean())


def init_pool(
    spec: BranchingVectorSpec,
    m: int,
    rng: np.random.Generator,
    experiment_seed: int | None = None,
) -> SamplePool:
    """Level-0 pool: ``m`` i.i.d. draws of Q (all-ones for homogeneous runs,
    where the root weight is 1)."""
    if m < 1:
        raise ValueError(f"pool size m must be >= 1, got {m}")
    if spec.variant == "homogeneous":
        values = np.ones(m)
    else:
        values = sample_q(spec, m, rng)
    lineage = None if experiment_seed is None else (experiment_seed, 0)
    return SamplePool(0, values, m, lineage)


def advance_pool(
    spec: BranchingVectorSpec,
    pool: SamplePool,
    rng: np.random.Generator,
    resample_rng: np.random.Generator | None = None,
    experiment_seed: int | None = None,
) -> SamplePool:
    """One bootstrap step: consume exactly ``m`` vector draws, resample the
    previous pool with replacement, and combine.

    ``resample_rng`` lets index draws live on their own substream so that
    the resampling pattern is independent of the vector stream; it defaults
    to ``rng``.
    """
    if resample_rng is None:
        resample_rng = rng
    m = pool.m
    q, n, c = sample_vectors(spec, m, rng)
    total = int(n.sum())
    idx = resample_rng.integers(0, m, size=total)
    picked = pool.values[idx]
    picked *= c
    segments = np.repeat(np.arange(m, dtype=np.int64), n)
    new = np.bincount(segments, weights=picked, minlength=m)
    if q is not None:
        new += q
    lineage = None if experiment_seed is None else (experiment_seed, pool.level + 1)
    return SamplePool(pool.level + 1, new, m, lineage)


def run_bootstrap(
    spec: BranchingVectorSpec,
    k: int,
    m: int,
    seed: int,
    keep_levels: bool = True,
) -> list[SamplePool]:
    """Produce the pools for levels ``0..k``, deterministically from the seed.

    Every level draws its vectors and its resampling indices from dedicated
    substreams keyed by ``(seed, stream, level)``, so the output is
    bit-identical for identical ``(spec, k, m, seed)`` regardless of how the
    work is scheduled.  With ``keep_levels=False`` only the final pool is
    returned (constant memory in ``k``).
    """
    if k < 0:
        raise ValueError(f"depth k must be >= 0, got {k}")
    pool = init_pool(
        spec, m, rngmod.substream(seed, rngmod.VECTOR_STREAM, 0), seed
    )
    pools = [pool]
    for level in range(1, k + 1):
        pool = advance_pool(
            spec,
            pool,
            rngmod.substream(seed, rngmod.VECTOR_STREAM, level),
            rngmod.substream(seed, rngmod.RESAMPLE_STREAM, level),
            seed,
        )
        if keep_levels:
            pools.append(pool)
        else:
            pools[0] = pool
    return pools
