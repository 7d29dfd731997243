"""Exact Monte Carlo on the weighted branching tree.

One sample of the depth-``k`` recursion value is produced by expanding the
random tree down to level ``k``: every node draws its own branching vector,
carries the product of the edge weights along its ancestral path, and
contributes ``q * weight`` to its level's sum.  The sampled value is the sum
of the level sums.  The expected cost is ``sum_j E[N]^j`` vector draws per
sample, i.e. exponential in ``k`` - which is exactly what the bootstrap
module exists to avoid.

Two engines are provided: a stack-based depth-first walk for single runs
(with incremental node-budget enforcement), and a level-synchronous batch
engine that expands many independent trees at once with vectorized draws.
Both sample from the same joint law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .model import (
    DRAW_COUNTER,
    BranchingVectorSpec,
    UnsupportedMomentError,
    divide_conquer_toll,
    sample_vector,
)

DEFAULT_NODE_BUDGET = 10_000_000

# Batch tuning: chunks are sized so the expected terminal-level population
# stays near this many nodes; the hard cap aborts pathological expansions.
_CHUNK_TARGET_NODES = 4_000_000
_MAX_LEVEL_NODES = 1 << 26


class BudgetExceededError(RuntimeError):
    """A batch expansion outgrew the configured hard node cap."""


@dataclass(frozen=True)
class TreeRunResult:
    """Outcome of one tree expansion.

    ``r_k`` is the sampled recursion value (for homogeneous runs, the
    terminal-level weight sum).  ``level_sums[j]`` holds the level-``j``
    contribution; for depth runs ``r_k == sum(level_sums)`` exactly.
    ``nodes_visited`` counts every expanded node, root included.  When the
    node budget is exhausted, ``truncated`` is set and the numbers are only
    useful for cost accounting, not statistics.
    """

    r_k: float
    level_sums: tuple[float, ...]
    nodes_visited: int
    truncated: bool


@dataclass(frozen=True)
class BatchRunResult:
    """Vectorized tree runs: one entry per independent tree."""

    values: np.ndarray       # (reps,) sampled values
    level_sums: np.ndarray   # (reps, k+1) per-level contributions
    nodes: np.ndarray        # (reps,) int64 node counts

    @property
    def total_nodes(self) -> int:
        return int(self.nodes.sum())


def _validate_depth(k: int) -> int:
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise ValueError(f"depth k must be a nonnegative integer, got {k!r}")
    return int(k)


def expected_node_count(spec: BranchingVectorSpec, k: int) -> float:
    """Expected nodes (= vector draws) for one exact sample: sum_j E[N]^j."""
    k = _validate_depth(k)
    mean_n = spec.n.mean()  # raises UnsupportedMomentError when infinite
    if mean_n == 1.0:
        return float(k + 1)
    return (mean_n ** (k + 1) - 1.0) / (mean_n - 1.0)


# ---------------------------------------------------------------------------
# Depth-first single runs
# ---------------------------------------------------------------------------


def _dfs(
    spec: BranchingVectorSpec,
    k: int,
    rng: np.random.Generator,
    node_budget: int,
    homogeneous: bool,
) -> TreeRunResult:
    # Explicit work stack instead of recursion: the budget is enforced per
    # node and deep or bushy trees cannot overflow the call stack.
    sums = [0.0] * (k + 1)
    comp = [0.0] * (k + 1)  # Kahan compensation per level
    stack: list[tuple[int, float]] = [(0, 1.0)]
    visited = 0
    truncated = False
    while stack:
        if visited >= node_budget:
            truncated = True
            break
        level, weight = stack.pop()
        q, n, c = sample_vector(spec, rng)
        visited += 1
        term = weight if homogeneous else q * weight
        y = term - comp[level]
        t = sums[level] + y
        comp[level] = (t - sums[level]) - y
        sums[level] = t
        if level < k:
            child = level + 1
            for i in range(n):
                stack.append((child, weight * c[i]))
    value = sums[k] if homogeneous else math.fsum(sums)
    return TreeRunResult(value, tuple(sums), visited, truncated)


def simulate_r_exact(
    spec: BranchingVectorSpec,
    k: int,
    rng: np.random.Generator,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> TreeRunResult:
    """Sample the depth-``k`` recursion value by explicit tree expansion."""
    k = _validate_depth(k)
    if node_budget < 1:
        raise ValueError(f"node_budget must be >= 1, got {node_budget}")
    if not spec.has_q:
        raise ValueError("homogeneous specs have no additive term; "
                         "use simulate_w_exact")
    return _dfs(spec, k, rng, node_budget, homogeneous=False)


def simulate_w_exact(
    spec: BranchingVectorSpec,
    k: int,
    rng: np.random.Generator,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> TreeRunResult:
    """Sample the homogeneous level-``k`` weight sum W(k).

    ``level_sums`` holds the per-level weight totals for diagnostics;
    ``r_k`` is the terminal-level sum.
    """
    k = _validate_depth(k)
    if node_budget < 1:
        raise ValueError(f"node_budget must be >= 1, got {node_budget}")
    if spec.variant != "homogeneous":
        raise ValueError("simulate_w_exact requires the homogeneous variant")
    return _dfs(spec, k, rng, node_budget, homogeneous=True)


# ---------------------------------------------------------------------------
# Level-synchronous batch engine
# ---------------------------------------------------------------------------


def _segment_sums(values: np.ndarray, counts: np.ndarray, trees: int) -> np.ndarray:
    # Per-tree sums of tree-contiguous node arrays; empty trees contribute 0.
    out = np.zeros(trees, dtype=values.dtype)
    if values.size == 0:
        return out
    occupied = counts > 0
    ends = np.cumsum(counts[occupied])
    starts = np.concatenate(([0], ends[:-1]))
    out[occupied] = np.add.reduceat(values, starts)
    return out


def _draw_level(
    spec: BranchingVectorSpec,
    rng: np.random.Generator,
    n_nodes: int,
    need_children: bool,
    homogeneous: bool,
):
    """Per-level draws in a fixed order: Q, then N, then the child weights.

    Terminal levels skip N and the weights entirely; the nodes still count
    as full vector draws, their unused components are simply never realized.
    """
    q = n = c = None
    if spec.variant == "quicksort":
        u = rng.random(n_nodes)
        q = divide_conquer_toll(u)
        if need_children:
            n = np.full(n_nodes, 2, dtype=np.int64)
            c = np.empty(2 * n_nodes)
            c[0::2] = u
            c[1::2] = 1.0 - u
    else:
        if not homogeneous:
            q = np.asarray(spec.q.sample(rng, n_nodes), dtype=float)
        if need_children:
            n = spec.n.sample(rng, n_nodes)
            c = np.asarray(spec.c.sample(rng, int(n.sum())), dtype=float)
    DRAW_COUNTER.add_vectors(n_nodes)
    return q, n, c


def _expand_chunk(
    spec: BranchingVectorSpec,
    k: int,
    trees: int,
    rng: np.random.Generator,
    homogeneous: bool,
    max_level_nodes: int,
) -> tuple[np.ndarray, np.ndarray]:
    level_sums = np.zeros((trees, k + 1))
    nodes = np.zeros(trees, dtype=np.int64)
    counts = np.ones(trees, dtype=np.int64)
    weights = np.ones(trees)
    for level in range(k + 1):
        n_nodes = weights.size
        if n_nodes == 0:
            break
        nodes += counts
        q, n, c = _draw_level(spec, rng, n_nodes, level < k, homogeneous)
        if homogeneous:
            contrib = weights
        else:
            contrib = q  # consumed here; reuse the buffer
            contrib *= weights
        level_sums[:, level] = _segment_sums(contrib, counts, trees)
        if level == k:
            break
        total_children = int(n.sum())
        if total_children > max_level_nodes:
            raise BudgetExceededError(
                f"level {level + 1} would hold {total_children} nodes, "
                f"above the cap of {max_level_nodes}; reduce the depth or "
                f"replicate count"
            )
        weights = np.repeat(weights, n)
        weights *= c
        counts = _segment_sums(n, counts, trees)
    return level_sums, nodes


def _chunk_size(spec: BranchingVectorSpec, k: int, reps: int) -> int:
    try:
        terminal = spec.n.mean() ** k
    except UnsupportedMomentError:
        return 1
    if not np.isfinite(terminal) or terminal > _CHUNK_TARGET_NODES:
        return 1
    return int(min(reps, max(1, _CHUNK_TARGET_NODES // max(terminal, 1.0)), 65536))


def _batch(
    spec: BranchingVectorSpec,
    k: int,
    reps: int,
    seed: int,
    homogeneous: bool,
    max_level_nodes: int,
) -> BatchRunResult:
    k = _validate_depth(k)
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    chunk = _chunk_size(spec, k, reps)
    all_sums = np.empty((reps, k + 1))
    all_nodes = np.empty(reps, dtype=np.int64)
    start = 0
    for idx, lo in enumerate(range(0, reps, chunk)):
        trees = min(chunk, reps - lo)
        stream = rngmod.substream(seed, rngmod.EXACT_STREAM, idx)
        sums, nodes = _expand_chunk(
            spec, k, trees, stream, homogeneous, max_level_nodes
        )
        all_sums[start : start + trees] = sums
        all_nodes[start : start + trees] = nodes
        start += trees
    values = all_sums[:, k] if homogeneous else all_sums.sum(axis=1)
    return BatchRunResult(values, all_sums, all_nodes)


def simulate_r_batch(
    spec: BranchingVectorSpec,
    k: int,
    reps: int,
    seed: int,
    max_level_nodes: int = _MAX_LEVEL_NODES,
) -> BatchRunResult:
    """Draw ``reps`` independent exact samples of the depth-``k`` value.

    Deterministic given ``(spec, k, reps, seed)``: each chunk of trees runs
    on its own derived substream, so results do not depend on scheduling.
    """
    if not spec.has_q:
        raise ValueError("homogeneous specs have no additive term; "
                         "use simulate_w_batch")
    return _batch(spec, k, reps, seed, False, max_level_nodes)


def simulate_w_batch(
    spec: BranchingVectorSpec,
    k: int,
    reps: int,
    seed: int,
    max_level_nodes: int = _MAX_LEVEL_NODES,
) -> BatchRunResult:
    """Draw ``reps`` independent samples of the homogeneous weight sum W(k)."""
    if spec.variant != "homogeneous":
        raise ValueError("simulate_w_batch requires the homogeneous variant")
    return _batch(spec, k, reps, seed, True, max_level_nodes)
