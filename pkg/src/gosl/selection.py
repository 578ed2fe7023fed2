"""Query-batch selection: K-Medoids over propagated features plus baselines."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError
from .nn import row_entropy


@dataclass
class SelectionConfig:
    m: int = 48
    b: int = 8
    max_iters: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.b < 1:
            raise ConfigError("cluster count and batch size must be positive")


@dataclass(frozen=True)
class QueryBatch:
    nodes: tuple[int, ...]
    strategy_tag: str

    def __post_init__(self):
        if len(set(self.nodes)) != len(self.nodes):
            raise ConfigError("query batch contains duplicate nodes")


def pairwise_distances(rows: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix with an exactly-zero diagonal."""
    d = cdist(rows, rows)
    np.fill_diagonal(d, 0.0)
    return d


def _maxmin_init(dist: np.ndarray, m: int, rng: np.random.Generator) -> list[int]:
    # Greedy farthest-point seeding from a seeded random start point.
    n = dist.shape[0]
    medoids = [int(rng.integers(n))]
    min_d = dist[medoids[0]].copy()
    while len(medoids) < m:
        nxt = int(np.argmax(min_d))  # argmax ties -> lowest index
        medoids.append(nxt)
        min_d = np.minimum(min_d, dist[nxt])
    return medoids


def k_medoids(dist: np.ndarray, m: int, max_iters: int = 100, seed: int = 0,
              return_cost: bool = False):
    """Alternating (Voronoi-style) K-Medoids on a precomputed distance matrix.

    Points are assigned to the nearest medoid (ties to the lower medoid
    index); each medoid is replaced by its cluster's total-distance minimizer
    (ties to the lower point index). Stops at a fixed point or ``max_iters``.
    Returns sorted medoid indices; cost is non-increasing across iterations.
    """
    n = dist.shape[0]
    if m > n:
        raise ConfigError(f"asked for {m} medoids from {n} points")
    rng = np.random.default_rng(seed)
    medoids = sorted(_maxmin_init(dist, m, rng))
    cost = np.inf
    for _ in range(max_iters):
        cols = dist[:, medoids]
        assign = cols.argmin(axis=1)  # first minimum -> lowest medoid index
        new_medoids = []
        for j in range(m):
            members = np.flatnonzero(assign == j)
            if members.size == 0:
                new_medoids.append(medoids[j])
                continue
            within = dist[np.ix_(members, members)].sum(axis=0)
            new_medoids.append(int(members[int(np.argmin(within))]))
        new_medoids = sorted(new_medoids)
        new_cost = float(dist[:, new_medoids].min(axis=1).sum())
        if new_medoids == medoids:
            cost = new_cost
            break
        medoids, cost = new_medoids, new_cost
    medoids = np.array(sorted(medoids), dtype=int)
    return (medoids, cost) if return_cost else medoids


def kmedoids_cost(dist: np.ndarray, medoids) -> float:
    """Total distance of every point to its nearest medoid."""
    return float(dist[:, list(medoids)].min(axis=1).sum())


def _entropy_ranked(nodes: np.ndarray, probs: np.ndarray, b: int) -> list[int]:
    # Descending entropy, ties toward the lower node index.
    ent = row_entropy(probs[nodes])
    order = np.lexsort((nodes, -ent))
    return [int(n) for n in nodes[order][:b]]


def select_lego(hidden: np.ndarray, potential: np.ndarray, pool, probs: np.ndarray,
                cfg: SelectionConfig) -> QueryBatch:
    """Cluster potential-ID nodes and pick the most uncertain medoids.

    Shortfalls never error: fewer potential nodes than the batch size takes
    them all and tops up by uncertainty over the rest of the pool; an empty
    potential set degrades fully to the uncertainty strategy.
    """
    potential = np.sort(np.asarray(potential, dtype=int))
    pool = np.sort(np.fromiter((int(p) for p in pool), dtype=int))
    if potential.size <= cfg.b:
        chosen = [int(n) for n in potential]
        rest = np.setdiff1d(pool, potential)
        if len(chosen) < cfg.b and rest.size:
            chosen += _entropy_ranked(rest, probs, cfg.b - len(chosen))
        return QueryBatch(nodes=tuple(chosen), strategy_tag="lego")
    m_eff = min(cfg.m, potential.size)
    dist = pairwise_distances(hidden[potential])
    med = k_medoids(dist, m_eff, max_iters=cfg.max_iters, seed=cfg.seed)
    medoid_nodes = potential[med]
    chosen = _entropy_ranked(medoid_nodes, probs, min(cfg.b, m_eff))
    return QueryBatch(nodes=tuple(chosen), strategy_tag="lego")


def select_random(pool, b: int, seed: int) -> QueryBatch:
    """Uniform draw without replacement from the pool."""
    pool = np.sort(np.fromiter((int(p) for p in pool), dtype=int))
    if b > pool.size:
        warnings.warn(f"batch size {b} exceeds pool size {pool.size}; truncating")
        b = pool.size
    rng = np.random.default_rng(seed)
    picked = rng.choice(pool, size=b, replace=False)
    return QueryBatch(nodes=tuple(int(n) for n in picked), strategy_tag="random")


def select_uncertainty(pool, probs: np.ndarray, b: int) -> QueryBatch:
    """Top-b pool nodes by prediction entropy (ties to the lower index)."""
    pool = np.sort(np.fromiter((int(p) for p in pool), dtype=int))
    b = min(b, pool.size)
    return QueryBatch(nodes=tuple(_entropy_ranked(pool, probs, b)),
                      strategy_tag="uncertainty")
