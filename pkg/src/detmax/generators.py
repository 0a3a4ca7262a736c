"""Seeded instance generators.

All randomness comes from ``numpy.random.default_rng(seed)`` (PCG64), and
real coordinates are rounded to 6 decimals so files round-trip exactly.
"""

from __future__ import annotations

import numpy as np

from detmax import apps
from detmax import matroid as mt
from detmax.instance import Instance

DECIMALS = 6
KINDS = ("random-uniform", "random-partition", "nsw", "network", "adversarial-collinear")


def _gaussian(rng, n: int, d: int) -> np.ndarray:
    return np.round(rng.standard_normal((n, d)), DECIMALS)


def random_uniform(n: int, d: int, r: int, seed: int = 0) -> Instance:
    if not 0 <= r <= n or d < 1:
        raise ValueError("need d >= 1 and 0 <= r <= n")
    rng = np.random.default_rng(seed)
    return Instance(_gaussian(rng, n, d), mt.UniformMatroid(n, r))


def random_partition(n: int, d: int, parts: int, capacity: int = 1, seed: int = 0) -> Instance:
    """Elements assigned to ``parts`` parts round-robin after a shuffle; every part holds ``capacity``."""
    if parts < 1 or n < parts or capacity < 0:
        raise ValueError("need 1 <= parts <= n and capacity >= 0")
    rng = np.random.default_rng(seed)
    vectors = _gaussian(rng, n, d)
    part_of = rng.permutation(np.arange(n) % parts)
    return Instance(vectors, mt.PartitionMatroid(tuple(int(p) for p in part_of), (capacity,) * parts))


def nsw(players: int, items: int, seed: int = 0, max_value: int = 9) -> Instance:
    """Integer valuations drawn uniformly from ``0..max_value``."""
    if players < 1 or items < 1:
        raise ValueError("need at least one player and one item")
    rng = np.random.default_rng(seed)
    return apps.nsw_instance(rng.integers(0, max_value + 1, size=(players, items)))


def network(p: int, extra: int = 2, budget: int | None = None, seed: int = 0) -> Instance:
    """Random spanning tree plus ``extra`` distinct edges; pick ``budget`` edges (default ``p - 1 + extra // 2``)."""
    if p < 2:
        raise ValueError("need at least two vertices")
    rng = np.random.default_rng(seed)
    order = rng.permutation(p)
    edges = set()
    for k in range(1, p):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    candidates = [(a, b) for a in range(p) for b in range(a + 1, p) if (a, b) not in edges]
    take = min(extra, len(candidates))
    for idx in rng.choice(len(candidates), size=take, replace=False) if take else []:
        edges.add(candidates[int(idx)])
    edges = sorted(edges)
    budget = p - 1 + take // 2 if budget is None else budget
    if not p - 1 <= budget <= len(edges):
        raise ValueError(f"budget must lie in [{p - 1}, {len(edges)}]")
    return apps.network_instance(p, edges, mt.UniformMatroid(len(edges), budget))


def adversarial_collinear(d: int, n: int | None = None, seed: int = 0) -> Instance:
    """Nonzero multiples of one direction; for ``d >= 2`` no basis spans, so the optimum is 0."""
    n = n if n is not None else 2 * d + 1
    rng = np.random.default_rng(seed)
    direction = np.round(rng.standard_normal(d), DECIMALS)
    if not np.any(direction):
        direction[0] = 1.0
    # power-of-two multipliers keep the rows exactly collinear in binary
    scales = rng.choice([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 4.0], size=n)
    return Instance(np.outer(scales, direction), mt.UniformMatroid(n, min(d, n)))


def generate(kind: str, seed: int = 0, **params) -> Instance:
    builders = {
        "random-uniform": random_uniform,
        "random-partition": random_partition,
        "nsw": nsw,
        "network": network,
        "adversarial-collinear": adversarial_collinear,
    }
    if kind not in builders:
        raise ValueError(f"unknown generator {kind!r}; choose from {', '.join(KINDS)}")
    return builders[kind](seed=seed, **{k: v for k, v in params.items() if v is not None})
