"""Application reductions to determinant maximization, with native value oracles.

* Nash social welfare: item ``j`` given to player ``i`` becomes the vector
  ``sqrt(u_i(j)) e_i`` at index ``j*d + i``; one item per partition part.
* D-optimal design: candidates pass through unchanged.
* Network design: edges become columns of the reduced incidence matrix,
  so the objective counts spanning trees.
"""

from __future__ import annotations

import itertools
import math
from typing import Mapping, Sequence

import numpy as np

from detmax import matroid as mt
from detmax.instance import Instance, SchemaError

MAX_TREE_COUNT_VERTICES = 12


def _valuation_matrix(valuations) -> np.ndarray:
    u = np.asarray(valuations, dtype=float)
    if u.ndim != 2:
        raise ValueError("valuations must be a players x items matrix")
    if not np.all(np.isfinite(u)):
        raise ValueError("valuations must be finite")
    if np.any(u < 0):
        raise ValueError("valuations must be nonnegative")
    return u


def nsw_instance(valuations) -> Instance:
    u = _valuation_matrix(valuations)
    players, items = u.shape
    vectors = np.zeros((players * items, players))
    for j in range(items):
        for i in range(players):
            vectors[j * players + i, i] = math.sqrt(u[i, j])
    parts = [j for j in range(items) for _ in range(players)]
    matroid = mt.PartitionMatroid(tuple(parts), (1,) * items)
    return Instance(vectors, matroid, {"nsw": {"valuations": u.tolist()}})


def _allocation_list(allocation, items: int) -> list[int]:
    if isinstance(allocation, Mapping):
        missing = [j for j in range(items) if j not in allocation]
        if missing:
            raise ValueError(f"items {missing} are unassigned")
        return [int(allocation[j]) for j in range(items)]
    alloc = [int(p) for p in allocation]
    if len(alloc) != items:
        raise ValueError(f"allocation covers {len(alloc)} of {items} items")
    return alloc


def nsw_value(valuations, allocation) -> float:
    """Geometric mean of bundle values; ``allocation[j]`` is the player holding item ``j``."""
    u = _valuation_matrix(valuations)
    players, items = u.shape
    alloc = _allocation_list(allocation, items)
    bundles = [0.0] * players
    for j, p in enumerate(alloc):
        if not 0 <= p < players:
            raise ValueError(f"item {j} assigned to unknown player {p}")
        bundles[p] += u[p, j]
    if min(bundles) <= 0.0:
        return 0.0
    return math.exp(math.fsum(math.log(b) for b in bundles) / players)


def allocation_basis(players: int, allocation) -> tuple[int, ...]:
    """Element indices of the reduction basis that encodes ``allocation``."""
    alloc = [int(p) for p in allocation]
    return tuple(sorted(j * players + p for j, p in enumerate(alloc)))


def basis_allocation(players: int, basis) -> list[int]:
    out: dict[int, int] = {}
    for e in basis:
        out[e // players] = e % players
    return [out[j] for j in sorted(out)]


def dopt_instance(candidates, matroid: mt.Matroid | dict) -> Instance:
    if isinstance(matroid, dict):
        matroid = mt.matroid_from_dict(matroid, ground_size=len(candidates))
    return Instance(np.asarray(candidates, dtype=float), matroid)


def _check_graph(p: int, edges) -> list[tuple[int, int]]:
    if p < 1:
        raise ValueError("graph needs at least one vertex")
    out = []
    for a, b in edges:
        a, b = int(a), int(b)
        if not (0 <= a < p and 0 <= b < p):
            raise ValueError(f"edge ({a}, {b}) references a vertex outside 0..{p - 1}")
        if a == b:
            raise ValueError(f"self-loop at vertex {a}")
        out.append((a, b))
    return out


def _connected(p: int, edges: Sequence[tuple[int, int]]) -> bool:
    graph = mt.GraphicMatroid(tuple(range(p)), tuple(edges))
    return mt.rank(graph) == p - 1


def reduced_incidence_vectors(p: int, edges) -> np.ndarray:
    """Row ``e`` is edge ``e`` oriented low to high (+1 at the lower end), last vertex dropped."""
    edges = _check_graph(p, edges)
    vectors = np.zeros((len(edges), p - 1))
    for k, (a, b) in enumerate(edges):
        lo, hi = min(a, b), max(a, b)
        vectors[k, lo] = 1.0
        if hi < p - 1:
            vectors[k, hi] = -1.0
    return vectors


def network_instance(p: int, edges, matroid: mt.Matroid | dict | None = None) -> Instance:
    """Spanning-tree-count objective over a connected graph on vertices ``0..p-1``.

    Without a matroid the graphic matroid of the graph is used.
    """
    edges = _check_graph(p, edges)
    if p < 2:
        raise ValueError("network design needs at least two vertices")
    if not _connected(p, edges):
        raise ValueError("graph is disconnected")
    if matroid is None:
        matroid = mt.GraphicMatroid(tuple(range(p)), tuple(edges))
    elif isinstance(matroid, dict):
        matroid = mt.matroid_from_dict(matroid, ground_size=len(edges))
    app = {"network": {"p": p, "edges": [list(e) for e in edges], "matroid": matroid.to_dict()}}
    return Instance(reduced_incidence_vectors(p, edges), matroid, app)


def spanning_tree_count(p: int, edges, subset=None) -> int:
    """Number of spanning trees of ``(range(p), edges[subset])``, by enumeration."""
    if p > MAX_TREE_COUNT_VERTICES:
        raise ValueError(f"tree enumeration is limited to {MAX_TREE_COUNT_VERTICES} vertices")
    edges = _check_graph(p, edges)
    chosen = [edges[k] for k in (range(len(edges)) if subset is None else subset)]
    if p == 1:
        return 1
    graph = mt.GraphicMatroid(tuple(range(p)), tuple(chosen))
    return sum(1 for combo in itertools.combinations(range(len(chosen)), p - 1) if graph._independent(list(combo)))


def instance_from_app(app: dict) -> Instance:
    if not isinstance(app, dict) or len(app) != 1:
        raise SchemaError("app must hold exactly one of 'nsw' or 'network'")
    (kind, body), = app.items()
    if kind == "nsw":
        return nsw_instance(body["valuations"])
    if kind == "network":
        return network_instance(int(body["p"]), body["edges"], body.get("matroid"))
    raise SchemaError(f"unknown app {kind!r}")
