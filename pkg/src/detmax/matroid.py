"""Matroid independence oracles and exchange machinery.

Five kinds are supported: uniform, partition, graphic, linear and
restriction. Every tie is broken by ascending element index unless a
caller passes an explicit priority ``order``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from detmax.linalg import EPS_RANK, as_vectors, is_full_column_rank


class MatroidError(ValueError):
    pass


class Matroid:
    """Base class. Subclasses implement ``_independent`` on a checked index list."""

    ground_size: int
    kind: str = ""

    def _independent(self, s: list[int]) -> bool:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class UniformMatroid(Matroid):
    ground_size: int
    rank: int
    kind: str = field(default="uniform", init=False)

    def __post_init__(self):
        if self.rank < 0 or self.ground_size < 0:
            raise MatroidError("uniform matroid needs nonnegative size and rank")

    def _independent(self, s):
        return len(s) <= self.rank

    def to_dict(self):
        return {"kind": "uniform", "n": self.ground_size, "rank": self.rank}


@dataclass(frozen=True)
class PartitionMatroid(Matroid):
    """``part_of[e]`` names the part of element ``e``; ``capacities[p]`` bounds part ``p``."""

    part_of: tuple[int, ...]
    capacities: tuple[int, ...]
    kind: str = field(default="partition", init=False)

    def __post_init__(self):
        object.__setattr__(self, "part_of", tuple(int(p) for p in self.part_of))
        object.__setattr__(self, "capacities", tuple(int(c) for c in self.capacities))
        if any(c < 0 for c in self.capacities):
            raise MatroidError("partition capacities must be nonnegative")
        if any(p < 0 or p >= len(self.capacities) for p in self.part_of):
            raise MatroidError("every element must be assigned to a declared part")

    @property
    def ground_size(self) -> int:
        return len(self.part_of)

    def _independent(self, s):
        counts = [0] * len(self.capacities)
        for e in s:
            p = self.part_of[e]
            counts[p] += 1
            if counts[p] > self.capacities[p]:
                return False
        return True

    def to_dict(self):
        return {"kind": "partition", "parts": list(self.part_of), "capacities": list(self.capacities)}


@dataclass(frozen=True)
class GraphicMatroid(Matroid):
    vertices: tuple[Hashable, ...]
    edges: tuple[tuple[Hashable, Hashable], ...]
    kind: str = field(default="graphic", init=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple((a, b) for a, b in self.edges))
        known = set(self.vertices)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise MatroidError(f"edge ({a!r}, {b!r}) references an undeclared vertex")

    @property
    def ground_size(self) -> int:
        return len(self.edges)

    def _independent(self, s):
        parent: dict = {}

        def find(x):
            root = x
            while parent.get(root, root) != root:
                root = parent[root]
            while parent.get(x, x) != root:
                parent[x], x = root, parent[x]
            return root

        for e in s:
            a, b = self.edges[e]
            ra, rb = find(a), find(b)
            if ra == rb:
                return False
            parent[ra] = rb
        return True

    def to_dict(self):
        return {"kind": "graphic", "vertices": list(self.vertices), "edges": [list(e) for e in self.edges]}


@dataclass(frozen=True, eq=False)
class LinearMatroid(Matroid):
    vectors: np.ndarray
    eps_rank: float = EPS_RANK
    kind: str = field(default="linear", init=False)

    def __post_init__(self):
        object.__setattr__(self, "vectors", as_vectors(self.vectors))

    @property
    def ground_size(self) -> int:
        return self.vectors.shape[0]

    def _independent(self, s):
        if len(s) > self.vectors.shape[1]:
            return False
        return is_full_column_rank(self.vectors[s].T, self.eps_rank)

    def to_dict(self):
        return {"kind": "linear", "vectors": self.vectors.tolist()}


@dataclass(frozen=True, eq=False)
class RestrictionMatroid(Matroid):
    """``inner`` restricted to ``support``; elements outside it are loops."""

    inner: Matroid
    support: frozenset[int]
    kind: str = field(default="restriction", init=False)

    def __post_init__(self):
        support = frozenset(int(e) for e in self.support)
        if any(e < 0 or e >= self.inner.ground_size for e in support):
            raise MatroidError("restriction support must lie in the inner ground set")
        object.__setattr__(self, "support", support)

    @property
    def ground_size(self) -> int:
        return self.inner.ground_size

    def _independent(self, s):
        return all(e in self.support for e in s) and self.inner._independent(s)

    def to_dict(self):
        return {"kind": "restriction", "inner": self.inner.to_dict(), "support": sorted(self.support)}


def matroid_from_dict(doc: dict, ground_size: int | None = None) -> Matroid:
    try:
        kind = doc["kind"]
        if kind == "uniform":
            n = doc.get("n", ground_size)
            if n is None:
                raise MatroidError("uniform matroid needs 'n'")
            return UniformMatroid(int(n), int(doc["rank"]))
        if kind == "partition":
            return PartitionMatroid(tuple(doc["parts"]), tuple(doc["capacities"]))
        if kind == "graphic":
            return GraphicMatroid(tuple(doc["vertices"]), tuple(tuple(e) for e in doc["edges"]))
        if kind == "linear":
            return LinearMatroid(np.asarray(doc["vectors"], dtype=float))
        if kind == "restriction":
            return RestrictionMatroid(matroid_from_dict(doc["inner"], ground_size), frozenset(doc["support"]))
    except (KeyError, TypeError) as exc:
        raise MatroidError(f"malformed matroid description: {exc!r}") from exc
    raise MatroidError(f"unknown matroid kind {doc.get('kind')!r}")


def _checked(m: Matroid, s: Iterable[int]) -> list[int]:
    out = [int(e) for e in s]
    for e in out:
        if e < 0 or e >= m.ground_size:
            raise MatroidError(f"index {e} out of range for ground set of size {m.ground_size}")
    if len(set(out)) != len(out):
        raise MatroidError("index set contains duplicates")
    return out


def is_independent(m: Matroid, s: Iterable[int]) -> bool:
    return m._independent(_checked(m, s))


def rank(m: Matroid, s: Iterable[int] | None = None) -> int:
    """Size of a maximum independent subset of ``s`` (whole ground set by default)."""
    items = range(m.ground_size) if s is None else sorted(_checked(m, s))
    chosen: list[int] = []
    for e in items:
        if m._independent(chosen + [e]):
            chosen.append(e)
    return len(chosen)


def is_basis(m: Matroid, s: Iterable[int]) -> bool:
    s = _checked(m, s)
    return m._independent(s) and len(s) == rank(m)


def extend_to_basis(
    m: Matroid, s: Iterable[int], pool: Iterable[int] | None = None, order: Sequence[int] | None = None
) -> tuple[int, ...]:
    """Greedily grow independent ``s`` into a basis of ``m`` restricted to ``pool``.

    Candidates are scanned in ``order`` (ascending index by default).
    """
    chosen = _checked(m, s)
    if not m._independent(chosen):
        raise MatroidError("cannot extend a dependent set")
    pool_set = set(range(m.ground_size)) if pool is None else set(_checked(m, pool))
    if not set(chosen) <= pool_set:
        raise MatroidError("pool must contain s")
    scan = sorted(pool_set) if order is None else [e for e in order if e in pool_set]
    members = set(chosen)
    for e in scan:
        if e not in members and m._independent(chosen + [e]):
            chosen.append(e)
            members.add(e)
    return tuple(sorted(chosen))


def greedy_max_weight_basis(m: Matroid, weights: Sequence[float]) -> tuple[int, ...]:
    """Maximum-weight basis; equal weights fall back to ascending index."""
    order = sorted(range(m.ground_size), key=lambda e: (-float(weights[e]), e))
    return extend_to_basis(m, [], None, order)


def basis_exchange_bijection(m: Matroid, s: Iterable[int], t: Iterable[int]) -> dict[int, int]:
    """Bijection ``h: s -> t`` with ``s - x + h(x)`` a basis for every ``x``.

    Realized as the lexicographically smallest perfect matching in the
    bipartite graph joining ``x in s-t`` to ``y in t-s`` when the single swap
    stays independent.
    """
    s = _checked(m, s)
    t = _checked(m, t)
    if not is_basis(m, s) or not is_basis(m, t):
        raise MatroidError("both arguments must be bases")
    s_set, t_set = set(s), set(t)
    mapping = {x: x for x in sorted(s_set & t_set)}
    left = sorted(s_set - t_set)
    right = sorted(t_set - s_set)
    adj = {x: [y for y in right if m._independent([e for e in s if e != x] + [y])] for x in left}

    def perfect(xs: list[int], free: set[int]) -> bool:
        """Kuhn matching of ``xs`` into ``free``."""
        match_right: dict[int, int] = {}

        def augment(x, seen):
            for y in adj[x]:
                if y in free and y not in seen:
                    seen.add(y)
                    if y not in match_right or augment(match_right[y], seen):
                        match_right[y] = x
                        return True
            return False

        return all(augment(x, set()) for x in xs)

    # lexicographically smallest matching: fix partners one by one
    free = set(right)
    for k, x in enumerate(left):
        for y in adj[x]:
            if y in free and perfect(left[k + 1 :], free - {y}):
                mapping[x] = y
                free.discard(y)
                break
        else:
            raise RuntimeError("no exchange bijection found between two bases; oracle is not a matroid")
    return dict(sorted(mapping.items()))


def _augmenting_path(m1: Matroid, m2: Matroid, current: list[int], order: Sequence[int]) -> list[int] | None:
    """Shortest augmenting path for the intersection of ``m1`` and ``m2``."""
    in_set = set(current)
    outside = [e for e in order if e not in in_set]
    sources = [x for x in outside if m1._independent(current + [x])]
    sinks = {x for x in outside if m2._independent(current + [x])}
    inside = [e for e in order if e in in_set]

    parent: dict[int, int | None] = {}
    queue: deque[int] = deque()
    for x in sources:
        parent[x] = None
        queue.append(x)
    while queue:
        node = queue.popleft()
        if node in sinks:
            path = [node]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        if node in in_set:
            # y -> x when current - y + x stays independent in m1
            base = [e for e in current if e != node]
            for x in outside:
                if x not in parent and m1._independent(base + [x]):
                    parent[x] = node
                    queue.append(x)
        else:
            # x -> y when current - y + x stays independent in m2
            for y in inside:
                if y not in parent and m2._independent([e for e in current if e != y] + [node]):
                    parent[y] = node
                    queue.append(y)
    return None


def matroid_intersection(m1: Matroid, m2: Matroid, order: Sequence[int] | None = None) -> tuple[int, ...]:
    """Maximum common independent set by repeated shortest augmenting paths."""
    if m1.ground_size != m2.ground_size:
        raise MatroidError("matroids must share a ground set")
    order = list(range(m1.ground_size)) if order is None else list(order)
    current: list[int] = []
    while True:
        path = _augmenting_path(m1, m2, current, order)
        if path is None:
            return tuple(sorted(current))
        flip = set(path)
        current = [e for e in current if e not in flip] + [e for e in path if e not in current]


def linear_matroid_intersection_basis(
    m: Matroid, vectors, order: Sequence[int] | None = None, eps_rank: float = EPS_RANK
) -> tuple[int, ...] | None:
    """A basis of ``m`` whose vectors span ``R^d``, or ``None`` if there is none."""
    lin = LinearMatroid(as_vectors(vectors), eps_rank)
    if lin.ground_size != m.ground_size:
        raise MatroidError("vector count must match the matroid ground set")
    common = matroid_intersection(m, lin, order)
    if len(common) < lin.vectors.shape[1]:
        return None
    return extend_to_basis(m, common, None, order)
