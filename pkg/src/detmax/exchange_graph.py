"""Exchange graph of a spanning basis and the search for f-violating cycles.

Vertices are element indices. Backward arcs run from ``v in S`` to
``u not in S`` when ``S - v + u`` is independent in the matroid; they weigh
zero. Each spanning swap ``S - v + u`` gives up to two forward arcs
``u -> v``:

* ``fwd1`` with weight ``-log |<u, v>_S|``
* ``fwd2`` with weight ``-1/2 log((1 + |u|_S^2)(1 - |v|_S^2))``

A forward arc whose weight would be ``+inf`` is simply not stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from detmax import matroid as mt
from detmax.instance import Instance
from detmax.linalg import EPS_RANK, GramState, SingularGramError, gram_build, member_complements

BACKWARD = "backward"
FWD1 = "fwd1"
FWD2 = "fwd2"
MAX_ENUM_VERTICES = 20


@lru_cache(maxsize=None)
def log_f(i: int) -> float:
    """``log f(i)`` where ``f(1) = 2`` and ``f(i) = (i!)^11`` for ``i >= 2``."""
    if i < 1:
        raise ValueError("f is defined on positive integers")
    if i == 1:
        return math.log(2.0)
    return 11.0 * math.lgamma(i + 1)


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    kind: str
    weight: float


@dataclass(frozen=True)
class Cycle:
    """Alternating cycle ``u0 -> v0 -> u1 -> v1 -> ... -> v_{l-1} -> u0``.

    ``vertices`` lists ``u0, v0, u1, v1, ...`` (outside vertices at even
    positions); ``kinds[k]``/``forward_weights[k]`` describe the forward
    arc ``u_k -> v_k``.
    """

    vertices: tuple[int, ...]
    kinds: tuple[str, ...]
    forward_weights: tuple[float, ...]

    @property
    def weight(self) -> float:
        return math.fsum(self.forward_weights)

    @property
    def half_len(self) -> int:
        return len(self.kinds)

    @property
    def length(self) -> int:
        return 2 * len(self.kinds)

    @property
    def vertex_set(self) -> frozenset[int]:
        return frozenset(self.vertices)

    @property
    def added(self) -> tuple[int, ...]:
        return tuple(sorted(self.vertices[0::2]))

    @property
    def removed(self) -> tuple[int, ...]:
        return tuple(sorted(self.vertices[1::2]))

    @property
    def arcs(self) -> list[Arc]:
        out = []
        ell = self.half_len
        for k in range(ell):
            u, v = self.vertices[2 * k], self.vertices[2 * k + 1]
            out.append(Arc(u, v, self.kinds[k], self.forward_weights[k]))
            out.append(Arc(v, self.vertices[(2 * k + 2) % (2 * ell)], BACKWARD, 0.0))
        return out

    def canonical(self) -> "Cycle":
        """Rotate so the smallest outside vertex comes first."""
        outs = self.vertices[0::2]
        k = outs.index(min(outs))
        return Cycle(
            self.vertices[2 * k :] + self.vertices[: 2 * k],
            self.kinds[k:] + self.kinds[:k],
            self.forward_weights[k:] + self.forward_weights[:k],
        )

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "kinds": list(self.kinds),
            "weight_ln": self.weight,
            "arcs": self.length,
        }


def is_f_violating(c: Cycle) -> bool:
    return c.weight < -log_f(c.half_len)


def violation_slack(c: Cycle) -> float:
    """``w(C) + log f(|C|/2)``; negative exactly when ``c`` is f-violating."""
    return c.weight + log_f(c.half_len)


@dataclass(frozen=True, eq=False)
class ExchangeGraph:
    basis: tuple[int, ...]
    outside: tuple[int, ...]
    fwd1: dict[tuple[int, int], float]
    fwd2: dict[tuple[int, int], float]
    backward: frozenset[tuple[int, int]]
    gram: GramState

    @property
    def dim(self) -> int:
        return self.gram.dim

    @property
    def n_vertices(self) -> int:
        return len(self.basis) + len(self.outside)

    def forward(self, kind: str) -> dict[tuple[int, int], float]:
        return self.fwd1 if kind == FWD1 else self.fwd2

    def arcs(self) -> Iterator[Arc]:
        for (u, v), w in sorted(self.fwd1.items()):
            yield Arc(u, v, FWD1, w)
        for (u, v), w in sorted(self.fwd2.items()):
            yield Arc(u, v, FWD2, w)
        for v, u in sorted(self.backward):
            yield Arc(v, u, BACKWARD, 0.0)

    def cycle_weight(self, c: Cycle) -> float:
        """Weight of ``c`` recomputed from this graph's arcs (raises ``KeyError`` if an arc is missing)."""
        total = []
        for arc in c.arcs:
            if arc.kind == BACKWARD:
                if (arc.tail, arc.head) not in self.backward:
                    raise KeyError((arc.tail, arc.head))
            else:
                total.append(self.forward(arc.kind)[(arc.tail, arc.head)])
        return math.fsum(total)

    def to_json_dict(self) -> dict:
        """Adjacency document for debugging."""
        return {
            "basis": list(self.basis),
            "outside": list(self.outside),
            "log_det_ln": self.gram.log_det,
            "arcs": [{"from": a.tail, "to": a.head, "kind": a.kind, "weight_ln": a.weight} for a in self.arcs()],
        }


def forward_weights(
    ip: float, nu: float, nv: float, complement: float | None = None
) -> tuple[float | None, float | None]:
    """Forward arc weights from ``<u,v>_S``, ``|u|_S^2``, ``|v|_S^2``; ``None`` marks an absent arc.

    ``complement`` overrides ``1 - nv`` when a more accurate value is known.
    """
    w1 = -math.log(abs(ip)) if ip != 0.0 else None
    rest = 1.0 - nv if complement is None else complement
    second = (1.0 + max(nu, 0.0)) * max(rest, 0.0)
    w2 = -0.5 * math.log(second) if second > 0.0 else None
    return w1, w2


def build(instance: Instance, s, gram: GramState | None = None, eps_rank: float = EPS_RANK) -> ExchangeGraph:
    basis = tuple(sorted(int(e) for e in s))
    if not mt.is_basis(instance.matroid, basis):
        raise mt.MatroidError("exchange graph needs a basis of the matroid")
    if gram is None:
        gram = gram_build(instance.vectors, basis, eps_rank)
    inv = gram.require_inverse()
    in_set = set(basis)
    outside = tuple(e for e in range(instance.n) if e not in in_set)

    V = instance.vectors
    fwd1: dict[tuple[int, int], float] = {}
    fwd2: dict[tuple[int, int], float] = {}
    if outside:
        Vout = V[list(outside)]
        Vin = V[list(basis)]
        ips = Vout @ inv @ Vin.T
        nus = np.einsum("ij,jk,ik->i", Vout, inv, Vout)
        nvs = np.einsum("ij,jk,ik->i", Vin, inv, Vin)
        comps = member_complements(gram, Vin)
        for a, u in enumerate(outside):
            for b, v in enumerate(basis):
                ip, nu, nv, comp = float(ips[a, b]), float(nus[a]), float(nvs[b]), float(comps[b])
                ratio = ip * ip + (1.0 + max(nu, 0.0)) * comp
                if ratio <= eps_rank:
                    continue
                w1, w2 = forward_weights(ip, nu, nv, comp)
                if w1 is not None:
                    fwd1[(u, v)] = w1
                if w2 is not None:
                    fwd2[(u, v)] = w2

    backward = set()
    for v in basis:
        rest = [e for e in basis if e != v]
        for u in outside:
            if instance.matroid._independent(rest + [u]):
                backward.add((v, u))
    return ExchangeGraph(basis, outside, fwd1, fwd2, frozenset(backward), gram)


# ---------------------------------------------------------------------------
# cycle search


def _rank_key(c: Cycle) -> tuple:
    return (violation_slack(c), c.vertices, c.kinds)


def _decompose_closed_walk(arcs: list[Arc], outside: set[int]) -> list[Cycle]:
    """Split a closed walk into simple cycles."""
    cycles = []
    stack: list[Arc] = []
    tail_pos = {arcs[0].tail: 0}
    for arc in arcs:
        stack.append(arc)
        h = arc.head
        if h in tail_pos:
            p = tail_pos[h]
            loop = stack[p:]
            del stack[p:]
            for a in loop:
                tail_pos.pop(a.tail, None)
            tail_pos[h] = p
            cycles.append(loop)
        else:
            tail_pos[h] = len(stack)
    out = []
    for loop in cycles:
        k = next(i for i, a in enumerate(loop) if a.tail in outside)
        loop = loop[k:] + loop[:k]
        fwd = loop[0::2]
        verts = tuple(x for a in fwd for x in (a.tail, a.head))
        out.append(Cycle(verts, tuple(a.kind for a in fwd), tuple(a.weight for a in fwd)).canonical())
    return out


def _best_violating_cycle(g: ExchangeGraph, allowed: frozenset[int], max_half_len: int) -> Cycle | None:
    """Most violated f-violating cycle inside ``allowed`` with at most ``2 * max_half_len`` arcs.

    For each half-length ``l`` the minimum-weight closed walk of exactly
    ``2l`` arcs through every outside start is found by a layered min-plus
    recurrence; violating walks are split into simple cycles, at least one
    of which violates its own threshold because ``f`` is super-multiplicative.
    The first ``l`` that yields anything wins.
    """
    outs = [u for u in g.outside if u in allowed]
    ins = [v for v in g.basis if v in allowed]
    if not outs or not ins or max_half_len < 1:
        return None
    out_idx = {u: a for a, u in enumerate(outs)}
    in_idx = {v: b for b, v in enumerate(ins)}
    nu, nv = len(outs), len(ins)

    w1 = np.full((nu, nv), np.inf)
    w2 = np.full((nu, nv), np.inf)
    for (u, v), w in g.fwd1.items():
        if u in out_idx and v in in_idx:
            w1[out_idx[u], in_idx[v]] = w
    for (u, v), w in g.fwd2.items():
        if u in out_idx and v in in_idx:
            w2[out_idx[u], in_idx[v]] = w
    wf = np.minimum(w1, w2)
    use_second = w2 < w1
    wb = np.full((nv, nu), np.inf)
    for v, u in g.backward:
        if u in out_idx and v in in_idx:
            wb[in_idx[v], out_idx[u]] = 0.0
    if not np.isfinite(wf).any() or not np.isfinite(wb).any():
        return None

    outside_set = set(outs)
    starts = np.arange(nu)
    for ell in range(1, min(max_half_len, nu, nv) + 1):
        dist = np.full((nu, nu), np.inf)
        dist[starts, starts] = 0.0
        preds = []
        for _ in range(ell):
            via = dist[:, :, None] + wf[None, :, :]
            pf = via.argmin(axis=1)
            reach = via.min(axis=1)
            via = reach[:, :, None] + wb[None, :, :]
            pb = via.argmin(axis=1)
            dist = via.min(axis=1)
            preds.append((pf, pb))
        closed = dist[starts, starts]
        threshold = -log_f(ell)
        found = []
        for s in np.flatnonzero(closed < threshold):
            walk: list[Arc] = []
            x = s
            for pf, pb in reversed(preds):
                b = pb[s, x]
                a = pf[s, b]
                kind = FWD2 if use_second[a, b] else FWD1
                walk.append(Arc(ins[b], outs[x], BACKWARD, 0.0))
                walk.append(Arc(outs[a], ins[b], kind, float(wf[a, b])))
                x = a
            walk.reverse()
            found.extend(c for c in _decompose_closed_walk(walk, outside_set) if is_f_violating(c))
        if found:
            return min(found, key=_rank_key)
    return None


def find_min_f_violating_cycle(g: ExchangeGraph, max_half_len: int | None = None) -> Cycle | None:
    """A minimal f-violating cycle with at most ``2 * max_half_len`` arcs, or ``None``.

    After a violating cycle is found, each of its vertices is dropped in turn
    and the induced subgraph is searched again; any hit has a strictly
    smaller vertex set and replaces the current cycle. When no vertex can be
    dropped, no f-violating cycle lives on a proper subset of the vertices.
    """
    limit = g.dim if max_half_len is None else max_half_len
    best = _best_violating_cycle(g, frozenset(g.basis) | frozenset(g.outside), limit)
    if best is None:
        return None
    while True:
        smaller = None
        for x in sorted(best.vertex_set):
            cand = _best_violating_cycle(g, best.vertex_set - {x}, best.half_len - 1)
            if cand is not None and (smaller is None or _rank_key(cand) < _rank_key(smaller)):
                smaller = cand
        if smaller is None:
            return best
        best = smaller


def enumerate_cycles(
    g: ExchangeGraph, max_half_len: int | None = None, within: frozenset[int] | None = None
) -> list[Cycle]:
    """Every simple alternating cycle with at most ``2 * max_half_len`` arcs.

    Parallel ``fwd1``/``fwd2`` arcs give distinct cycles. Exponential; meant
    as a test oracle on small graphs.
    """
    if g.n_vertices > MAX_ENUM_VERTICES and within is None:
        raise ValueError(f"graph has {g.n_vertices} vertices; enumeration is capped at {MAX_ENUM_VERTICES}")
    limit = g.dim if max_half_len is None else max_half_len
    keep = (lambda e: True) if within is None else (lambda e: e in within)
    outs = [u for u in g.outside if keep(u)]
    ins = [v for v in g.basis if keep(v)]
    succ_fwd: dict[int, list[tuple[int, str, float]]] = {u: [] for u in outs}
    for kind in (FWD1, FWD2):
        for (u, v), w in g.forward(kind).items():
            if keep(u) and keep(v):
                succ_fwd[u].append((v, kind, w))
    for u in succ_fwd:
        succ_fwd[u].sort(key=lambda t: (t[0], t[1]))
    succ_back: dict[int, list[int]] = {v: [] for v in ins}
    for v, u in g.backward:
        if keep(u) and keep(v):
            succ_back[v].append(u)
    for v in succ_back:
        succ_back[v].sort()

    cycles: list[Cycle] = []

    def extend(start, verts, kinds, weights):
        u = verts[-1]
        for v, kind, w in succ_fwd[u]:
            if v in verts:
                continue
            nverts, nkinds, nweights = verts + (v,), kinds + (kind,), weights + (w,)
            for u2 in succ_back[v]:
                if u2 == start:
                    cycles.append(Cycle(nverts, nkinds, nweights))
                elif u2 > start and u2 not in nverts and len(nkinds) < limit:
                    extend(start, nverts + (u2,), nkinds, nweights)

    for u0 in outs:
        extend(u0, (u0,), (), ())
    return cycles
