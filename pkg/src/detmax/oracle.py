"""Brute-force ground truth for small instances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from detmax import matroid as mt
from detmax.exchange_graph import Cycle, ExchangeGraph, enumerate_cycles, is_f_violating, log_f
from detmax.instance import Instance
from detmax.linalg import EPS_RANK, gram_build

MAX_GROUND = 20
MAX_BASES = 10**6
TIE_TOL = 1e-12


class GuardExceeded(RuntimeError):
    pass


def enumerate_bases(m: mt.Matroid, max_bases: int = MAX_BASES) -> Iterator[tuple[int, ...]]:
    """Every basis once, in lexicographic order, by backtracking on the independence oracle."""
    n = m.ground_size
    if n > MAX_GROUND:
        raise GuardExceeded(f"ground set of {n} elements exceeds the enumeration cap of {MAX_GROUND}")
    r = mt.rank(m)
    count = 0

    def completable(chosen: list[int], nxt: int) -> bool:
        # can chosen still grow to rank r using elements >= nxt?
        grown = list(chosen)
        for e in range(nxt, n):
            if len(grown) == r:
                break
            if m._independent(grown + [e]):
                grown.append(e)
        return len(grown) == r

    def walk(chosen: list[int], nxt: int):
        nonlocal count
        if len(chosen) == r:
            count += 1
            if count > max_bases:
                raise GuardExceeded(f"more than {max_bases} bases")
            yield tuple(chosen)
            return
        for e in range(nxt, n - (r - len(chosen)) + 1):
            cand = chosen + [e]
            if m._independent(cand) and completable(cand, e + 1):
                yield from walk(cand, e + 1)

    yield from walk([], 0)


def _bareiss_int(a: list[list[int]]) -> int:
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        pivot = a[k][k]
        for i in range(k + 1, n):
            row, lead = a[i], a[i][k]
            for j in range(k + 1, n):
                row[j] = (row[j] * pivot - lead * a[k][j]) // prev
        prev = pivot
    return sign * a[n - 1][n - 1]


def bareiss_det(mat) -> Fraction:
    """Exact determinant of a rational matrix by fraction-free elimination.

    Entries are brought to a common denominator so the elimination runs on
    integers, where every division is exact.
    """
    rows = [[Fraction(x) for x in row] for row in mat]
    n = len(rows)
    if n == 0:
        return Fraction(1)
    denom = math.lcm(*(x.denominator for row in rows for x in row))
    ints = [[int(x * denom) for x in row] for row in rows]
    return Fraction(_bareiss_int(ints), denom**n)


def exact_gram_det(vectors, members) -> Fraction:
    """``det(sum_{i in members} v_i v_i^T)`` with the float entries read as exact rationals."""
    vecs = np.asarray(vectors, dtype=float)
    d = vecs.shape[1]
    members = list(members)
    if not members:
        return Fraction(0) if d else Fraction(1)
    # floats are dyadic: one power-of-two denominator turns every coordinate into an integer
    fracs = [[Fraction(float(x)) for x in vecs[i]] for i in members]
    denom = max(f.denominator for row in fracs for f in row)
    rows = [[int(f * denom) for f in row] for row in fracs]
    gram = [[sum(row[a] * row[b] for row in rows) for b in range(d)] for a in range(d)]
    return Fraction(_bareiss_int(gram), denom ** (2 * d))


def _log_fraction(x: Fraction) -> float:
    if x <= 0:
        return -math.inf
    return math.log(x.numerator) - math.log(x.denominator)


@dataclass(frozen=True)
class OptResult:
    best_set: tuple[int, ...] | None
    log_det: float
    exact_det: Fraction | None = None
    bases_seen: int = 0


def brute_force_opt(
    instance: Instance, exact: bool = False, max_bases: int = MAX_BASES, eps_rank: float = EPS_RANK
) -> OptResult:
    """Maximum of ``det(V_S V_S^T)`` over all bases; the lexicographically first wins ties.

    Float mode treats log-dets within ``TIE_TOL`` as equal and uses the
    solver's singularity threshold; exact mode counts any positive rational
    determinant. ``log_det`` is ``-inf`` (and ``best_set`` is ``None``) when
    no basis spans.
    """
    V = instance.vectors
    best_set, best_log, best_exact = None, -math.inf, None
    seen = 0
    for basis in enumerate_bases(instance.matroid, max_bases):
        seen += 1
        if exact:
            det = exact_gram_det(V, basis)
            if det > 0 and (best_exact is None or det > best_exact):
                best_set, best_exact = basis, det
        else:
            val = gram_build(V, basis, eps_rank).log_det
            if val > best_log + TIE_TOL:
                best_set, best_log = basis, val
    if exact:
        best_log = _log_fraction(best_exact) if best_exact is not None else -math.inf
    return OptResult(best_set, best_log, best_exact, seen)


def is_minimal_violating(graph: ExchangeGraph, cycle: Cycle) -> bool:
    """``cycle`` violates and no f-violating cycle lives on a proper subset of its vertices."""
    if not is_f_violating(cycle):
        return False
    inner = cycle.vertex_set
    for other in enumerate_cycles(graph, cycle.half_len, within=inner):
        if other.vertex_set < inner and is_f_violating(other):
            return False
    return True


def log_opt_gap_bound(d: int, k: int) -> float:
    """``log(d^(4d) k^d f(2d))``: how far a locally optimal basis may sit below the optimum."""
    k = max(k, 1)
    return 4 * d * math.log(d) + d * math.log(k) + log_f(2 * d)
