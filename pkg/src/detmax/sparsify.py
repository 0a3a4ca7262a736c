"""Support restriction ahead of local search.

Frank-Wolfe maximizes the concave relaxation ``log det(sum_i x_i v_i v_i^T)``
over the matroid base polytope (a small ridge keeps boundary iterates
finite), and the support is then cut to ``r + d^2 + 3d`` elements that
include a spanning basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from detmax import matroid as mt
from detmax.instance import Instance
from detmax.linalg import EPS_RANK, factor_gram

RIDGE_SCALE = 1e-8
GAP_TOL = 1e-12
LINE_SEARCH_STEPS = 60


class NoSpanningBasis(ValueError):
    pass


@dataclass
class Relaxation:
    x: np.ndarray
    value: float  # log det(sum x_i v_i v_i^T), no ridge
    objective: list[float] = field(repr=False)  # ridged objective per iterate
    gap: float = math.inf
    iterations: int = 0


def default_budget(rank: int, dim: int) -> int:
    return rank + dim * dim + 3 * dim


def _weighted_gram(vectors: np.ndarray, x: np.ndarray) -> np.ndarray:
    return (vectors * x[:, None]).T @ vectors


def _logdet(mat: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(mat)
    return float(val) if sign > 0 else -math.inf


def _line_search(base: np.ndarray, direction: np.ndarray, hi: float) -> float:
    """Maximize the concave ``t -> log det(base + t direction)`` on ``[0, hi]`` by bisection on its slope."""

    def slope(t):
        mat = base + t * direction
        try:
            return float(np.trace(np.linalg.solve(mat, direction)))
        except np.linalg.LinAlgError:
            return -math.inf

    if slope(hi) >= 0:
        return hi
    if slope(0.0) <= 0:
        return 0.0
    lo = 0.0
    for _ in range(LINE_SEARCH_STEPS):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo


def frank_wolfe_relax(
    instance: Instance,
    iters: int = 500,
    start=None,
    step_rule: str = "fixed",
    ridge_scale: float = RIDGE_SCALE,
) -> Relaxation:
    """Frank-Wolfe on ``g(x) = log det(sum_i x_i v_i v_i^T + ridge I)`` over the base polytope.

    The linear maximization oracle is the matroid greedy algorithm on the
    gradient ``v_i^T M_x^{-1} v_i``. ``step_rule`` is ``"line-search"``
    (exact, along the segment) or ``"fixed"`` (``2/(t+2)``, halved until
    the objective does not drop). Iteration starts at the indicator of
    ``start`` (a spanning basis; found by matroid intersection if omitted).
    """
    V = instance.vectors
    n, d = V.shape
    m = instance.matroid
    if start is None:
        start = mt.linear_matroid_intersection_basis(m, V)
        if start is None:
            raise NoSpanningBasis("no basis spans R^d; the relaxation is -inf")
    x = np.zeros(n)
    x[list(start)] = 1.0
    ridge = ridge_scale * max(float(np.sum(V**2)) / d, 1e-300) * np.eye(d)

    mx = _weighted_gram(V, x) + ridge
    g = _logdet(mx)
    objective = [g]
    gap = math.inf
    t = 0
    for t in range(1, iters + 1):
        inv, _ = factor_gram(mx, 0.0)
        if inv is None:
            inv = np.linalg.pinv(mx)
        grad = np.einsum("ij,jk,ik->i", V, inv, V)
        vertex = mt.greedy_max_weight_basis(m, grad)
        s = np.zeros(n)
        s[list(vertex)] = 1.0
        gap = float(grad @ (s - x))
        if gap <= GAP_TOL:
            break
        direction = _weighted_gram(V, s - x)
        if step_rule == "fixed":
            gamma = 2.0 / (t + 2.0)
            while gamma > 1e-12 and _logdet(mx + gamma * direction) < g:
                gamma *= 0.5
            if _logdet(mx + gamma * direction) < g:
                gamma = 0.0
        elif step_rule == "line-search":
            gamma = _line_search(mx, direction, 1.0)
        else:
            raise ValueError(f"unknown step rule {step_rule!r}")
        if gamma > 0.0:
            cand = x + gamma * (s - x)
            cand_m = _weighted_gram(V, cand) + ridge
            cand_g = _logdet(cand_m)
            if cand_g >= g:
                x, mx, g = cand, cand_m, cand_g
        objective.append(g)
    x = np.clip(x, 0.0, 1.0)
    return Relaxation(x=x, value=_logdet(_weighted_gram(V, x)), objective=objective, gap=gap, iterations=t)


def select_support(instance: Instance, x, budget: int | None = None, eps_rank: float = EPS_RANK) -> tuple[int, ...]:
    """A spanning basis picked in decreasing-``x`` priority, topped up with the largest remaining ``x``."""
    x = np.asarray(x, dtype=float)
    n, d = instance.vectors.shape
    r = instance.rank
    budget = default_budget(r, d) if budget is None else budget
    if budget < r:
        raise ValueError(f"budget {budget} is below the matroid rank {r}")
    if n <= budget:
        return tuple(range(n))
    order = sorted(range(n), key=lambda e: (-x[e], e))
    basis = mt.linear_matroid_intersection_basis(instance.matroid, instance.vectors, order=order, eps_rank=eps_rank)
    if basis is None:
        basis = mt.extend_to_basis(instance.matroid, [], None, order)
    chosen = set(basis)
    for e in order:
        if len(chosen) >= budget:
            break
        chosen.add(e)
    return tuple(sorted(chosen))


def sparsify(instance: Instance, iters: int = 500, budget: int | None = None, start=None):
    """Returns ``(restricted instance, support, relaxation)``."""
    relax = frank_wolfe_relax(instance, iters, start=start)
    support = select_support(instance, relax.x, budget)
    return instance.restricted(support), support, relax
