"""Dense Gram-matrix kernels.

Everything here works on ``d x d`` matrices ``M = sum_{i in S} v_i v_i^T``
and keeps determinants in natural-log units, since the local search only
ever compares ratios.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import linalg as sla

EPS_RANK = 1e-9
REFACTOR_EVERY = 50
DRIFT_TOL = 1e-6
PERMANENT_MAX_ORDER = 20


class SingularGramError(ValueError):
    """An operation needed an invertible Gram matrix and did not get one."""


@dataclass(frozen=True, eq=False)
class GramState:
    """Gram matrix of a member multiset with cached inverse and log-determinant.

    ``inv`` is ``None`` exactly when the Gram matrix is numerically singular,
    in which case ``log_det`` is ``-inf``.
    """

    dim: int
    members: tuple[int, ...]
    gram: np.ndarray
    inv: np.ndarray | None
    log_det: float
    swaps_since_refactor: int = 0

    @property
    def singular(self) -> bool:
        return self.inv is None

    def require_inverse(self) -> np.ndarray:
        if self.inv is None:
            raise SingularGramError("Gram matrix is singular")
        return self.inv


def as_vectors(vectors) -> np.ndarray:
    """Stack a sequence of equal-length vectors into an ``(n, d)`` float array."""
    if isinstance(vectors, np.ndarray):
        arr = np.asarray(vectors, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-d array of vectors, got shape {arr.shape}")
    else:
        rows = [list(v) for v in vectors]
        if rows and len({len(r) for r in rows}) != 1:
            raise ValueError("dimension mismatch among vectors")
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2:
            raise ValueError("vectors must be a non-empty list of equal-length sequences")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vectors must have finite entries")
    return arr


def factor_gram(gram: np.ndarray, eps_rank: float = EPS_RANK) -> tuple[np.ndarray | None, float]:
    """Invert a symmetric PSD matrix through its Cholesky (LDL^T) factorization.

    A pivot below ``eps_rank * trace / d`` marks the matrix singular and
    ``(None, -inf)`` is returned.
    """
    d = gram.shape[0]
    scale = float(np.trace(gram)) / d
    if not math.isfinite(scale) or scale <= 0.0:
        return None, -math.inf
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        return None, -math.inf
    pivots = np.diag(chol) ** 2
    if pivots.min() < eps_rank * scale:
        return None, -math.inf
    inv = sla.cho_solve((chol, True), np.eye(d))
    inv = 0.5 * (inv + inv.T)
    return inv, float(np.sum(np.log(pivots)))


def is_full_column_rank(mat: np.ndarray, eps_rank: float = EPS_RANK) -> bool:
    """True when the columns of ``mat`` are linearly independent (rank test on ``mat^T mat``)."""
    if mat.shape[1] == 0:
        return True
    if mat.shape[1] > mat.shape[0]:
        return False
    inv, _ = factor_gram(mat.T @ mat, eps_rank)
    return inv is not None


def gram_build(vectors, members: Sequence[int], eps_rank: float = EPS_RANK) -> GramState:
    vecs = as_vectors(vectors)
    d = vecs.shape[1]
    members = tuple(sorted(int(i) for i in members))
    sub = vecs[list(members)] if members else np.zeros((0, d))
    gram = sub.T @ sub
    inv, log_det = factor_gram(gram, eps_rank)
    return GramState(dim=d, members=members, gram=gram, inv=inv, log_det=log_det)


def inner_s(state: GramState, u, v) -> float:
    """``u^T M^{-1} v``."""
    inv = state.require_inverse()
    return float(np.asarray(u, float) @ inv @ np.asarray(v, float))


def norm_s_sq(state: GramState, u) -> float:
    inv = state.require_inverse()
    u = np.asarray(u, float)
    return max(float(u @ inv @ u), 0.0)


def member_complements(state: GramState, member_vectors) -> np.ndarray:
    """``1 - |v|_S^2`` for each vector ``v`` summed into ``M``, in the rows' order.

    With ``P = V M^{-1} V^T`` idempotent, ``P_vv (1 - P_vv)`` equals the sum of
    ``P_jv^2`` over ``j != v``. Dividing that sum of squares by ``P_vv``
    avoids the cancellation in ``1 - P_vv`` when ``P_vv`` is close to 1.
    """
    inv = state.require_inverse()
    rows = np.asarray(member_vectors, float).reshape(-1, state.dim)
    proj = rows @ inv @ rows.T
    diag = np.diag(proj).copy()
    off = np.einsum("ij,ij->j", proj, proj) - diag * diag
    out = 1.0 - diag
    near_one = diag >= 0.5
    out[near_one] = off[near_one] / diag[near_one]
    return np.clip(out, 0.0, None)


def swap_ratio(state: GramState, u, v) -> float:
    """``det(M - v v^T + u u^T) / det(M)`` from the S-inner products alone."""
    ip = inner_s(state, u, v)
    nu = norm_s_sq(state, u)
    nv = norm_s_sq(state, v)
    return max(ip * ip + (1.0 + nu) * (1.0 - nv), 0.0)


def det_update_ratio(state: GramState, add, remove) -> float:
    """``det(M + sum_add u u^T - sum_remove v v^T) / det(M)`` via a ``2l x 2l`` determinant."""
    inv = state.require_inverse()
    d = state.dim
    X = np.asarray(add, float).reshape(-1, d).T
    Y = np.asarray(remove, float).reshape(-1, d).T
    if X.shape[1] != Y.shape[1]:
        raise ValueError("add and remove must have the same number of vectors")
    ell = X.shape[1]
    if ell == 0:
        return 1.0
    left = np.hstack([X, Y]).T @ inv
    block = np.eye(2 * ell) + left @ np.hstack([X, -Y])
    return float(np.linalg.det(block))


def _inverse_drift(inv: np.ndarray, gram: np.ndarray) -> float:
    d = gram.shape[0]
    return float(np.linalg.norm(inv @ gram - np.eye(d)) / math.sqrt(d))


def woodbury_swap(
    state: GramState,
    u,
    v,
    add_index: int | None = None,
    remove_index: int | None = None,
    eps_rank: float = EPS_RANK,
) -> GramState:
    """Return the state for ``S - v + u`` using a rank-2 Woodbury update of the inverse.

    ``add_index``/``remove_index`` keep ``members`` in sync when given.
    The inverse is refactored from scratch every ``REFACTOR_EVERY`` swaps or
    when ``inv @ gram`` drifts from the identity by more than ``DRIFT_TOL``.
    """
    inv = state.require_inverse()
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    ratio = swap_ratio(state, u, v)
    if ratio <= eps_rank:
        raise SingularGramError(f"swap makes the Gram matrix singular (ratio {ratio:.3g})")
    # M' = M + U W^T with U = [u, -v], W = [u, v]
    U = np.column_stack([u, -v])
    W = np.column_stack([u, v])
    core = np.eye(2) + W.T @ inv @ U
    new_inv = inv - inv @ U @ np.linalg.solve(core, W.T @ inv)
    new_inv = 0.5 * (new_inv + new_inv.T)
    new_gram = state.gram + np.outer(u, u) - np.outer(v, v)
    log_det = state.log_det + math.log(ratio)

    members = list(state.members)
    if remove_index is not None:
        members.remove(remove_index)
    if add_index is not None:
        members.append(add_index)

    swaps = state.swaps_since_refactor + 1
    if swaps >= REFACTOR_EVERY or _inverse_drift(new_inv, new_gram) > DRIFT_TOL:
        new_inv, log_det = factor_gram(new_gram, eps_rank)
        if new_inv is None:
            raise SingularGramError("Gram matrix became singular on refactorization")
        swaps = 0
    return GramState(
        dim=state.dim,
        members=tuple(sorted(members)),
        gram=new_gram,
        inv=new_inv,
        log_det=log_det,
        swaps_since_refactor=swaps,
    )


def cauchy_binet(vectors, members: Sequence[int]) -> float:
    """Sum of squared ``d x d`` minors over all ``d``-subsets of ``members``."""
    vecs = as_vectors(vectors)
    d = vecs.shape[1]
    total = 0.0
    for subset in itertools.combinations(sorted(members), d):
        total += float(np.linalg.det(vecs[list(subset)])) ** 2
    return total


def _dyadic_integers(m: np.ndarray) -> tuple[list[list[int]], int]:
    """Scale a float matrix to integers by a common power-of-two denominator."""
    fracs = [[Fraction(float(x)) for x in row] for row in m]
    denom = 1
    for row in fracs:
        for f in row:
            denom = max(denom, f.denominator)
    return [[int(f * denom) for f in row] for row in fracs], denom


def permanent(m, exact: bool = False):
    """Permanent by Ryser's inclusion-exclusion formula in Gray-code order.

    With ``exact=True`` the entries are taken as the dyadic rationals they
    are and the sum is done in integer arithmetic; the result is a
    ``Fraction``. Use it for matrices with wide dynamic range, where the
    alternating sum cancels catastrophically in floating point.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("permanent needs a square matrix")
    n = m.shape[0]
    if n > PERMANENT_MAX_ORDER:
        raise ValueError(f"order {n} exceeds the cap of {PERMANENT_MAX_ORDER}")
    if n == 0:
        return Fraction(1) if exact else 1.0

    if exact:
        ints, denom = _dyadic_integers(m)
        cols = [[ints[i][j] for i in range(n)] for j in range(n)]
        row_sums = [0] * n
    else:
        cols = [m[:, j] for j in range(n)]
        row_sums = np.zeros(n)

    total = 0
    prev_gray = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        flipped = gray ^ prev_gray
        j = flipped.bit_length() - 1
        if exact:
            sgn = 1 if gray & flipped else -1
            col = cols[j]
            for i in range(n):
                row_sums[i] += sgn * col[i]
            prod = 1
            for x in row_sums:
                prod *= x
        else:
            if gray & flipped:
                row_sums += cols[j]
            else:
                row_sums -= cols[j]
            prod = float(np.prod(row_sums))
        total += -prod if bin(gray).count("1") & 1 else prod
        prev_gray = gray
    if n & 1:
        total = -total
    if exact:
        return Fraction(total, denom**n)
    return float(total)


def _default_log_f() -> Callable[[int], float]:
    from detmax.exchange_graph import log_f

    return log_f


def bound_preconditions_hold(m, log_f: Callable[[int], float] | None = None, rtol: float = 1e-12) -> bool:
    """Check the near-diagonal conditions under which the permanent bound applies.

    Positive diagonal; below the diagonal ``a[i,j] <= 2 f(i-j) / prod(a[t,t], j<t<i)``;
    above it ``a[i,j] <= 2 f(l-j+i) prod(a[t,t], i<=t<=j) / f(l)``; all entries
    nonnegative. Compared in log space with relative slack ``rtol``.
    """
    log_f = log_f or _default_log_f()
    a = np.asarray(m, dtype=float)
    ell = a.shape[0]
    diag = np.diag(a)
    if np.any(diag <= 0) or np.any(a < 0):
        return False
    log_diag = np.log(diag)
    log2 = math.log(2.0)
    for i in range(ell):
        for j in range(ell):
            if i == j or a[i, j] == 0.0:
                continue
            if j < i:
                bound = log2 + log_f(i - j) - float(np.sum(log_diag[j + 1 : i]))
            else:
                bound = log2 + log_f(ell - j + i) + float(np.sum(log_diag[i : j + 1])) - log_f(ell)
            if math.log(a[i, j]) > bound + rtol * max(1.0, abs(bound)):
                return False
    return True


def permanent_bound_check(m, log_f: Callable[[int], float] | None = None) -> bool:
    """Whether ``m`` is consistent with the near-diagonal permanent bound.

    Returns ``True`` when the preconditions fail (the bound says nothing) or
    when ``perm(m) <= (1 + 0.05/l) prod(diag)`` holds, computed exactly.
    ``False`` means the preconditions hold and the bound is violated.
    """
    a = np.asarray(m, dtype=float)
    if not bound_preconditions_hold(a, log_f):
        return True
    ell = a.shape[0]
    perm = permanent(a, exact=True)
    diag_prod = Fraction(1)
    for x in np.diag(a):
        diag_prod *= Fraction(float(x))
    return perm <= (1 + Fraction(1, 20 * ell)) * diag_prod
