"""Randomized invariant suites and per-instance checks.

Each suite draws its own instances from a seeded generator and compares
the fast code path against an independent recomputation (exact or dense
determinants, brute-force cycle enumeration, exact permanents).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from detmax import matroid as mt
from detmax.exchange_graph import FWD2, build, find_min_f_violating_cycle, forward_weights, log_f
from detmax.instance import Instance
from detmax.linalg import (
    det_update_ratio,
    gram_build,
    inner_s,
    member_complements,
    norm_s_sq,
    bound_preconditions_hold,
    permanent_bound_check,
)
from detmax.local_search import LOG2, IMPROVEMENT_SLACK, SolveConfig, solve
from detmax.oracle import exact_gram_det, is_minimal_violating

REL_TOL = 1e-8
INEQ_SLACK = 1e-9
MAX_REPORTED = 10


@dataclass
class SuiteResult:
    name: str
    trials: int = 0
    failures: list[str] = field(default_factory=list)
    max_error: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def fail(self, message: str):
        self.failures.append(message)

    def to_dict(self) -> dict:
        return {
            "suite": self.name,
            "passed": self.passed,
            "trials": self.trials,
            "failures": len(self.failures),
            "first_failures": self.failures[:MAX_REPORTED],
            "max_error": self.max_error,
            **self.notes,
        }


def rel_err(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def _dense_ratio(gram: np.ndarray, add: np.ndarray, remove: np.ndarray) -> float:
    new = gram + add.T @ add - remove.T @ remove
    return float(np.linalg.det(new) / np.linalg.det(gram))


def _random_spanning_set(rng, vectors: np.ndarray, size: int):
    n, d = vectors.shape
    while True:
        s = tuple(sorted(int(e) for e in rng.choice(n, size=size, replace=False)))
        gram = gram_build(vectors, s)
        if not gram.singular:
            return s, gram


def _random_setup(rng, dims=(2, 3, 5), max_n: int = 20, spare: int = 1, min_size: int = 1):
    d = int(rng.choice(dims))
    low = max(d, min_size)
    n = int(rng.integers(low + spare, max_n + 1))
    r = int(rng.integers(low, n - spare + 1))
    vectors = rng.standard_normal((n, d))
    s, gram = _random_spanning_set(rng, vectors, r)
    return vectors, s, gram


# ---------------------------------------------------------------------------
# forward-arc weights against the swap determinant


def check_swap_weights(res: SuiteResult, vectors, gram, u: int, v: int, label: str):
    """``exp(-2 w1) + exp(-2 w2)`` should equal ``det(M - v v^T + u u^T) / det(M)``, taken exactly."""
    members = list(gram.members)
    ip, nu, nv = inner_s(gram, vectors[u], vectors[v]), norm_s_sq(gram, vectors[u]), norm_s_sq(gram, vectors[v])
    comp = float(member_complements(gram, vectors[members])[members.index(v)])
    w1, w2 = forward_weights(ip, nu, nv, comp)
    from_weights = sum(math.exp(-2.0 * w) for w in (w1, w2) if w is not None)
    swapped = sorted(set(members) - {v} | {u})
    direct = float(exact_gram_det(vectors, swapped) / exact_gram_det(vectors, members))
    err = rel_err(from_weights, direct)
    res.max_error = max(res.max_error, err)
    res.trials += 1
    if err > REL_TOL:
        res.fail(f"{label}: weights give {from_weights:.12g}, determinant ratio is {direct:.12g}")


def weight_identity(trials: int = 1000, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("weight-identity")
    for t in range(trials):
        vectors, s, gram = _random_setup(rng)
        outside = [e for e in range(len(vectors)) if e not in s]
        u, v = int(rng.choice(outside)), int(rng.choice(s))
        check_swap_weights(res, vectors, gram, u, v, f"trial {t} (u={u}, v={v})")
    return res


# ---------------------------------------------------------------------------
# block determinant update


def det_update(trials: int = 500, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("det-update")
    for t in range(trials):
        ell = int(rng.integers(1, 4))
        vectors, s, gram = _random_setup(rng, spare=ell, min_size=ell)
        outside = [e for e in range(len(vectors)) if e not in s]
        add = vectors[rng.choice(outside, size=ell, replace=False)]
        remove = vectors[rng.choice(s, size=ell, replace=False)]
        fast = det_update_ratio(gram, add, remove)
        direct = _dense_ratio(gram.gram, add, remove)
        err = rel_err(fast, direct)
        res.max_error = max(res.max_error, err)
        res.trials += 1
        if err > REL_TOL:
            res.fail(f"trial {t} (l={ell}): block formula {fast:.12g}, scratch {direct:.12g}")
    return res


# ---------------------------------------------------------------------------
# bounds on S-inner products of members of S


def check_inner_bounds(res: SuiteResult, vectors, s, gram, rng, label: str):
    """Pairwise ``|<vi,vj>_S| <= sqrt((1-|vi|^2)(1-|vj|^2))`` and ``det(I - P_Y) >= 0``."""
    inv = gram.require_inverse()
    sub = vectors[list(s)]
    proj = sub @ inv @ sub.T
    diag = np.diag(proj)
    worst = 0.0
    r = len(s)
    for i in range(r):
        for j in range(i + 1, r):
            gap = abs(proj[i, j]) - math.sqrt(max((1 - diag[i]) * (1 - diag[j]), 0.0))
            worst = max(worst, gap)
    if worst > INEQ_SLACK:
        res.fail(f"{label}: pairwise inner-product bound exceeded by {worst:.3g}")
    size = int(rng.integers(1, r + 1))
    ys = rng.choice(r, size=size, replace=False)
    block = np.eye(size) - proj[np.ix_(ys, ys)]
    det = float(np.linalg.det(block))
    if det < -INEQ_SLACK:
        res.fail(f"{label}: det(I - V_Y^T M^-1 V_Y) = {det:.3g} < 0")
    res.max_error = max(res.max_error, worst, -det)
    res.trials += 1


def inner_bounds(trials: int = 1000, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("inner-bounds")
    for t in range(trials):
        vectors, s, gram = _random_setup(rng, spare=0)
        check_inner_bounds(res, vectors, s, gram, rng, f"trial {t}")
    return res


# ---------------------------------------------------------------------------
# permanent bound on near-diagonal matrices


def sample_bound_matrix(rng, ell: int) -> np.ndarray:
    """A nonnegative ``l x l`` matrix meeting the near-diagonal preconditions.

    Off-diagonal entries are either 0, a uniform fraction of their cap, or
    the cap itself (shrunk by a hair so rounding stays inside).
    """
    log_diag = rng.uniform(-1.0, 1.0, size=ell)
    a = np.diag(np.exp(log_diag))
    for i in range(ell):
        for j in range(ell):
            if i == j:
                continue
            if j < i:
                cap = LOG2 + log_f(i - j) - float(np.sum(log_diag[j + 1 : i]))
            else:
                cap = LOG2 + log_f(ell - j + i) + float(np.sum(log_diag[i : j + 1])) - log_f(ell)
            mode = rng.random()
            if mode < 0.2:
                continue
            frac = 1.0 - 1e-9 if mode < 0.5 else rng.random()
            a[i, j] = math.exp(cap) * frac
    return a


def permanent_bound(trials: int = 1000, seed: int = 0, lmin: int = 2, lmax: int = 6) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("permanent-bound")
    for t in range(trials):
        ell = int(rng.integers(lmin, lmax + 1))
        a = sample_bound_matrix(rng, ell)
        if not bound_preconditions_hold(a):
            res.fail(f"trial {t}: sampler produced a matrix outside the preconditions")
            continue
        res.trials += 1
        if not permanent_bound_check(a):
            res.fail(f"trial {t} (l={ell}): permanent exceeds (1 + 0.05/l) * prod(diag)")
    return res


# ---------------------------------------------------------------------------
# minimality of returned cycles


def _scaled_instance(rng, max_vertices: int = 16) -> Instance:
    d = int(rng.integers(2, 4))
    n = int(rng.integers(d + 2, max_vertices + 1))
    scales = 10.0 ** rng.uniform(-2.0, 2.0, size=(n, 1))
    vectors = rng.standard_normal((n, d)) * scales
    if rng.random() < 0.5:
        r = int(rng.integers(d, min(n - 1, d + 2) + 1))
        m: mt.Matroid = mt.UniformMatroid(n, r)
    else:
        parts = int(rng.integers(d, min(n - 1, d + 2) + 1))
        m = mt.PartitionMatroid(tuple(int(p) for p in rng.permutation(np.arange(n) % parts)), (1,) * parts)
    return Instance(vectors, m)


def planted_cycle_instance(rng, max_vertices: int = 16) -> tuple[Instance, tuple[int, ...], int]:
    """An instance whose starting basis improves only through a planted ``l``-exchange.

    Part ``i`` of a partition matroid holds basis vector ``b_i`` and the
    alternative ``K b_pi(i) + noise`` for a cyclic shift ``pi`` of the first
    ``l`` parts, so every single swap is nearly singular while the full
    rotation carries cycle weight about ``-l log K``, past the threshold. Small random
    distractors fill the remaining vertex budget.
    """
    d = int(rng.integers(2, 6))
    ell = int(rng.integers(2, min(d, 3) + 1))
    base, _ = np.linalg.qr(rng.standard_normal((d, d)))  # orthonormal keeps the rotated set well conditioned
    scale = math.exp((log_f(ell) + 1.0) / ell) * float(rng.uniform(1.5, 3.0))
    vectors, parts = [], []
    for i in range(d):
        vectors.append(base[i])
        parts.append(i)
    for i in range(ell):
        vectors.append(scale * base[(i + 1) % ell] + 1e-4 * rng.standard_normal(d))
        parts.append(i)
    while len(vectors) < max_vertices and rng.random() < 0.7:
        vectors.append(0.05 * rng.standard_normal(d))
        parts.append(int(rng.integers(0, d)))
    inst = Instance(np.array(vectors), mt.PartitionMatroid(tuple(parts), (1,) * d))
    return inst, tuple(range(d)), ell


def _random_basis(rng, instance: Instance):
    for _ in range(50):
        order = [int(e) for e in rng.permutation(instance.n)]
        basis = mt.extend_to_basis(instance.matroid, [], None, order)
        gram = gram_build(instance.vectors, basis)
        if not gram.singular:
            return basis, gram
    return None


def check_cycle(res: SuiteResult, graph, cycle, label: str):
    res.trials += 1
    if not is_minimal_violating(graph, cycle):
        res.fail(f"{label}: cycle {cycle.vertices} is not a minimal f-violating cycle")
    second = sum(1 for k in cycle.kinds if k == FWD2)
    if second > 1:
        res.fail(f"{label}: cycle {cycle.vertices} uses {second} second-type arcs")


def minimality(trials: int = 100, seed: int = 0, max_vertices: int = 16) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("minimality")
    half_lens: dict[int, int] = {}
    attempts = 0
    while res.trials < trials and attempts < 50 * trials:
        attempts += 1
        if attempts % 2:
            inst = _scaled_instance(rng, max_vertices)
            start = _random_basis(rng, inst)
            if start is None:
                continue
            basis, gram = start
        else:
            inst, basis, _ = planted_cycle_instance(rng, max_vertices)
            gram = gram_build(inst.vectors, basis)
        graph = build(inst, basis, gram)
        cycle = find_min_f_violating_cycle(graph)
        if cycle is None:
            continue
        half_lens[cycle.half_len] = half_lens.get(cycle.half_len, 0) + 1
        check_cycle(res, graph, cycle, f"graph {attempts}")
    res.notes["cycles_by_half_length"] = {str(k): v for k, v in sorted(half_lens.items())}
    return res


# ---------------------------------------------------------------------------
# per-exchange improvement and feasibility


def check_trajectory(res: SuiteResult, instance: Instance, report, label: str):
    """Replay a solve report: each exchange stays a basis and more than doubles the determinant."""
    s = set(report.initial_set)
    matroid = instance.matroid if report.sparsified_support is None else instance.restricted(report.sparsified_support).matroid
    prev = gram_build(instance.vectors, sorted(s)).log_det
    for k, rec in enumerate(report.per_iteration):
        s = (s - set(rec.cycle.removed)) | set(rec.cycle.added)
        res.trials += 1
        if len(s) != len(report.initial_set) or not mt.is_independent(matroid, s):
            res.fail(f"{label} step {k}: exchanged set is not a basis")
        cur = gram_build(instance.vectors, sorted(s)).log_det
        gain = cur - prev
        res.max_error = max(res.max_error, abs(cur - rec.log_det_after))
        if not gain > LOG2 - IMPROVEMENT_SLACK:
            res.fail(f"{label} step {k}: determinant grew by a factor {math.exp(gain):.6g}, not above 2")
        prev = cur
    res.notes["exchanges"] = res.trials


def improvement(trials: int = 200, seed: int = 0, max_vertices: int = 16) -> SuiteResult:
    """Harvest at least ``trials`` exchanges from solves started at random bases."""
    rng = np.random.default_rng(seed)
    res = SuiteResult("improvement")
    half_lens: dict[int, int] = {}
    runs = 0
    while res.trials < trials and runs < 20 * trials:
        runs += 1
        if runs % 2:
            inst = _scaled_instance(rng, max_vertices)
            start = _random_basis(rng, inst)
            if start is None:
                continue
            basis = start[0]
        else:
            inst, basis, _ = planted_cycle_instance(rng, max_vertices)
        report = solve(inst, SolveConfig(use_sparsify=False), initial=basis)
        check_trajectory(res, inst, report, f"run {runs}")
        for rec in report.per_iteration:
            half_lens[rec.cycle.half_len] = half_lens.get(rec.cycle.half_len, 0) + 1
        if not report.converged:
            res.fail(f"run {runs}: iteration cap {report.iteration_cap} reached")
    res.notes["runs"] = runs
    res.notes["cycles_by_half_length"] = {str(k): v for k, v in sorted(half_lens.items())}
    return res


SUITES = {
    "weight-identity": weight_identity,
    "det-update": det_update,
    "inner-bounds": inner_bounds,
    "permanent-bound": permanent_bound,
    "minimality": minimality,
    "improvement": improvement,
}


def run_suite(name: str, trials: int | None = None, seed: int = 0, **extra) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    kwargs = dict(seed=seed, **extra)
    if trials is not None:
        kwargs["trials"] = trials
    return SUITES[name](**kwargs)


def verify_instance(instance: Instance, seed: int = 0) -> list[SuiteResult]:
    """Run every applicable check on one instance, starting from its initial spanning basis."""
    from detmax.local_search import initialize

    rng = np.random.default_rng(seed)
    results = []
    start = initialize(instance)
    if start is None:
        empty = SuiteResult("spanning-basis")
        empty.trials = 1
        empty.notes["optimum_zero"] = True
        return [empty]
    gram = gram_build(instance.vectors, start)
    graph = build(instance, start, gram)

    weights = SuiteResult("weight-identity")
    for u, v in sorted(set(graph.fwd1) | set(graph.fwd2)):
        check_swap_weights(weights, instance.vectors, gram, u, v, f"arc {u}->{v}")
    results.append(weights)

    bounds = SuiteResult("inner-bounds")
    check_inner_bounds(bounds, instance.vectors, start, gram, rng, "initial basis")
    results.append(bounds)

    report = solve(instance, SolveConfig(use_sparsify=False), initial=start)
    minimal = SuiteResult("minimality")
    s = start
    for k, rec in enumerate(report.per_iteration):
        g = build(instance, s, gram_build(instance.vectors, s))
        check_cycle(minimal, g, rec.cycle, f"step {k}")
        s = tuple(sorted((set(s) - set(rec.cycle.removed)) | set(rec.cycle.added)))
    results.append(minimal)

    better = SuiteResult("improvement")
    check_trajectory(better, instance, report, "solve")
    if not report.converged:
        better.fail("iteration cap reached")
    results.append(better)
    return results
