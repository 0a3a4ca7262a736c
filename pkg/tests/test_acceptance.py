"""Acceptance gate: ten properties, each under a wall-clock budget.

Each test appends one line to ``RESULTS``; ``conftest.py`` prints them in
the terminal summary. Run this file directly for the same lines without
pytest.
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from detmax import apps, generators, verify
from detmax import matroid as mt
from detmax.instance import Instance
from detmax.local_search import LOG2, SolveConfig, solve
from detmax.oracle import brute_force_opt, exact_gram_det, log_opt_gap_bound
from detmax.sparsify import frank_wolfe_relax

RESULTS: list[str] = []
SEED = 20240601


def record(number: int, title: str, ok: bool, elapsed: float, budget: float, detail: str) -> None:
    within = elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    RESULTS.append(f"[{status}] criterion {number:2d} {title}: {detail} ({elapsed:.2f}s of {budget:.0f}s)")
    assert ok, detail
    assert within, f"took {elapsed:.2f}s, budget {budget}s"


def suite_detail(res) -> str:
    tail = f"; first: {res.failures[0]}" if res.failures else ""
    return f"{res.trials} trials, {len(res.failures)} failures, max error {res.max_error:.2e}{tail}"


def small_instances(count: int, seed: int):
    """Desk-scale instances with n <= 10, d <= 3, r <= 4 and n > r, alternating matroid kinds."""
    rng = np.random.default_rng(seed)
    made = 0
    while made < count:
        d = int(rng.integers(1, 4))
        r = int(rng.integers(d, 5))
        n = int(rng.integers(r + 1, 11))
        sub_seed = int(rng.integers(2**31))
        if made % 2:
            inst = generators.random_uniform(n, d, r, seed=sub_seed)
        else:
            inst = generators.random_partition(n, d, r, 1, seed=sub_seed)
        made += 1
        yield inst


def test_weight_identity():
    t = time.perf_counter()
    res = verify.weight_identity(1000, SEED)
    record(1, "weight identity", res.passed and res.trials == 1000, time.perf_counter() - t, 5, suite_detail(res))


def test_determinant_update():
    t = time.perf_counter()
    res = verify.det_update(500, SEED)
    record(2, "block determinant update", res.passed and res.trials == 500, time.perf_counter() - t, 5, suite_detail(res))


def test_improvement_guarantee():
    t = time.perf_counter()
    res = verify.improvement(200, SEED)
    lens = res.notes.get("cycles_by_half_length")
    detail = f"{res.trials} exchanges over {res.notes['runs']} solves, half-lengths {lens}, {len(res.failures)} failures"
    record(3, "improvement > 2 per exchange", res.passed and res.trials >= 200, time.perf_counter() - t, 30, detail)


def test_optimality_gap():
    t = time.perf_counter()
    checked, worst, worst_slack, violations = 0, 0.0, math.inf, []
    for inst in small_instances(400, SEED):
        if checked >= 300:
            break
        opt = brute_force_opt(inst)
        if opt.best_set is None:
            continue
        checked += 1
        rep = solve(inst, SolveConfig())
        gap = opt.log_det - rep.log_det
        bound = log_opt_gap_bound(inst.dim, inst.n - inst.rank)
        worst = max(worst, gap)
        worst_slack = min(worst_slack, bound - gap)
        if gap > bound or gap < -1e-9:
            violations.append((inst.n, inst.dim, inst.rank, gap, bound))
    detail = (
        f"{checked} instances, max OPT/ALG ratio {math.exp(worst):.4g} (log {worst:.4f}), "
        f"min slack to bound {worst_slack:.2f} nats, {len(violations)} violations"
    )
    record(4, "optimality gap vs brute force", checked >= 300 and not violations, time.perf_counter() - t, 120, detail)


def test_minimality():
    t = time.perf_counter()
    res = verify.minimality(100, SEED, max_vertices=16)
    detail = f"{suite_detail(res)}, half-lengths {res.notes['cycles_by_half_length']}"
    record(5, "minimal cycles, at most one second-type arc", res.passed and res.trials >= 100, time.perf_counter() - t, 60, detail)


def test_permanent_bound():
    t = time.perf_counter()
    res = verify.permanent_bound(1000, SEED, 2, 6)
    record(6, "permanent bound", res.passed and res.trials == 1000, time.perf_counter() - t, 30, suite_detail(res))


def test_inner_product_inequalities():
    t = time.perf_counter()
    res = verify.inner_bounds(1000, SEED)
    record(7, "S-inner-product inequalities", res.passed and res.trials == 1000, time.perf_counter() - t, 10, suite_detail(res))


def test_nsw_and_kirchhoff():
    t = time.perf_counter()
    rng = np.random.default_rng(SEED)
    allocations, worst, bad = 0, 0.0, []
    for players in range(1, 5):
        for items in range(1, 5):
            vals = rng.integers(0, 10, size=(players, items))
            inst = apps.nsw_instance(vals)
            for alloc in itertools.product(range(players), repeat=items):
                sub = inst.vectors[list(apps.allocation_basis(players, alloc))]
                det = float(np.linalg.det(sub.T @ sub))
                target = apps.nsw_value(vals, alloc) ** players
                err = 0.0 if max(det, target) == 0 else abs(det - target) / max(abs(det), abs(target))
                worst = max(worst, err)
                allocations += 1
                if err > 1e-8 and abs(det - target) > 1e-12:
                    bad.append((players, items, alloc))
    graphs = 0
    for p in range(2, 9):
        pairs = [(a, b) for a in range(p) for b in range(a + 1, p)]
        for _ in range(6):
            edges = [e for e in pairs if rng.random() < 0.5] or pairs[:1]
            size = min(len(edges), p + 3)
            subset = sorted(rng.choice(len(edges), size=size, replace=False).tolist())
            count = apps.spanning_tree_count(p, edges, subset)
            det = exact_gram_det(apps.reduced_incidence_vectors(p, edges), subset)
            graphs += 1
            if det != Fraction(count):
                bad.append((p, edges, subset, count, det))
    detail = f"{allocations} allocations (max rel error {worst:.1e}), {graphs} graphs exact, {len(bad)} mismatches"
    record(8, "NSW reduction and Kirchhoff", not bad, time.perf_counter() - t, 30, detail)


def test_relaxation_soundness():
    t = time.perf_counter()
    checked, worst, short = 0, math.inf, []
    for inst in small_instances(80, SEED + 1):
        opt = brute_force_opt(inst)
        if opt.best_set is None:
            continue
        rel = frank_wolfe_relax(inst, 500)
        margin = rel.value - opt.log_det
        worst = min(worst, margin)
        checked += 1
        if margin < -1e-3:
            short.append(margin)
    detail = f"{checked} instances, min (relaxation - log OPT) {worst:.2e}, {len(short)} below -1e-3"
    record(9, "relaxation upper bound", checked >= 50 and not short, time.perf_counter() - t, 60, detail)


def test_termination():
    t = time.perf_counter()
    rng = np.random.default_rng(SEED + 2)
    runs, most, over = 0, 0.0, []
    starts = []
    for inst in small_instances(150, SEED + 3):
        starts.append((inst, None))
    for _ in range(100):
        inst, basis, _ = verify.planted_cycle_instance(rng)
        starts.append((inst, basis))
    for inst, basis in starts:
        if basis is None:
            order = [int(e) for e in rng.permutation(inst.n)]
            basis = mt.extend_to_basis(inst.matroid, [], None, order)
            if mt.linear_matroid_intersection_basis(inst.matroid, inst.vectors) is None:
                continue
            from detmax.linalg import gram_build

            if gram_build(inst.vectors, basis).singular:
                basis = None
        rep = solve(inst, SolveConfig(use_sparsify=False), initial=basis)
        runs += 1
        most = max(most, rep.iterations / rep.iteration_cap)
        if rep.iterations > rep.iteration_cap or not rep.converged:
            over.append((rep.iterations, rep.iteration_cap))
    detail = f"{runs} solves, max iterations/cap {most:.3f}, {len(over)} over the cap"
    record(10, "termination within the cap", not over and runs > 0, time.perf_counter() - t, 60, detail)


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            try:
                fn()
            except AssertionError:
                pass
    print("\n".join(RESULTS))
