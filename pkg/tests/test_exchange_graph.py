import itertools
import math

import numpy as np
import pytest

from detmax import exchange_graph as eg
from detmax import matroid as mt
from detmax.instance import Instance
from detmax.linalg import gram_build, swap_ratio
from detmax.oracle import is_minimal_violating
from detmax.verify import planted_cycle_instance


def cyc(weights, kinds=None):
    ell = len(weights)
    verts = tuple(itertools.chain.from_iterable((10 + k, k) for k in range(ell)))
    return eg.Cycle(verts, tuple(kinds or [eg.FWD1] * ell), tuple(weights))


class TestLogF:
    def test_values(self):
        assert eg.log_f(1) == pytest.approx(0.6931, abs=1e-4)
        assert math.exp(eg.log_f(2)) == pytest.approx(2048)
        assert eg.log_f(4) == pytest.approx(11 * math.log(24), rel=1e-14)
        assert eg.log_f(4) == pytest.approx(34.96, abs=5e-3)

    def test_domain(self):
        with pytest.raises(ValueError):
            eg.log_f(0)

    def test_super_multiplicative(self):
        for a in range(1, 21):
            for b in range(1, 21):
                assert eg.log_f(a) + eg.log_f(b) <= eg.log_f(a + b)


class TestViolation:
    def test_examples(self):
        assert eg.is_f_violating(cyc([-math.log(10)]))
        assert not eg.is_f_violating(cyc([-math.log(1.5)]))
        assert not eg.is_f_violating(cyc([-math.log(2000) / 2] * 2))
        assert eg.is_f_violating(cyc([-math.log(2100) / 2] * 2))

    def test_cycle_shape(self):
        c = cyc([-1.0, -2.0, 0.5])
        assert c.length == 6 and c.half_len == 3
        assert c.weight == pytest.approx(-2.5)
        arcs = c.arcs
        assert [a.kind for a in arcs[1::2]] == [eg.BACKWARD] * 3
        assert arcs[-1].head == c.vertices[0]
        assert c.added == (10, 11, 12) and c.removed == (0, 1, 2)


class TestBuild:
    def test_orthonormal_has_no_second_type(self):
        inst = Instance(np.array([[1.0, 0], [0, 1.0], [1, 1], [2, -1]]), mt.UniformMatroid(4, 2))
        g = eg.build(inst, [0, 1])
        assert g.fwd2 == {}
        assert g.fwd1

    def test_partition_example(self, partition_example):
        g = eg.build(partition_example, [0, 1])
        assert (1, 2) in g.backward and (0, 2) not in g.backward
        assert g.fwd1[(2, 1)] == pytest.approx(-math.log(10))
        assert (2, 0) not in g.fwd1

    def test_zero_vector_has_no_forward_arcs(self):
        inst = Instance(np.array([[1.0, 0], [0, 1.0], [0, 0]]), mt.UniformMatroid(3, 2))
        g = eg.build(inst, [0, 1])
        assert not any(u == 2 for u, _ in g.fwd1) and not any(u == 2 for u, _ in g.fwd2)

    def test_requires_basis(self, partition_example):
        with pytest.raises(mt.MatroidError):
            eg.build(partition_example, [1, 2])

    def test_arc_existence_matches_spanning_swaps(self, rng):
        for _ in range(30):
            n, d, r = 7, 2, 3
            inst = Instance(rng.integers(-2, 3, size=(n, d)).astype(float), mt.UniformMatroid(n, r))
            s = mt.linear_matroid_intersection_basis(inst.matroid, inst.vectors)
            if s is None:
                continue
            g = eg.build(inst, s)
            for u in g.outside:
                for v in g.basis:
                    swapped = sorted(set(s) - {v} | {u})
                    spans = not gram_build(inst.vectors, swapped).singular
                    has_arc = (u, v) in g.fwd1 or (u, v) in g.fwd2
                    assert has_arc == spans

    def test_weight_identity_on_arcs(self, rng):
        for _ in range(20):
            inst = Instance(rng.standard_normal((8, 3)), mt.UniformMatroid(8, 4))
            s = (0, 1, 2, 3)
            g = eg.build(inst, s)
            for u, v in set(g.fwd1) | set(g.fwd2):
                total = sum(math.exp(-2 * w[(u, v)]) for w in (g.fwd1, g.fwd2) if (u, v) in w)
                M = g.gram.gram
                new = M - np.outer(inst.vectors[v], inst.vectors[v]) + np.outer(inst.vectors[u], inst.vectors[u])
                assert total == pytest.approx(np.linalg.det(new) / np.linalg.det(M), rel=1e-8)

    def test_json_dump(self, partition_example):
        doc = eg.build(partition_example, [0, 1]).to_json_dict()
        assert {"from": 1, "to": 2, "kind": "backward", "weight_ln": 0.0} in doc["arcs"]


class TestSearch:
    def test_partition_example(self, partition_example):
        g = eg.build(partition_example, [0, 1])
        c = eg.find_min_f_violating_cycle(g)
        assert c.vertices == (2, 1) and c.kinds == (eg.FWD1,)
        assert c.weight == pytest.approx(-math.log(10))

    def test_enumeration_sees_parallel_arcs(self):
        # with r > d both arc types exist on the pair (2, 1)
        inst = Instance(np.array([[1.0, 0], [0, 1.0], [1, 3.0], [1.0, 1]]), mt.PartitionMatroid((0, 1, 1, 2), (1, 1, 1)))
        g = eg.build(inst, [0, 1, 3])
        found = {(c.vertices, c.kinds) for c in eg.enumerate_cycles(g, 1)}
        assert ((2, 1), (eg.FWD1,)) in found and ((2, 1), (eg.FWD2,)) in found

    def test_enumeration_empty_without_forward_arcs(self):
        inst = Instance(np.array([[1.0, 0], [0, 1.0], [0, 0]]), mt.UniformMatroid(3, 2))
        assert eg.enumerate_cycles(eg.build(inst, [0, 1])) == []

    def test_enumerated_weights(self, rng):
        inst = Instance(rng.standard_normal((8, 2)), mt.UniformMatroid(8, 3))
        g = eg.build(inst, [0, 1, 2])
        for c in eg.enumerate_cycles(g):
            assert c.weight == pytest.approx(g.cycle_weight(c), abs=1e-9)
            assert len(c.vertex_set) == c.length

    def test_none_at_optimum(self, rng):
        from detmax.oracle import brute_force_opt

        for _ in range(30):
            n = int(rng.integers(4, 9))
            inst = Instance(rng.standard_normal((n, 2)), mt.UniformMatroid(n, 3))
            best = brute_force_opt(inst).best_set
            g = eg.build(inst, best)
            assert not any(eg.is_f_violating(c) for c in eg.enumerate_cycles(g))
            assert eg.find_min_f_violating_cycle(g) is None

    def test_search_finds_whatever_enumeration_finds(self, rng):
        for _ in range(40):
            n = int(rng.integers(5, 10))
            vecs = rng.standard_normal((n, 3)) * 10.0 ** rng.uniform(-2, 2, size=(n, 1))
            inst = Instance(vecs, mt.UniformMatroid(n, 4))
            s = tuple(sorted(rng.choice(n, 4, replace=False).tolist()))
            if gram_build(vecs, s).singular:
                continue
            g = eg.build(inst, s)
            exists = any(eg.is_f_violating(c) for c in eg.enumerate_cycles(g))
            c = eg.find_min_f_violating_cycle(g)
            assert (c is not None) == exists
            if c is not None:
                assert is_minimal_violating(g, c)

    def test_planted_long_cycle(self):
        rng = np.random.default_rng(4)
        seen = set()
        for _ in range(30):
            inst, basis, ell = planted_cycle_instance(rng)
            g = eg.build(inst, basis)
            c = eg.find_min_f_violating_cycle(g)
            assert c is not None and is_minimal_violating(g, c)
            assert sum(k == eg.FWD2 for k in c.kinds) <= 1
            seen.add(c.half_len)
        assert {2, 3} <= seen

    def test_respects_half_length_cap(self):
        rng = np.random.default_rng(4)
        while True:
            inst, basis, ell = planted_cycle_instance(rng)
            g = eg.build(inst, basis)
            c = eg.find_min_f_violating_cycle(g)
            if c.half_len >= 2:
                break
        assert eg.find_min_f_violating_cycle(g, c.half_len - 1) is None

    def test_deterministic(self, rng):
        inst = Instance(rng.standard_normal((9, 3)) * 10.0 ** rng.uniform(-2, 2, size=(9, 1)), mt.UniformMatroid(9, 3))
        s = mt.linear_matroid_intersection_basis(inst.matroid, inst.vectors)
        first = eg.find_min_f_violating_cycle(eg.build(inst, s))
        assert first == eg.find_min_f_violating_cycle(eg.build(inst, s))

    def test_closed_walk_split(self):
        # u10 -> v0 -> u11 -> v1 -> u10 -> v2 -> u12 -> v3 -> u10
        walk = []
        for u, v, nxt in ((10, 0, 11), (11, 1, 10), (10, 2, 12), (12, 3, 10)):
            walk += [eg.Arc(u, v, eg.FWD1, -1.0), eg.Arc(v, nxt, eg.BACKWARD, 0.0)]
        parts = eg._decompose_closed_walk(walk, {10, 11, 12})
        assert sorted(p.vertex_set for p in parts) == sorted([frozenset({10, 0, 11, 1}), frozenset({10, 2, 12, 3})])
        assert all(p.vertices[0] == 10 for p in parts)


def test_swap_ratio_agrees_with_weights(rng):
    vecs = rng.standard_normal((6, 2))
    state = gram_build(vecs, [0, 1])
    for u in range(2, 6):
        for v in range(2):
            w1, w2 = eg.forward_weights(
                float(vecs[u] @ state.inv @ vecs[v]),
                float(vecs[u] @ state.inv @ vecs[u]),
                float(vecs[v] @ state.inv @ vecs[v]),
            )
            total = sum(math.exp(-2 * w) for w in (w1, w2) if w is not None)
            assert total == pytest.approx(swap_ratio(state, vecs[u], vecs[v]), rel=1e-10)
