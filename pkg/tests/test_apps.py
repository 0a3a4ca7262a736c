import itertools
import math

import numpy as np
import pytest

from detmax import apps
from detmax import matroid as mt
from detmax.linalg import gram_build
from detmax.oracle import brute_force_opt, exact_gram_det

U = [[1, 2], [3, 4]]


def det_of(inst, basis):
    sub = inst.vectors[list(basis)]
    return float(np.linalg.det(sub.T @ sub))


class TestNSW:
    def test_reduction_shape(self):
        inst = apps.nsw_instance(U)
        assert inst.n == 4 and inst.dim == 2 and inst.rank == 2
        assert inst.matroid.part_of == (0, 0, 1, 1)
        np.testing.assert_allclose(inst.vectors[2 * 1 + 0], [math.sqrt(2), 0])

    def test_example_allocation(self):
        inst = apps.nsw_instance(U)
        basis = apps.allocation_basis(2, [0, 1])
        assert det_of(inst, basis) == pytest.approx(4)
        assert apps.nsw_value(U, [0, 1]) == pytest.approx(2)

    def test_all_to_zero_player(self):
        assert apps.nsw_value([[0, 0], [1, 1]], [0, 0]) == 0.0

    def test_single_player(self):
        vals = [[2, 3, 5]]
        assert apps.nsw_value(vals, [0, 0, 0]) == pytest.approx(10)
        inst = apps.nsw_instance(vals)
        assert det_of(inst, range(3)) == pytest.approx(10)

    def test_zero_valuations(self):
        assert brute_force_opt(apps.nsw_instance(np.zeros((2, 3)))).best_set is None

    def test_errors(self):
        with pytest.raises(ValueError):
            apps.nsw_instance([[1, -1]])
        with pytest.raises(ValueError):
            apps.nsw_value(U, [0])
        with pytest.raises(ValueError):
            apps.nsw_value(U, {0: 1})

    def test_exhaustive_consistency(self):
        rng = np.random.default_rng(0)
        for players in range(1, 5):
            for items in range(1, 5):
                vals = rng.integers(0, 6, size=(players, items))
                inst = apps.nsw_instance(vals)
                for alloc in itertools.product(range(players), repeat=items):
                    det = det_of(inst, apps.allocation_basis(players, alloc))
                    nsw = apps.nsw_value(vals, alloc)
                    assert det == pytest.approx(nsw**players, rel=1e-8, abs=1e-12)

    def test_optimum(self):
        # square roots are not exact rationals, so compare in floats
        opt = brute_force_opt(apps.nsw_instance(U))
        assert math.exp(opt.log_det) == pytest.approx(6)
        assert apps.basis_allocation(2, opt.best_set) == [1, 0]


class TestDOpt:
    def test_three_pairs(self):
        inst = apps.dopt_instance([[1, 0], [0, 1], [1, 1]], {"kind": "uniform", "rank": 2})
        dets = [round(det_of(inst, b)) for b in itertools.combinations(range(3), 2)]
        assert dets == [1, 1, 1]
        assert brute_force_opt(inst).log_det == pytest.approx(0.0, abs=1e-12)

    def test_collinear(self):
        inst = apps.dopt_instance([[1, 1], [2, 2], [3, 3]], mt.UniformMatroid(3, 2))
        assert brute_force_opt(inst, exact=True).best_set is None

    def test_passthrough_exact(self, rng):
        vecs = rng.standard_normal((6, 2))
        m = mt.UniformMatroid(6, 3)
        from detmax.instance import Instance

        assert brute_force_opt(apps.dopt_instance(vecs, m)) == brute_force_opt(Instance(vecs, m))


class TestNetwork:
    TRIANGLE = [(0, 1), (1, 2), (0, 2)]

    def test_triangle(self):
        inst = apps.network_instance(3, self.TRIANGLE, mt.UniformMatroid(3, 3))
        assert round(det_of(inst, [0, 1, 2])) == 3
        assert apps.spanning_tree_count(3, self.TRIANGLE) == 3

    def test_single_tree(self):
        inst = apps.network_instance(3, self.TRIANGLE)
        assert det_of(inst, [0, 1]) == pytest.approx(1)

    def test_missing_cut_edge(self):
        edges = [(0, 1), (1, 2), (2, 3)]
        inst = apps.network_instance(4, edges + [(0, 2)], mt.UniformMatroid(4, 3))
        assert gram_build(inst.vectors, [0, 1, 3]).singular
        assert apps.spanning_tree_count(4, edges + [(0, 2)], [0, 1, 3]) == 0

    def test_path_and_disconnected(self):
        assert apps.spanning_tree_count(4, [(0, 1), (1, 2), (2, 3)]) == 1
        assert apps.spanning_tree_count(4, [(0, 1), (2, 3)]) == 0
        with pytest.raises(ValueError):
            apps.network_instance(4, [(0, 1), (2, 3)])

    def test_orientation(self):
        vecs = apps.reduced_incidence_vectors(3, [(2, 0), (0, 1)])
        np.testing.assert_array_equal(vecs, [[1, 0], [1, -1]])

    def test_size_guard(self):
        with pytest.raises(ValueError):
            apps.spanning_tree_count(13, [(i, i + 1) for i in range(12)])

    def test_kirchhoff_exhaustive(self):
        rng = np.random.default_rng(2)
        for p in range(2, 9):
            all_edges = [(a, b) for a in range(p) for b in range(a + 1, p)]
            for _ in range(4):
                keep = [e for e in all_edges if rng.random() < 0.6]
                if p <= 5:
                    subsets = [tuple(range(len(keep)))]
                else:
                    subsets = [tuple(sorted(rng.choice(len(keep), size=min(len(keep), p + 2), replace=False)))] if keep else []
                for sub in subsets:
                    count = apps.spanning_tree_count(p, keep, sub)
                    vecs = apps.reduced_incidence_vectors(p, keep)
                    assert exact_gram_det(vecs, sub) == count

    def test_app_round_trip(self):
        from detmax.instance import instance_from_dict, instance_to_dict

        inst = apps.network_instance(3, self.TRIANGLE, mt.UniformMatroid(3, 2))
        doc = {"v": 1, "app": inst.app}
        again = instance_from_dict(doc)
        np.testing.assert_array_equal(again.vectors, inst.vectors)
        assert instance_to_dict(again) == instance_to_dict(inst)
