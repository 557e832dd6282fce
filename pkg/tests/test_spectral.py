import math

import numpy as np
import pytest

from dstab.errors import NotScalar, OutOfRange
from dstab.spectral import classify_single_delay, scalar_sum_test, torus_sup
from dstab.systems import validate


def scalar(coeffs, delays):
    return validate({"n": 1, "delays": list(delays),
                     "matrices": [[c] for c in coeffs]})


class TestTorusSup:
    def test_scalar_matches_absolute_sum(self):
        # for n = 1 the torus supremum is attained with every term aligned
        system = scalar([0.2, -0.05, -0.5], [1.0, 1.5, 2.0])
        v = torus_sup(system, resolution=64)
        assert v.sup_estimate == pytest.approx(0.75, abs=1e-6)
        assert v.stable_in_delays == "yes"
        assert len(v.argmax_angles) == 3
        assert v.argmax_angles[0] == 0.0

    def test_unstable_scalar_pair(self):
        system = scalar([0.75, -0.75], [1.0, 2.0])
        v = torus_sup(system)
        assert v.sup_estimate == pytest.approx(1.5, abs=1e-6)
        assert v.stable_in_delays == "no"

    def test_single_delay_uses_plain_radius(self):
        A = [[0.5, -0.3], [0.35, 0.0]]
        system = validate({"n": 2, "delays": [1.0],
                           "matrices": [[0.5, -0.3, 0.35, 0.0]]})
        v = torus_sup(system)
        assert v.sup_estimate == pytest.approx(
            max(abs(np.linalg.eigvals(np.array(A)))), abs=1e-12)
        assert v.stable_in_delays == "yes"

    def test_boundary_is_inconclusive(self):
        # |a_1| + |a_2| = 1 exactly: the sweep lands within refinement error
        system = scalar([0.5, 0.5], [1.0, 2.0])
        v = torus_sup(system, resolution=64)
        assert v.sup_estimate == pytest.approx(1.0, abs=1e-9)
        assert v.stable_in_delays in ("inconclusive", "no")

    def test_refinement_improves_coarse_grid(self):
        system = scalar([0.4, 0.35], [1.0, 2.0])
        coarse = torus_sup(system, resolution=8, refine_iters=0)
        polished = torus_sup(system, resolution=8, refine_iters=40)
        assert polished.sup_estimate >= coarse.sup_estimate - 1e-15
        assert polished.sup_estimate == pytest.approx(0.75, abs=1e-8)

    def test_resolution_guard(self):
        system = scalar([0.4], [1.0])
        with pytest.raises(OutOfRange):
            torus_sup(system, resolution=4)

    def test_diagonal_blocks_decouple(self, rng):
        # block diagonal: sup is the max over the blocks' scalar sums
        A1 = np.diag([0.3, -0.2])
        A2 = np.diag([0.4, 0.1])
        system = validate({"n": 2, "delays": [1.0, 2.0],
                           "matrices": [A1.reshape(-1).tolist(),
                                        A2.reshape(-1).tolist()]})
        v = torus_sup(system, resolution=128)
        assert v.sup_estimate == pytest.approx(0.7, abs=1e-6)


class TestScalarSum:
    def test_value(self):
        assert scalar_sum_test(scalar([0.2, -0.05, -0.5], [1, 1.5, 2])) == \
            pytest.approx(0.75)

    def test_rejects_matrix_system(self):
        system = validate({"n": 2, "delays": [1.0],
                           "matrices": [[0.5, 0.0, 0.0, 0.5]]})
        with pytest.raises(NotScalar):
            scalar_sum_test(system)


class TestClassifySingleDelay:
    def test_contraction(self):
        assert classify_single_delay([[0.5, 0.2], [0.0, 0.3]]) == \
            "asymptotically_stable"

    def test_semisimple_unit_circle(self):
        th = 0.7
        R = [[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]]
        assert classify_single_delay(R) == "stable"

    def test_spectral_radius_above_one(self):
        assert classify_single_delay([[1.1, 0.0], [0.0, 0.2]]) == "unstable"

    def test_defective_unit_eigenvalue(self):
        assert classify_single_delay([[1.0, 1.0], [0.0, 1.0]]) == "unstable"

    def test_identity_is_stable(self):
        assert classify_single_delay(np.eye(3)) == "stable"

    def test_rejects_rectangular(self):
        from dstab.errors import DimensionMismatch
        with pytest.raises(DimensionMismatch):
            classify_single_delay(np.zeros((2, 3)))
