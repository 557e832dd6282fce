import math

import numpy as np
import pytest

from dstab.errors import DimensionMismatch, NoNominalCertificate
from dstab.lyapunov import solve_stein
from dstab.robust import (
    DELTA_CAP,
    PerturbationBudget,
    induced_norm,
    max_delta,
    nominal_certificate,
    verify_robust_multi,
    verify_robust_single,
)
from dstab.systems import validate


def scalar(coeffs, delays):
    return validate({"n": 1, "delays": list(delays),
                     "matrices": [[c] for c in coeffs]})


def stein_P(a, mu, r):
    return solve_stein(np.array([[a * math.exp(mu * r)]]), np.eye(1))


class TestInducedNorm:
    def test_matches_largest_singular_value(self, rng):
        for _ in range(5):
            A = rng.standard_normal((4, 4))
            assert induced_norm(A) == pytest.approx(
                np.linalg.norm(A, 2), abs=1e-12)

    def test_scalar(self):
        assert induced_norm(-0.7) == pytest.approx(0.7)


class TestSingleDelayBall:
    # x(t) = 0.5 x(t-1) at the backed-off rate mu = 0.3 leaves headroom:
    # the exact ball radius solves (delta + 1) delta = 1 - e^{0.6}/4
    A, R, MU = 0.5, 1.0, 0.3

    def exact_radius(self):
        # core/lmax(P) = a^2 - e^{-2 mu r}, penalty/lmax(P) = (d + 2a) d
        return 0.5 * (-1.0 + math.sqrt(1.0 + 4.0 * (
            math.exp(-2.0 * self.MU * self.R) - self.A ** 2)))

    def test_zero_radius_reduces_to_nominal(self):
        P = stein_P(self.A, self.MU, self.R)
        v = verify_robust_single([[self.A]], self.R, 0.0, P, self.MU)
        assert v.passed
        assert v.margin < 0

    def test_margin_grows_with_radius(self):
        P = stein_P(self.A, self.MU, self.R)
        margins = [verify_robust_single([[self.A]], self.R, d, P, self.MU).margin
                   for d in (0.0, 0.1, 0.2, 0.3)]
        assert all(b > a for a, b in zip(margins, margins[1:]))

    def test_pass_fail_bracket(self):
        P = stein_P(self.A, self.MU, self.R)
        d = self.exact_radius()
        assert verify_robust_single([[self.A]], self.R, 0.99 * d, P, self.MU).passed
        assert not verify_robust_single([[self.A]], self.R, 1.01 * d, P,
                                        self.MU).passed

    def test_negative_radius_rejected(self):
        P = stein_P(self.A, self.MU, self.R)
        with pytest.raises(DimensionMismatch):
            verify_robust_single([[self.A]], self.R, -0.1, P, self.MU)


class TestMultiDelayBall:
    def test_zero_budget_tracks_nominal(self):
        system = scalar([0.3, 0.2], [1.0, 2.0])
        cert = nominal_certificate(system, 0.05)
        v = verify_robust_multi(system, PerturbationBudget((0.0, 0.0)),
                                cert.P_list, 0.05)
        assert v.passed
        assert v.margin == pytest.approx(-cert.min_eig_margin, abs=1e-12)

    def test_oversized_budget_fails(self):
        system = scalar([0.3, 0.2], [1.0, 2.0])
        cert = nominal_certificate(system, 0.05)
        v = verify_robust_multi(system, PerturbationBudget((0.5, 0.5)),
                                cert.P_list, 0.05)
        assert not v.passed

    def test_budget_length_checked(self):
        system = scalar([0.3, 0.2], [1.0, 2.0])
        cert = nominal_certificate(system, 0.05)
        with pytest.raises(DimensionMismatch):
            verify_robust_multi(system, PerturbationBudget((0.1,)),
                                cert.P_list, 0.05)

    def test_negative_budget_rejected(self):
        with pytest.raises(DimensionMismatch):
            PerturbationBudget((0.1, -0.1))


class TestNominalCertificate:
    def test_single_delay_at_feasible_rate(self):
        cert = nominal_certificate(scalar([0.5], [1.0]), 0.3)
        assert cert.verified
        assert cert.mu == 0.3

    def test_single_delay_past_the_limit(self):
        with pytest.raises(NoNominalCertificate):
            nominal_certificate(scalar([0.5], [1.0]), 0.8)

    def test_multi_delay(self):
        cert = nominal_certificate(scalar([0.3, 0.2], [1.0, 2.0]), 0.02)
        assert cert.verified
        assert cert.mu == 0.02


class TestMaxDelta:
    def test_single_delay_closed_form(self):
        system = scalar([0.5], [1.0])
        got = max_delta(system, 0.3, [1.0])
        want = 0.5 * (-1.0 + math.sqrt(1.0 + 4.0 * (math.exp(-0.6) - 0.25)))
        assert got == pytest.approx(want, abs=1e-4)

    def test_result_sits_on_the_boundary(self):
        system = scalar([0.5], [1.0])
        P = stein_P(0.5, 0.3, 1.0)
        s = max_delta(system, 0.3, [1.0], P_list=[P])
        assert verify_robust_single([[0.5]], 1.0, s, P, 0.3).passed
        assert not verify_robust_single([[0.5]], 1.0, s + 1e-3, P, 0.3).passed

    def test_zero_ray_returns_cap(self):
        system = scalar([0.3, 0.2], [1.0, 2.0])
        assert max_delta(system, 0.02, [0.0, 0.0]) == DELTA_CAP

    def test_ray_validation(self):
        system = scalar([0.5], [1.0])
        with pytest.raises(DimensionMismatch):
            max_delta(system, 0.3, [1.0, 1.0])
        with pytest.raises(DimensionMismatch):
            max_delta(system, 0.3, [-1.0])

    def test_supplied_p_must_verify(self):
        # any P certifies only up to ln 2; at 0.8 the verify gate trips
        system = scalar([0.5], [1.0])
        with pytest.raises(NoNominalCertificate):
            max_delta(system, 0.8, [1.0], P_list=[np.eye(1)])

    def test_research_path_never_shrinks(self):
        system = scalar([0.5], [1.0])
        plain = max_delta(system, 0.3, [1.0])
        wider = max_delta(system, 0.3, [1.0], research_p=True)
        assert wider >= plain - 1e-9
