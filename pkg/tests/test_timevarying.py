import math

import numpy as np
import pytest

from dstab.errors import (
    DerivativeBoundTooLarge,
    DimensionMismatch,
    NominalNotVerified,
)
from dstab.lyapunov import solve_stein
from dstab.systems import validate
from dstab.timevarying import asymptotic_delta_max, varying_multi, varying_single


def scalar(coeffs, delays):
    return validate({"n": 1, "delays": list(delays),
                     "matrices": [[c] for c in coeffs]})


class TestVaryingSingle:
    def test_backed_off_rate_leaves_room(self):
        # nominal at mu = 0.3 < ln 2 keeps beta well negative, so the
        # degraded rate survives amplitude 0.1 and slope 0.2
        P = solve_stein(np.array([[0.5 * math.exp(0.3)]]), np.eye(1))
        out = varying_single([[0.5]], 1.0, 0.1, 0.2, P=P, mu=0.3)
        assert out.beta < 0
        assert out.gamma == out.gamma_max
        assert 0.0 < out.gamma < math.log(2.0)
        assert out.delta1_caps[0] > 0.2
        assert out.alpha >= 1.0

    def test_gamma_matches_formula(self):
        P = solve_stein(np.array([[0.5 * math.exp(0.3)]]), np.eye(1))
        out = varying_single([[0.5]], 1.0, 0.1, 0.2, P=P, mu=0.3)
        want = -math.log((out.beta + math.exp(-0.6)) / 0.8) / (2.0 * 1.1)
        assert out.gamma_max == pytest.approx(want, abs=1e-14)

    def test_auto_search_route(self):
        out = varying_single([[0.5]], 1.0, 0.05, 0.1)
        assert out.base_certificate.verified
        assert out.gamma > 0

    def test_slope_cap_enforced(self):
        P = solve_stein(np.array([[0.5 * math.exp(0.3)]]), np.eye(1))
        out = varying_single([[0.5]], 1.0, 0.1, 0.2, P=P, mu=0.3)
        with pytest.raises(DerivativeBoundTooLarge):
            varying_single([[0.5]], 1.0, 0.1, out.delta1_caps[0] + 0.01,
                           P=P, mu=0.3)

    def test_unverified_nominal_rejected(self):
        with pytest.raises(NominalNotVerified):
            varying_single([[0.5]], 1.0, 0.1, 0.1, P=np.eye(1), mu=0.8)

    def test_supplied_p_needs_mu(self):
        with pytest.raises(DimensionMismatch):
            varying_single([[0.5]], 1.0, 0.1, 0.1, P=np.eye(1))

    def test_negative_bounds_rejected(self):
        with pytest.raises(DimensionMismatch):
            varying_single([[0.5]], 1.0, -0.1, 0.1)


class TestVaryingMulti:
    def test_single_delay_agrees_with_scalar_route(self):
        system = scalar([0.5], [1.0])
        P = solve_stein(np.array([[0.5 * math.exp(0.3)]]), np.eye(1))
        a = varying_single([[0.5]], 1.0, 0.1, 0.2, P=P, mu=0.3)
        b = varying_multi(system, [0.1], [0.2], P_list=[P], mu=0.3)
        assert b.beta == pytest.approx(a.beta, abs=1e-14)
        assert b.gamma_max == pytest.approx(a.gamma_max, abs=1e-14)
        assert b.delta1_caps[0] == pytest.approx(a.delta1_caps[0], abs=1e-14)

    def test_two_delay_degradation(self):
        system = scalar([0.3, 0.2], [1.0, 2.0])
        out = varying_multi(system, [0.05, 0.05], [0.02, 0.02])
        assert out.gamma > 0
        assert len(out.delta1_caps) == 2
        assert all(c > 0.02 for c in out.delta1_caps)
        assert out.gamma < out.base_certificate.mu

    def test_rate_drops_with_wider_swings(self):
        system = scalar([0.3, 0.2], [1.0, 2.0])
        tight = varying_multi(system, [0.01, 0.01], [0.02, 0.02])
        loose = varying_multi(system, [0.2, 0.2], [0.02, 0.02])
        assert loose.gamma < tight.gamma

    def test_bound_counts_checked(self):
        system = scalar([0.3, 0.2], [1.0, 2.0])
        with pytest.raises(DimensionMismatch):
            varying_multi(system, [0.1], [0.1, 0.1])

    def test_slope_cap_per_delay(self):
        system = scalar([0.3, 0.2], [1.0, 2.0])
        out = varying_multi(system, [0.05, 0.05], [0.02, 0.02])
        bad = [0.02, out.delta1_caps[1] + 0.01]
        with pytest.raises(DerivativeBoundTooLarge):
            varying_multi(system, [0.05, 0.05], bad,
                          P_list=out.base_certificate.P_list,
                          mu=out.base_certificate.mu)


def test_asymptotic_delta_max_formula():
    P = solve_stein(np.array([[0.5]]), np.eye(1))
    assert asymptotic_delta_max(P, np.eye(1)) == pytest.approx(0.75, abs=1e-12)
    # saturates at one for a very slack pair
    assert asymptotic_delta_max(np.eye(1), 0.5 * np.eye(1)) == pytest.approx(0.5)
    assert asymptotic_delta_max(0.5 * np.eye(1), np.eye(1)) == 1.0
