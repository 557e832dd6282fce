import math

import numpy as np
import pytest

from dstab.errors import (
    CausalityViolation,
    DegenerateFit,
    InvalidProfile,
    LatticeExplosion,
    StepTooLarge,
)
from dstab.simulator import (
    VaryingDelayProfile,
    discontinuity_times,
    fit_decay,
    l2_window_norm,
    profile_from_entry,
    simulate,
    simulate_varying,
    write_discontinuities_csv,
    write_trajectory_csv,
)
from dstab.systems import InitialFunction, validate


def scalar_system(coeffs, delays):
    return validate({"n": 1, "delays": list(delays),
                     "matrices": [[c] for c in coeffs]})


def const_phi(value, start):
    return InitialFunction.constant([value], start)


class TestLattice:
    def test_integer_delays(self):
        out = discontinuity_times([1.0, 2.0], 5.0)
        assert np.allclose(out, [0, 1, 2, 3, 4, 5])

    def test_irrational_pair(self):
        r2 = math.sqrt(2.0)
        out = discontinuity_times([1.0, r2], 3.0)
        expected = sorted([0.0, 1.0, r2, 2.0, 1 + r2, 2 * r2, 3.0])
        assert np.allclose(out, expected)

    def test_cap_trips(self):
        with pytest.raises(LatticeExplosion):
            discontinuity_times([0.1, 0.1001], 60.0, cap=500)


class TestSimulate:
    def test_piecewise_constant_scalar(self):
        # x(t) = 0.5 x(t-1), phi = 1: plateaus at 2^{-(k+1)} on [k, k+1)
        system = scalar_system([0.5], [1.0])
        traj = simulate(system, const_phi(1.0, -1.0), T=4.0, h=0.05)
        for k in range(4):
            inside = (traj.times >= k + 0.1) & (traj.times <= k + 0.9)
            assert np.allclose(traj.states[inside, 0], 0.5 ** (k + 1))

    def test_right_continuous_at_jumps(self):
        system = scalar_system([0.5], [1.0])
        traj = simulate(system, const_phi(1.0, -1.0), T=3.0, h=0.1)
        i = int(np.argmin(np.abs(traj.times - 1.0)))
        assert traj.times[i] == pytest.approx(1.0)
        assert traj.states[i, 0] == pytest.approx(0.25)

    def test_matches_direct_recursion(self):
        # commensurate delays on an aligned grid reproduce the recursion
        system = scalar_system([0.6, -0.3], [0.5, 1.0])
        phi = InitialFunction.sinusoid([1.0], [2.0], [0.3], [0.0], -1.0)
        h = 0.5 / 16
        traj = simulate(system, phi, T=6.0, h=h)
        x = {}
        def val(m):
            if m in x:
                return x[m]
            if m < 0:
                return float(phi(m * 0.5)[0])
            v = 0.6 * val(m - 1) - 0.3 * val(m - 2)
            x[m] = v
            return v
        for m in range(13):
            i = 16 * m
            assert traj.states[i, 0] == pytest.approx(val(m), abs=1e-12)

    def test_step_guard(self):
        system = scalar_system([0.5], [1.0])
        with pytest.raises(StepTooLarge):
            simulate(system, const_phi(1.0, -1.0), T=2.0, h=0.2)

    def test_defaults(self):
        system = scalar_system([0.5], [1.0])
        traj = simulate(system, const_phi(1.0, -1.0))
        assert traj.horizon == pytest.approx(10.0)
        assert traj.h <= 1.0 / 10.0

    def test_prologue_reproduces_phi(self):
        system = scalar_system([0.5], [1.0])
        phi = InitialFunction.sinusoid([1.0], [3.0], [0.0], [0.0], -1.0)
        traj = simulate(system, phi, T=2.0, h=0.05)
        assert traj.prologue_times[-1] < 0.0
        assert np.allclose(traj.prologue_states[:, 0],
                           np.sin(3.0 * traj.prologue_times))


class TestWindowNorm:
    def test_constant_history(self):
        system = scalar_system([0.5], [1.0])
        traj = simulate(system, const_phi(1.0, -1.0), T=3.0, h=0.05)
        # at t = 0 the window is the prologue alone
        assert l2_window_norm(traj, 0.0) == pytest.approx(1.0, abs=1e-9)

    def test_plateau_window(self):
        system = scalar_system([0.5], [1.0])
        traj = simulate(system, const_phi(1.0, -1.0), T=3.0, h=0.05)
        assert l2_window_norm(traj, 2.0) == pytest.approx(0.25, abs=1e-9)
        # straddles the drop at t = 1: integral 0.5*(0.25 + 0.0625)
        assert l2_window_norm(traj, 1.5) == pytest.approx(
            math.sqrt(0.5 * 0.25 + 0.5 * 0.0625), abs=1e-9)

    def test_off_grid_time(self):
        system = scalar_system([0.5], [1.0])
        traj = simulate(system, const_phi(1.0, -1.0), T=3.0, h=0.05)
        v = l2_window_norm(traj, 2.0 + 0.05 / 3.0)
        assert 0.2 < v < 0.3


class TestFitDecay:
    def test_exact_exponential(self):
        # phi = e^{-t/2} makes the whole solution smooth: x(t) = e^{-t/2}
        a = math.exp(-0.5)
        system = scalar_system([a], [1.0])
        ts = np.linspace(-1.0, 0.0, 41)
        phi = InitialFunction.table(ts, np.exp(-0.5 * ts)[:, None])
        traj = simulate(system, phi, T=8.0, h=0.025)
        rate, amplitude = fit_decay(traj)
        assert rate == pytest.approx(0.5, abs=5e-3)
        assert amplitude == pytest.approx(1.0, rel=0.05)

    def test_oscillatory_decay(self):
        system = scalar_system([-0.6], [1.0])
        traj = simulate(system, const_phi(1.0, -1.0), T=20.0, h=0.05)
        rate, _ = fit_decay(traj)
        assert rate == pytest.approx(-math.log(0.6), rel=0.05)

    def test_degenerate_on_zero_solution(self):
        system = scalar_system([0.5], [1.0])
        traj = simulate(system, const_phi(0.0, -1.0), T=5.0, h=0.05)
        with pytest.raises(DegenerateFit):
            fit_decay(traj)


class TestProfiles:
    def test_delta1_must_stay_below_one(self):
        with pytest.raises(InvalidProfile):
            VaryingDelayProfile(1.0, 0.5, 1.0).check()

    def test_amplitude_exceeds_bound(self):
        with pytest.raises(InvalidProfile):
            profile_from_entry({"r0": 1.0, "delta": 0.1, "delta1": 0.5,
                                "perturbation": {"kind": "sinusoid",
                                                 "amplitude": 0.2,
                                                 "frequency": 1.0}})

    def test_slope_exceeds_bound(self):
        with pytest.raises(InvalidProfile):
            profile_from_entry({"r0": 1.0, "delta": 0.5, "delta1": 0.2,
                                "perturbation": {"kind": "sinusoid",
                                                 "amplitude": 0.5,
                                                 "frequency": 1.0}})

    def test_table_profile(self):
        prof = profile_from_entry({"r0": 1.0, "delta": 0.2, "delta1": 0.5,
                                   "perturbation": {"kind": "table",
                                                    "times": [0.0, 1.0, 2.0],
                                                    "values": [0.0, 0.2, 0.0]}})
        assert prof.delay(0.5) == pytest.approx(1.1)


class TestSimulateVarying:
    def test_zero_perturbation_matches_nominal(self):
        system = scalar_system([0.6, -0.3], [0.5, 1.0])
        phi = InitialFunction.sinusoid([1.0], [2.0], [0.0], [0.0], -1.0)
        profiles = [VaryingDelayProfile(0.5, 0.0, 0.0),
                    VaryingDelayProfile(1.0, 0.0, 0.0)]
        a = simulate(system, phi, T=5.0, h=0.05)
        b = simulate_varying(system, profiles, phi, T=5.0, h=0.05)
        assert np.allclose(a.states, b.states, atol=1e-12)

    def test_causality_violation(self):
        system = scalar_system([0.5], [0.5])
        phi = const_phi(1.0, -1.2)
        prof = VaryingDelayProfile(0.5, 0.6, 0.6,
                                   {"kind": "sinusoid", "amplitude": 0.6,
                                    "frequency": 1.0})
        with pytest.raises(CausalityViolation):
            simulate_varying(system, [prof], phi, T=10.0, h=0.04)

    def test_step_must_stay_below_running_delay(self):
        system = scalar_system([0.5], [0.2])
        phi = const_phi(1.0, -0.5)
        prof = VaryingDelayProfile(0.2, 0.19, 0.95,
                                   {"kind": "sinusoid", "amplitude": 0.19,
                                    "frequency": 5.0})
        with pytest.raises(StepTooLarge):
            simulate_varying(system, [prof], phi, T=3.0, h=0.02)

    def test_swayed_delay_changes_solution(self):
        system = scalar_system([0.5], [1.0])
        phi = InitialFunction.sinusoid([1.0], [2.0], [0.0], [0.0], -1.3)
        prof = VaryingDelayProfile(1.0, 0.3, 0.3,
                                   {"kind": "sinusoid", "amplitude": 0.3,
                                    "frequency": 1.0})
        a = simulate(system, phi, T=5.0, h=0.05)
        b = simulate_varying(system, [prof], phi, T=5.0, h=0.05)
        assert not np.allclose(a.states, b.states, atol=1e-3)


def test_csv_writers(tmp_path):
    system = scalar_system([0.5], [1.0])
    traj = simulate(system, const_phi(1.0, -1.0), T=2.0, h=0.1)
    tpath = tmp_path / "traj.csv"
    dpath = tmp_path / "jumps.csv"
    write_trajectory_csv(traj, str(tpath))
    write_discontinuities_csv(traj, str(dpath))
    rows = tpath.read_text().strip().splitlines()
    assert rows[0].startswith("t,")
    # prologue plus grid samples, all with one state column
    assert len(rows) == 1 + traj.prologue_times.size + traj.times.size
    jumps = dpath.read_text().strip().splitlines()
    assert jumps[0] == "k,t_k"
    assert jumps[1].split(",") == ["0", "0"]
