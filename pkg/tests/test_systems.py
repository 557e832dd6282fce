import math

import numpy as np
import pytest

from dstab.errors import (
    DimensionMismatch,
    EmptySystem,
    NonIncreasingDelays,
    NonPositiveDelay,
    NotCommensurate,
    ParseError,
    ValidationError,
)
from dstab.systems import (
    DelaySystem,
    InitialFunction,
    commensurability,
    initial_from_dict,
    lift_commensurate,
    load_system,
    parse_system,
    validate,
)


def _doc(**kw):
    base = {"n": 1, "delays": [1.0, 2.0], "matrices": [[0.75], [-0.75]]}
    base.update(kw)
    return base


class TestValidate:
    def test_roundtrip(self):
        s = validate(_doc())
        assert s.n == 1 and s.N == 2
        assert s.delays == (1.0, 2.0)
        assert s.matrices[0][0, 0] == 0.75

    def test_empty(self):
        with pytest.raises(EmptySystem):
            validate(_doc(delays=[], matrices=[]))

    def test_nonpositive_delay(self):
        with pytest.raises(NonPositiveDelay):
            validate(_doc(delays=[0.0, 1.0]))

    def test_decreasing_delays(self):
        with pytest.raises(NonIncreasingDelays):
            validate(_doc(delays=[2.0, 1.0]))

    def test_tied_delays(self):
        with pytest.raises(NonIncreasingDelays):
            validate(_doc(delays=[1.0, 1.0]))

    def test_matrix_shape(self):
        with pytest.raises(DimensionMismatch):
            validate(_doc(matrices=[[0.75, 0.1], [-0.75]]))

    def test_matrix_count(self):
        with pytest.raises(DimensionMismatch):
            validate(_doc(matrices=[[0.75]]))


class TestCommensurability:
    def test_integer_multiples(self):
        s = validate(_doc())
        c = commensurability(s)
        assert c.commensurate
        assert c.multipliers == (1, 2)
        assert c.base == pytest.approx(1.0, abs=1e-12)

    def test_rational_ratio(self):
        s = validate(_doc(delays=[0.6, 1.0], matrices=[[0.1], [0.2]]))
        c = commensurability(s)
        assert c.commensurate
        # base 0.2 with multipliers 3 and 5
        assert c.multipliers == (3, 5)
        assert c.base == pytest.approx(0.2, rel=1e-9)

    def test_irrational_ratio(self):
        s = validate(_doc(delays=[1.0, math.sqrt(2.0)]))
        assert not commensurability(s).commensurate

    def test_huge_denominator_rejected(self):
        # ratio needs q > 1e6 to terminate, treated as incommensurate
        s = validate(_doc(delays=[1.0, 1.0 + 1.0 / 9999991.0]))
        assert not commensurability(s).commensurate

    def test_lift_shape_and_spectrum(self):
        s = validate(_doc())
        c = commensurability(s)
        lifted = lift_commensurate(s, c)
        assert lifted.N == 1
        A = lifted.matrices[0]
        assert A.shape == (2, 2)
        # companion of x_m = 0.75 x_{m-1} - 0.75 x_{m-2}
        assert A[0, 0] == 0.75 and A[0, 1] == -0.75
        assert A[1, 0] == 1.0
        rho = max(abs(np.linalg.eigvals(A)))
        assert rho == pytest.approx(math.sqrt(3.0) / 2.0, abs=1e-12)

    def test_lift_refuses_incommensurate(self):
        s = validate(_doc(delays=[1.0, math.sqrt(2.0)]))
        with pytest.raises(NotCommensurate):
            lift_commensurate(s, commensurability(s))


class TestInitialFunction:
    def test_constant(self):
        phi = InitialFunction.constant([1.0, -2.0], -1.0)
        assert np.allclose(phi(-0.5), [1.0, -2.0])
        assert phi.sup_norm() == pytest.approx(math.sqrt(5.0))

    def test_sinusoid_values(self):
        phi = InitialFunction.sinusoid([2.0], [1.0], [0.0], [1.0], -7.0)
        ts = np.array([-6.0, -3.0, -0.25])
        assert np.allclose(phi(ts)[:, 0], 2.0 * np.sin(ts) + 1.0)

    def test_sinusoid_sup_norm_hits_crest(self):
        # sup of |2 sin t + 1| on [-2 pi - 1, 0[ is 3, reached inside
        phi = InitialFunction.sinusoid([2.0], [1.0], [0.0], [1.0],
                                       -(2.0 * math.pi + 1.0))
        assert phi.sup_norm() == pytest.approx(3.0, abs=1e-9)

    def test_unit_circle_sup_norm(self):
        phi = InitialFunction.sinusoid([1.0, 1.0], [3.0, 3.0],
                                       [0.0, math.pi / 2.0], [0.0, 0.0],
                                       -math.pi)
        assert phi.sup_norm() == pytest.approx(1.0, abs=1e-12)

    def test_polynomial(self):
        phi = InitialFunction.polynomial([[1.0, 0.0, 1.0]], -2.0)
        assert phi(-1.5)[0] == pytest.approx(1.0 + 2.25)
        assert phi.sup_norm() == pytest.approx(5.0, abs=1e-9)

    def test_table_interpolates(self):
        phi = InitialFunction.table([-2.0, -1.0, 0.0],
                                    [[0.0], [2.0], [1.0]])
        assert phi(-1.5)[0] == pytest.approx(1.0)
        assert phi.sup_norm() == pytest.approx(2.0)

    def test_table_must_cover_domain(self):
        with pytest.raises(ValidationError):
            initial_from_dict({"kind": "sampled-table",
                               "times": [-0.5, 0.0],
                               "values": [[1.0], [1.0]]}, 1, -2.0)

    def test_dimension_guard(self):
        with pytest.raises(DimensionMismatch):
            initial_from_dict({"kind": "constant-vector", "value": [1.0, 2.0]},
                              1, -1.0)

    def test_unknown_kind(self):
        with pytest.raises(ParseError):
            initial_from_dict({"kind": "spline"}, 1, -1.0)


class TestParseSystem:
    def test_unknown_field_rejected(self):
        with pytest.raises(ParseError):
            parse_system(_doc(extra=1))

    def test_uncertainty_section(self):
        doc = _doc(uncertainty={"deltas": [0.1, 0.2]})
        _, extras = parse_system(doc)
        assert extras["uncertainty"]["deltas"] == [0.1, 0.2]

    def test_uncertainty_count_must_match(self):
        with pytest.raises(DimensionMismatch):
            parse_system(_doc(uncertainty={"deltas": [0.1]}))

    def test_varying_r0_must_match_delay(self):
        doc = _doc(varying=[
            {"r0": 1.0, "delta": 0.1, "delta1": 0.1},
            {"r0": 2.5, "delta": 0.1, "delta1": 0.1},
        ])
        with pytest.raises(ValidationError):
            parse_system(doc)

    def test_varying_extends_initial_domain(self):
        doc = _doc(initial={"kind": "sinusoid-combination", "amplitude": [1.0],
                            "frequency": [1.0], "phase": [0.0], "offset": [0.0]},
                   varying=[
                       {"r0": 1.0, "delta": 0.5, "delta1": 0.2},
                       {"r0": 2.0, "delta": 1.0, "delta1": 0.2},
                   ])
        _, extras = parse_system(doc)
        assert extras["initial"].domain_start == pytest.approx(-3.0)

    def test_load_system_file(self, write_system):
        path = write_system(_doc(initial={"kind": "constant-vector",
                                          "value": [1.0]}))
        system, extras = load_system(path)
        assert system.N == 2
        assert extras["initial"].domain_start == pytest.approx(-2.0)

    def test_load_system_bad_json(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{not json")
        with pytest.raises(ParseError):
            load_system(str(p))


def test_system_to_dict_roundtrip():
    s = validate(_doc())
    again = validate(s.to_dict())
    assert again.delays == s.delays
    assert np.array_equal(again.matrices[1], s.matrices[1])
