import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wlsinr.special_fn import (
    SeriesControl,
    SeriesTruncationError,
    kummer_m,
    lauricella_phi2,
    ln_gamma,
    log_kummer_m,
    log_lauricella_phi2,
    log_pochhammer,
    log_tricomi_u,
    multivariate_gamma,
    pochhammer_rising,
    q_approx,
    q_function,
    reg_lower_incomplete_gamma,
    tricomi_u,
)

# reference values from 40-digit arbitrary precision evaluations
M_REF = [
    ((0.5, 1.5, -3.0), 0.50434356023143881),
    ((2.0, 3.5, 10.0), 1967.6552350937422),
    ((1.0, 1.0, 1.0), 2.7182818284590452),
    ((7.5, 9.0, -40.0), 3.9539938668038459e-8),
    ((150.0, 152.5, 30.0), 6815778925009.5108),
    ((0.3, 4.0, 0.25), 1.0193794305031473),
]
U_REF = [
    ((1.0, 1.0, 1.0), 0.59634736232319407),
    ((0.5, 2.0, 0.3), 2.7883195950732138),
    ((3.0, 4.5, 2.0), 0.19491862972669048),
    ((502.0, 503.5, 1.0), 22.422099810591726),
    ((0.01, 1.2, 30.0), 0.96662034352274307),
    ((60.0, 61.5, 0.75), 281633504.48632392),
    ((2.0, -1.5, 5.0), 0.012671512921530325),
]


class TestSeriesControl:
    def test_defaults(self):
        c = SeriesControl()
        assert c.rel_tol == 1e-12 and c.max_terms == 10_000
        assert not c.converged

    @pytest.mark.parametrize("kw", [dict(rel_tol=0.0), dict(rel_tol=-1.0), dict(max_terms=0)])
    def test_rejects_bad_settings(self, kw):
        with pytest.raises(ValueError):
            SeriesControl(**kw)

    def test_full_output_reports_terms(self):
        v, c = kummer_m(1.0, 2.0, 3.0, full_output=True)
        assert c.converged and 0 < c.achieved_terms <= c.max_terms
        assert v == pytest.approx((math.exp(3.0) - 1.0) / 3.0, rel=1e-13)

    def test_truncation_error_keeps_partial_sum(self):
        with pytest.raises(SeriesTruncationError) as ei:
            kummer_m(1.0, 1.0, 50.0, SeriesControl(max_terms=5))
        assert ei.value.terms >= 5
        assert 0 < ei.value.partial_sum < math.exp(50.0)


class TestGammaFamily:
    def test_ln_gamma(self):
        assert ln_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-15)
        with pytest.raises(ValueError):
            ln_gamma(0.0)

    def test_incomplete_gamma_value(self):
        assert reg_lower_incomplete_gamma(2.5, 3.0) == pytest.approx(0.6937810815867216, rel=1e-13)

    @given(st.floats(0.05, 50), st.lists(st.floats(0, 200), min_size=2, max_size=20))
    @settings(max_examples=60, deadline=None)
    def test_incomplete_gamma_monotone_in_unit_interval(self, a, xs):
        xs = sorted(xs)
        vals = reg_lower_incomplete_gamma(a, np.array(xs))
        assert np.all((vals >= 0) & (vals <= 1))
        assert np.all(np.diff(vals) >= 0)

    def test_multivariate_gamma_is_log(self):
        # Gamma_2(3.5) = sqrt(pi) Gamma(3.5) Gamma(3)
        assert multivariate_gamma(3.5, 2) == pytest.approx(2.4664857258317196, rel=1e-14)
        assert multivariate_gamma(2.0, 1) == pytest.approx(0.0, abs=1e-15)

    def test_pochhammer_is_rising(self):
        assert pochhammer_rising(3.0, 4) == 3 * 4 * 5 * 6
        assert pochhammer_rising(-0.5, 3) == pytest.approx(-0.5 * 0.5 * 1.5)
        assert pochhammer_rising(2.0, 0) == 1.0
        assert log_pochhammer(3.0, 4) == pytest.approx(math.log(360.0))


class TestKummer:
    @pytest.mark.parametrize("args,ref", M_REF)
    def test_reference_values(self, args, ref):
        assert kummer_m(*args) == pytest.approx(ref, rel=1e-12)

    def test_log_form(self):
        assert log_kummer_m(150.0, 152.5, 30.0) == pytest.approx(math.log(6815778925009.5108), rel=1e-13)

    def test_elementary_cases(self):
        assert kummer_m(2.0, 3.0, 0.0) == 1.0
        # M(a, a, x) = e^x
        assert kummer_m(4.2, 4.2, -2.5) == pytest.approx(math.exp(-2.5), rel=1e-13)

    @given(st.floats(0.1, 20), st.floats(0.1, 20), st.floats(-30, 30))
    @settings(max_examples=80, deadline=None)
    def test_kummer_transformation(self, a, d, x):
        # M(a, b, x) = e^x M(b - a, b, -x)
        b = a + d
        lhs = log_kummer_m(a, b, x)
        rhs = x + log_kummer_m(b - a, b, -x)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


class TestTricomi:
    @pytest.mark.parametrize("args,ref", U_REF)
    def test_reference_values(self, args, ref):
        assert tricomi_u(*args) == pytest.approx(ref, rel=1e-11)

    def test_elementary_cases(self):
        # U(1, 1, x) = e^x E_1(x); U(a, a + 1, x) = x^-a
        assert tricomi_u(2.5, 3.5, 1.7) == pytest.approx(1.7 ** -2.5, rel=1e-12)

    def test_broadcasting(self):
        a = np.array([1.0, 2.0, 3.0])
        out = log_tricomi_u(a[:, None], a[:, None] + 1.0, np.array([0.5, 2.0]))
        assert out.shape == (3, 2)
        assert np.allclose(out, -a[:, None] * np.log([0.5, 2.0]), rtol=1e-12)

    @given(st.floats(0.05, 120), st.floats(-5, 5), st.floats(0.05, 80))
    @settings(max_examples=80, deadline=None)
    def test_kummer_transformation(self, a, db, x):
        # U(a, b, x) = x^(1-b) U(a - b + 1, 2 - b, x), whenever both first arguments are positive
        b = a + db
        if a - b + 1 <= 0.01:
            return
        lhs = log_tricomi_u(a, b, x)
        rhs = (1 - b) * math.log(x) + log_tricomi_u(a - b + 1, 2 - b, x)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)

    def test_domain(self):
        with pytest.raises(ValueError):
            tricomi_u(1.0, 1.0, -1.0)


class TestPhi2:
    def test_brute_force_values(self):
        assert lauricella_phi2([0.5, 1.5], 3.0, [-2.0, -0.7]) == pytest.approx(0.53151781338504137, rel=1e-12)
        assert lauricella_phi2([0.5, 2.5], 4.0, [1.5, -3.0]) == pytest.approx(0.26007279212807031, rel=1e-12)

    def test_reduces_to_kummer(self):
        # one variable: Phi2(b; c; x) = M(b, c, x)
        assert lauricella_phi2([1.5], 4.0, [2.3]) == pytest.approx(kummer_m(1.5, 4.0, 2.3), rel=1e-13)

    def test_equal_arguments_collapse(self):
        # Phi2(b1, b2; c; x, x) = M(b1 + b2, c, x)
        v = log_lauricella_phi2([0.5, 1.0], 3.0, [7.0, 7.0])
        assert v == pytest.approx(log_kummer_m(1.5, 3.0, 7.0), rel=1e-12)

    def test_large_arguments_log_scale(self):
        assert log_lauricella_phi2([0.5, 2.5], 3.0, [300.0, 450.0]) == pytest.approx(447.89814671915680, rel=1e-13)

    def test_zero_arguments(self):
        assert lauricella_phi2([0.5, 0.5], 2.0, [0.0, 0.0]) == 1.0


class TestQ:
    def test_values(self):
        assert q_function(0.0) == 0.5
        assert q_function(2.0) == pytest.approx(0.022750131948179195, rel=1e-14)
        assert q_approx(0.0) == pytest.approx(1.0 / 3.0)

    def test_approximation_overestimates_tail(self):
        x = np.linspace(1.0, 6.0, 50)
        assert np.all(q_approx(x) > q_function(x))
