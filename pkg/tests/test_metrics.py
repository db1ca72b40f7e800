import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy import special as sc

from wlsinr import metrics as m
from wlsinr import sinr_dist as sd
from wlsinr.mimo_model import SystemConfig


class TestOutage:
    cfg = SystemConfig.from_snr_db(2, 2, 3)

    def test_limits(self):
        assert m.outage_probability(0.0, self.cfg) == 0.0
        assert m.outage_probability(1e4, self.cfg) == pytest.approx(1.0, abs=1e-12)

    def test_raw_is_integral_of_signed_density(self):
        val = integrate.quad(lambda t: sd.approx_pdf(t, self.cfg), 0, 2.0, limit=200)[0]
        assert m.outage_probability(2.0, self.cfg, raw=True) == pytest.approx(val, abs=1e-8)

    @pytest.mark.parametrize("n_r,tol", [(2, 0.035), (4, 2e-3)])
    def test_close_to_exact_law(self, n_r, tol):
        # the first-order correction is coarse for the smallest array near the origin
        cfg = SystemConfig.from_snr_db(2, n_r, 3)
        cdf, _ = sd.tabulate_cdf(lambda t: sd.analytic_pdf_nt2(t, n_r, cfg.rho), 150.0, n_intervals=80)
        for t in (1.0, 2.0, 5.0, 8.0, 15.0):
            assert m.outage_probability(t, cfg) == pytest.approx(float(cdf(t)), abs=tol)

    def test_raw_dips_below_zero(self):
        ts = sd.approx_zero_crossing(self.cfg)
        assert m.outage_probability(ts, self.cfg, raw=True) < 0
        assert m.outage_probability(ts, self.cfg) == 0.0

    @given(st.lists(st.floats(0.0, 60.0), min_size=2, max_size=20))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_threshold(self, ts):
        ts = np.sort(ts)
        p = m.outage_probability(ts, self.cfg)
        assert np.all(np.diff(p) >= -1e-15)

    def test_single_stream_is_incomplete_gamma(self):
        cfg = SystemConfig(1, 3, e_s=2.0)
        assert m.outage_probability(5.0, cfg) == pytest.approx(sc.gammainc(3, 5.0 / 4.0), rel=1e-13)
        assert m.incomplete_gamma_outage(5.0, cfg) == pytest.approx(sc.gammainc(3, 5.0 / 4.0), rel=1e-13)

    def test_rejects(self):
        with pytest.raises(ValueError):
            m.outage_probability(-1.0, self.cfg)


class TestSer:
    def test_conditional(self):
        assert m.conditional_ser(0.0) == 0.5
        assert m.conditional_ser(4.0) == pytest.approx(0.022750131948179195, rel=1e-13)
        assert m.conditional_ser_approx(0.0) == pytest.approx(1 / 3)
        with pytest.raises(ValueError):
            m.conditional_ser(-1.0)

    def test_closed_form_value(self):
        # (3/4)/12 / 2^1.5 + (2/3)/4 / (7/3)^1.5
        assert m.ser_closed_form(1.0, 2, 2) == pytest.approx(0.06885806339122083, rel=1e-14)

    def test_closed_form_is_average_of_approximation(self):
        cfg = SystemConfig.from_snr_db(2, 3, 5)
        T = 2 * cfg.rho * sc.gammainccinv(2.5, 1e-14)
        val = integrate.quad(lambda t: m.conditional_ser_approx(t) * sd.approx_pdf(t, cfg), 0, T, limit=200)[0]
        assert m.ser_closed_form(cfg.rho, 2, 3) == pytest.approx(val, rel=1e-8)

    @given(st.integers(1, 4), st.integers(0, 4), st.floats(-10.0, 40.0))
    @settings(max_examples=60, deadline=None)
    def test_closed_form_bounds(self, n_t, extra, db):
        v = m.ser_closed_form(10 ** (db / 10), n_t, n_t + extra)
        assert 0 < v < 1 / 3

    def test_closed_form_decreasing(self):
        v = m.ser_closed_form(np.geomspace(0.1, 1e4, 50), 3, 4)
        assert np.all(np.diff(v) < 0)

    def test_closed_form_rejects(self):
        with pytest.raises(ValueError):
            m.ser_closed_form(1.0, 3, 2)
        with pytest.raises(ValueError):
            m.ser_closed_form(0.0, 2, 2)


class TestSerMgf:
    def test_single_stream_exact(self):
        # maximal-ratio combining over n_r branches in closed form
        cfg = SystemConfig(1, 3)
        for rho in (0.5, 2.0, 10.0):
            mu = math.sqrt(rho / (1 + rho))
            ref = ((1 - mu) / 2) ** 3 * sum(math.comb(2 + k, k) * ((1 + mu) / 2) ** k for k in range(3))
            assert m.ser_via_mgf(rho, cfg, 1, np.random.default_rng(0)) == pytest.approx(ref, rel=1e-12)

    def test_monotone_in_snr(self):
        v, e = m.ser_via_mgf(np.geomspace(0.5, 100, 12), SystemConfig(2, 2), 2000,
                             np.random.default_rng(1), full_output=True)
        assert np.all(np.diff(v) < 0)
        assert np.all(e > 0)

    def test_matches_exact_density(self):
        rho = 2.0
        T = 2 * rho * sc.gammainccinv(2, 1e-12)
        ref = integrate.quad(lambda t: m.conditional_ser(t) * sd.analytic_pdf_nt2(t, 2, rho), 0, T, limit=200)[0]
        v, e = m.ser_via_mgf(rho, SystemConfig(2, 2), 100_000, np.random.default_rng(2), full_output=True)
        assert abs(v - ref) <= 4 * e

    def test_rejects(self):
        with pytest.raises(ValueError):
            m.ser_via_mgf(1.0, SystemConfig(2, 2), 0, np.random.default_rng())


class TestDiversity:
    def test_values(self):
        assert m.diversity_gain_wl(2, 2) == 1.5
        assert m.diversity_gain_wl(4, 6) == 4.5
        assert m.diversity_gain_lmmse(4, 6) == 3.0
        assert m.diversity_delta(4) == 1.5
        assert m.diversity_gain_wl(3, 5) - m.diversity_gain_lmmse(3, 5) == m.diversity_delta(3)

    def test_rejects(self):
        with pytest.raises(ValueError):
            m.diversity_gain_wl(3, 2)
        with pytest.raises(ValueError):
            m.diversity_delta(0)

    def test_slope_fit_on_power_law(self):
        db = np.arange(0.0, 41.0, 2.0)
        curve = m.SerCurve(db, 0.3 * (10 ** (db / 10)) ** -1.5, "closed_form")
        assert m.diversity_slope_fit(curve, (10, 40)) == pytest.approx(1.5, rel=1e-12)

    def test_slope_fit_needs_points(self):
        curve = m.closed_form_curve(np.array([0.0, 10.0, 20.0]), 2, 2)
        with pytest.raises(ValueError):
            m.diversity_slope_fit(curve, (5, 15))

    @pytest.mark.parametrize("n_t,n_r", [(2, 2), (2, 6), (4, 6)])
    def test_closed_form_reaches_predicted_slope(self, n_t, n_r):
        curve = m.closed_form_curve(np.arange(40.0, 61.0, 2.0), n_t, n_r)
        assert m.diversity_slope_fit(curve, (40, 60)) == pytest.approx(m.diversity_gain_wl(n_t, n_r), rel=1e-3)


class TestSerCurve:
    def test_validation(self):
        with pytest.raises(ValueError):
            m.SerCurve([0, 0], [0.1, 0.05], "closed_form")
        with pytest.raises(ValueError):
            m.SerCurve([0, 1], [0.1, 0.2], "closed_form")
        with pytest.raises(ValueError):
            m.SerCurve([0, 1], [0.1, 1.2], "empirical")
        with pytest.raises(ValueError):
            m.SerCurve([0, 1], [0.1, 0.05], "simulated")
        with pytest.raises(ValueError):
            m.SerCurve([0, 1], [0.1, 0.05], "empirical", stderr=[0.01])

    def test_empirical_may_be_flat(self):
        c = m.SerCurve([0, 1], [0.0, 0.0], "empirical", stderr=[0.0, 0.0])
        assert c.ser == (0.0, 0.0)

    def test_mgf_curve(self):
        c = m.mgf_curve(np.array([0.0, 5.0, 10.0]), SystemConfig(2, 3), 500, np.random.default_rng(3))
        assert c.method == "mgf_quadrature" and len(c.stderr) == 3
