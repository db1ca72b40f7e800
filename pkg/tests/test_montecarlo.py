import math

import numpy as np
import pytest
from scipy import special as sc
from scipy import stats

from wlsinr import metrics as m
from wlsinr import montecarlo as mc
from wlsinr import sinr_dist as sd
from wlsinr.mimo_model import SystemConfig


def sim(n_t, n_r, db, **kw):
    return mc.SimConfig(SystemConfig.from_snr_db(n_t, n_r, db), **kw)


class TestConfig:
    def test_rejects(self):
        with pytest.raises(ValueError):
            sim(2, 2, 0, seed=-1)
        with pytest.raises(ValueError):
            sim(2, 2, 0, n_realizations=0)
        with pytest.raises(ValueError):
            sim(2, 2, 0, workers=0)

    def test_echo_is_plain(self):
        d = sim(2, 3, 3, seed=7).echo()
        assert d["seed"] == 7 and d["system"]["n_r"] == 3

    def test_substreams_differ(self):
        a = mc.substream(1, 1, 0).random(4)
        assert not np.array_equal(a, mc.substream(1, 1, 1).random(4))
        assert not np.array_equal(a, mc.substream(1, 2, 0).random(4))
        assert np.array_equal(a, mc.substream(1, 1, 0).random(4))


class TestDeterminism:
    def test_workers_do_not_change_results(self):
        a = mc.empirical_sinr(sim(2, 3, 3, seed=11, n_realizations=30_000, workers=1))
        b = mc.empirical_sinr(sim(2, 3, 3, seed=11, n_realizations=30_000, workers=4))
        assert np.array_equal(a, b)

    def test_prefix_stable(self):
        # chunking is fixed, so a longer run extends a shorter one
        a = mc.empirical_sinr(sim(2, 2, 0, seed=3, n_realizations=10_000))
        b = mc.empirical_sinr(sim(2, 2, 0, seed=3, n_realizations=20_000))
        assert np.array_equal(a, b[:10_000])

    def test_ser_workers(self):
        a = mc.empirical_ser_paired(sim(2, 2, 0, seed=5, n_realizations=3000, workers=1), [0.0, 10.0])
        b = mc.empirical_ser_paired(sim(2, 2, 0, seed=5, n_realizations=3000, workers=3), [0.0, 10.0])
        assert a["wlmmse"] == b["wlmmse"] and np.array_equal(a["diff"], b["diff"])


class TestSinrSamples:
    def test_single_stream_law(self):
        cfg = sim(1, 3, 3, n_realizations=50_000)
        x = mc.empirical_sinr(cfg)
        rho = cfg.system.rho
        assert mc.ks_distance(x, lambda t: sc.gammainc(3, t / (2 * rho))) < 0.01
        assert x.mean() == pytest.approx(2 * rho * 3, rel=0.02)

    def test_nt2_against_exact_law(self):
        cfg = sim(2, 2, 3, seed=1, n_realizations=50_000)
        cdf, _ = sd.tabulate_cdf(lambda t: sd.analytic_pdf_nt2(t, 2, cfg.system.rho), 80.0, n_intervals=80)
        assert mc.ks_distance(mc.empirical_sinr(cfg), cdf) < 1.63 / math.sqrt(50_000)

    def test_stream_index(self):
        x = mc.empirical_sinr(sim(3, 3, 3, n_realizations=2000), j=2)
        assert x.shape == (2000,) and np.all(x > 0)

    def test_trace_identity(self):
        # E tr((H~^T H~)^-1)/2 = (n_t - 1)/(2 n_r - n_t) with the interfering columns of the real composite
        t = mc.interference_trace(sim(3, 4, 0, n_realizations=40_000))
        assert t.mean() == pytest.approx(2 / 5, rel=0.02)

    def test_tail_term(self):
        cfg = sim(3, 4, 3, n_realizations=40_000)
        x = mc.tail_term_samples(cfg)
        a = (2 * 4 - 3 + 1) / 2
        assert x.mean() == pytest.approx(2 * cfg.system.rho * a, rel=0.02)
        assert mc.ks_distance(x, lambda t: sc.gammainc(a, t / (2 * cfg.system.rho))) < 0.01


class TestHistogramAndOutage:
    def test_histogram_normalized(self):
        h = mc.histogram(np.random.default_rng(0).gamma(2.0, size=10_000))
        assert np.sum(h.normalized_density * np.diff(h.bin_edges)) == pytest.approx(1.0)
        assert h.centers.size == h.counts.size

    def test_histogram_matches_density(self):
        x = np.random.default_rng(1).gamma(3.0, size=200_000)
        h = mc.histogram(x, bins=40, range=(0, 10))
        assert np.allclose(h.normalized_density * h.counts.sum() / x.size,
                           stats.gamma.pdf(h.centers, 3.0), atol=0.01)

    def test_wilson_error(self):
        e = mc.empirical_outage(np.arange(100.0), 9.5)
        assert e.value == 0.1 and e.n == 100
        assert e.stderr == pytest.approx(math.sqrt(100 * 0.09 + 0.25) / 101)
        assert mc.empirical_outage(np.ones(10), 0.5).stderr > 0

    def test_outage_against_closed_form(self):
        cfg = sim(2, 4, 3, seed=2, n_realizations=100_000)
        e = mc.empirical_outage(mc.empirical_sinr(cfg), 4.0)
        assert abs(e.value - m.outage_probability(4.0, cfg.system)) <= 3 * e.stderr + 2e-3

    def test_report(self):
        r = mc.SimulationReport(config={"a": 1})
        r.add("p", mc.Estimate(0.1, 0.01, 100))
        assert r.compare("p", 0.105, 0.01)
        assert not r.compare("p", 0.2, 0.1, relative=True)
        assert r.to_dict()["estimates"]["p"]["n"] == 100


class TestSer:
    def test_widely_linear_not_worse(self):
        out = mc.empirical_ser_paired(sim(2, 2, 0, seed=4, n_realizations=20_000), [0.0, 5.0, 10.0])
        assert np.all(out["diff"] >= -3 * out["diff_stderr"])
        assert out["diff"][-1] > 3 * out["diff_stderr"][-1]
        assert out["decisions"] == 20_000 * 10 * 2

    def test_high_snr_rate_is_tiny(self):
        c = mc.empirical_ser(sim(2, 4, 0, n_realizations=5000), "wlmmse", [40.0])
        assert c.ser[0] < 1e-4

    def test_matches_mgf_route(self):
        cfg = sim(2, 3, 0, seed=6, n_realizations=40_000)
        c = mc.empirical_ser(cfg, "wlmmse", [5.0])
        v, e = m.ser_via_mgf(10 ** 0.5, cfg.system, 40_000, np.random.default_rng(7), full_output=True)
        assert abs(c.ser[0] - v) <= 4 * math.hypot(c.stderr[0], e)

    def test_bad_receiver(self):
        with pytest.raises(ValueError):
            mc.empirical_ser(sim(2, 2, 0, n_realizations=10), "zf", [0.0])

    def test_timed(self):
        out, sec = mc.timed(sum, [1, 2])
        assert out == 3 and sec >= 0
