import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wlsinr.mimo_model import (
    SystemConfig,
    augment,
    from_real_composite,
    interference_eigenvalues,
    project_channel,
    real_composite,
    sample_channel,
    sinr_batch,
    sinr_direct,
    sinr_ratio_form,
    sinr_spectral,
    wlmmse_estimate,
)


def rng(seed=0):
    return np.random.default_rng(seed)


class TestConfig:
    def test_rho(self):
        c = SystemConfig(2, 4, e_s=3.0, sigma2=0.5)
        assert c.rho == 3.0 / (0.5 * 2)
        assert c.c == pytest.approx(1 / (2 * c.rho))

    def test_from_db(self):
        c = SystemConfig.from_snr_db(3, 3, 10.0)
        assert c.rho == pytest.approx(10.0)

    @pytest.mark.parametrize("args", [(3, 2), (0, 2), (1, 1, -1.0), (1, 1, 1.0, 0.0)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            SystemConfig(*args)


class TestSampling:
    def test_moments(self):
        h = sample_channel(SystemConfig(2, 2), rng(1), 250_000)
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.005)
        assert abs(np.mean(h ** 2)) < 0.005

    def test_replay(self):
        cfg = SystemConfig(2, 3)
        assert np.array_equal(sample_channel(cfg, rng(9)), sample_channel(cfg, rng(9)))

    def test_shapes(self):
        cfg = SystemConfig(2, 3)
        assert sample_channel(cfg, rng()).shape == (3, 2)
        assert sample_channel(cfg, rng(), (4, 5)).shape == (4, 5, 3, 2)


class TestRepresentations:
    def test_augment(self):
        assert np.array_equal(augment(np.array([[1 + 1j]])), np.array([[1 + 1j], [1 - 1j]]))
        h = sample_channel(SystemConfig(2, 3), rng(2))
        a = augment(h)
        assert np.array_equal(a[3:], np.conj(a[:3]))
        b = augment(np.conj(h))
        assert np.array_equal(b[:3], a[3:]) and np.array_equal(b[3:], a[:3])

    def test_augment_rank(self):
        h = sample_channel(SystemConfig(3, 4), rng(3))
        assert np.linalg.matrix_rank(augment(h)) == 3

    def test_real_composite_roundtrip(self):
        h = sample_channel(SystemConfig(3, 4), rng(4))
        assert np.array_equal(from_real_composite(real_composite(h)), h)


class TestEstimator:
    def test_noiseless_recovery(self):
        cfg = SystemConfig(2, 4, sigma2=1e-12)
        h = sample_channel(cfg, rng(5))
        x = np.array([1.0, -1.0]) * np.sqrt(cfg.e_s / cfg.n_t)
        for j in range(2):
            assert wlmmse_estimate(h, h @ x, j, cfg) == pytest.approx(x[j], abs=1e-4)

    def test_zero_observation(self):
        cfg = SystemConfig(2, 2)
        assert wlmmse_estimate(sample_channel(cfg, rng()), np.zeros(2), 0, cfg) == 0.0

    def test_matches_real_mmse(self):
        # MMSE estimate of a real x from [Re y; Im y] with real noise variance sigma2/2
        cfg = SystemConfig(2, 4, sigma2=0.7)
        r = rng(6)
        h = sample_channel(cfg, r)
        y = h @ np.array([0.4, -0.7]) + (r.standard_normal(4) + 1j * r.standard_normal(4)) * 0.3
        ht = real_composite(h)
        yt = np.concatenate([y.real, y.imag])
        p = cfg.e_s / cfg.n_t
        w = p * ht.T @ np.linalg.inv(p * ht @ ht.T + cfg.sigma2 / 2 * np.eye(8))
        for j in range(2):
            assert wlmmse_estimate(h, y, j, cfg) == pytest.approx(w[j] @ yt, rel=1e-10)

    def test_real_valued_output(self):
        cfg = SystemConfig(3, 4)
        r = rng(7)
        for _ in range(20):
            h = sample_channel(cfg, r)
            y = r.standard_normal(4) + 1j * r.standard_normal(4)
            re, im = wlmmse_estimate(h, y, 1, cfg, return_residue=True)
            assert abs(im) <= 1e-10 * max(abs(re), 1e-300) + 1e-15

    def test_bad_stream(self):
        cfg = SystemConfig(2, 2)
        with pytest.raises(IndexError):
            sinr_direct(sample_channel(cfg, rng()), 2, cfg)


class TestSinr:
    def test_single_stream_unit_channel(self):
        cfg = SystemConfig(1, 3, e_s=2.5)
        h = np.zeros((3, 1), complex)
        h[0, 0] = 1.0
        assert sinr_direct(h, 0, cfg) == pytest.approx(2 * cfg.rho)

    def test_zero_signal(self):
        cfg = SystemConfig(2, 2)
        h = sample_channel(cfg, rng())
        h[:, 1] = 0
        assert sinr_direct(h, 1, cfg) == 0.0

    def test_three_forms_agree(self):
        r = rng(8)
        worst = 0.0
        for _ in range(1000):
            n_t = int(r.integers(2, 5))
            n_r = int(r.integers(n_t, 7))
            cfg = SystemConfig(n_t, n_r, e_s=float(r.choice([0.5, 1, 2, 4])) * n_t)
            h = sample_channel(cfg, r)
            j = int(r.integers(n_t))
            t = sinr_direct(h, j, cfg)
            lam, hh = project_channel(h, j)
            worst = max(worst, abs(sinr_spectral(lam, hh, cfg.rho) - t) / t,
                        abs(sinr_ratio_form(h, j, cfg) - t) / t)
        assert worst <= 1e-9

    def test_batch_matches_direct(self):
        cfg = SystemConfig(3, 4, e_s=6.0)
        h = sample_channel(cfg, rng(9), 50)
        b = sinr_batch(h, 2, cfg.rho)
        assert np.allclose(b, [sinr_direct(x, 2, cfg) for x in h], rtol=1e-12)

    def test_tail_term_mean(self):
        cfg = SystemConfig(2, 3, e_s=2.0)
        r = rng(10)
        tails = []
        for h in sample_channel(cfg, r, 20_000):
            lam, hh = project_channel(h, 0)
            tails.append(2 * cfg.rho * np.sum(hh[1:] ** 2))
        # rho (2 n_r - n_t + 1) = 5
        assert np.mean(tails) == pytest.approx(5.0, rel=0.03)


class TestSpectrum:
    def test_nt2_is_squared_norm(self):
        h = sample_channel(SystemConfig(2, 3), rng(11))
        lam = interference_eigenvalues(h, 0)
        assert lam.shape == (1,)
        assert lam[0] == pytest.approx(np.sum(np.abs(h[:, 1]) ** 2), rel=1e-13)

    def test_matches_full_size_matrix(self):
        h = sample_channel(SystemConfig(3, 4), rng(12))
        hi = real_composite(h[:, [0, 2]])
        full = np.sort(np.linalg.eigvalsh(hi @ hi.T))[::-1][:2]
        assert np.allclose(interference_eigenvalues(h, 1), full, rtol=1e-12)

    def test_descending_and_nonnegative(self):
        lam = interference_eigenvalues(sample_channel(SystemConfig(4, 4), rng(13), 200), 0)
        assert np.all(lam >= 0) and np.all(np.diff(lam, axis=-1) <= 0)

    def test_smallest_eigenvalue_mean_exceeds_one(self):
        lam = interference_eigenvalues(sample_channel(SystemConfig(3, 3), rng(14), 10_000), 0)
        assert lam[:, -1].mean() > 1.0

    @given(st.floats(0, 2 * np.pi))
    @settings(max_examples=25, deadline=None)
    def test_invariant_to_phase_of_removed_column(self, phi):
        h = sample_channel(SystemConfig(3, 4), rng(15))
        g = h.copy()
        g[:, 1] *= np.exp(1j * phi)
        assert np.allclose(interference_eigenvalues(h, 1), interference_eigenvalues(g, 1), atol=1e-10)

    def test_ties_do_not_crash(self):
        h = np.zeros((3, 3), complex)
        h[0, 1] = h[1, 2] = 1.0
        lam = interference_eigenvalues(h, 0)
        assert np.allclose(lam, [1.0, 1.0])

    def test_needs_interference(self):
        with pytest.raises(ValueError):
            interference_eigenvalues(np.ones((2, 1)), 0)


class TestProjection:
    def test_norm_preserved(self):
        r = rng(16)
        for _ in range(50):
            h = sample_channel(SystemConfig(3, 5), r)
            _, hh = project_channel(h, 2)
            assert np.linalg.norm(hh) == pytest.approx(np.linalg.norm(real_composite(h)[:, 2]), rel=1e-12)

    def test_component_variance(self):
        hh = np.array([project_channel(h, 0)[1] for h in sample_channel(SystemConfig(2, 2), rng(17), 40_000)])
        assert np.allclose(hh.var(axis=0), 0.5, rtol=0.03)

    def test_spectral_zero(self):
        assert sinr_spectral(np.array([1.0, 2.0]), np.zeros(6), 1.0) == 0.0
