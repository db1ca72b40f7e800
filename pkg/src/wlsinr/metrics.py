"""Link-level performance metrics: outage, symbol error rate and diversity."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special as sc

from .mimo_model import SystemConfig, interference_eigenvalues, sample_channel
from .sinr_dist import approx_cdf_raw, conditional_mgf, g0
from .special_fn import q_function

SER_METHODS = ("closed_form", "mgf_quadrature", "empirical")

# Gauss-Legendre rule on theta in [0, pi/2]; the integrand vanishes smoothly
# at theta = 0 so no endpoint transformation is needed
_GL_NODES = 64
_gl_x, _gl_w = np.polynomial.legendre.leggauss(_GL_NODES)
_THETA = (_gl_x + 1.0) * (math.pi / 4.0)
_THETA_W = _gl_w * (math.pi / 4.0)


@dataclass(frozen=True)
class SerCurve:
    """Symbol error rate against SNR.

    Attributes
    ----------
    snr_db : tuple of float
        Strictly increasing SNR grid in dB.
    ser : tuple of float
        Error probabilities in (0, 1].
    method : str
        One of :data:`SER_METHODS`.
    stderr : tuple of float, optional
        Standard errors, for estimated curves.
    """

    snr_db: tuple
    ser: tuple
    method: str
    stderr: tuple = None

    def __post_init__(self):
        snr = tuple(float(v) for v in self.snr_db)
        ser = tuple(float(v) for v in self.ser)
        object.__setattr__(self, "snr_db", snr)
        object.__setattr__(self, "ser", ser)
        if self.stderr is not None:
            object.__setattr__(self, "stderr", tuple(float(v) for v in self.stderr))
            if len(self.stderr) != len(ser):
                raise ValueError("stderr length differs from ser")
        if self.method not in SER_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if len(snr) != len(ser):
            raise ValueError("snr_db and ser lengths differ")
        if any(b <= a for a, b in zip(snr, snr[1:])):
            raise ValueError("snr_db must be strictly increasing")
        if any(not 0.0 <= p <= 1.0 for p in ser):
            raise ValueError("ser values must be probabilities")
        if self.method == "closed_form" and any(b >= a for a, b in zip(ser, ser[1:])):
            raise ValueError("closed-form SER must decrease with SNR")


def _check_nt_nr(n_t, n_r):
    if not 1 <= n_t <= n_r:
        raise ValueError(f"need 1 <= n_t <= n_r, got n_t={n_t}, n_r={n_r}")


def outage_probability(tau_o, config, *, raw=False):
    """Probability that the SINR falls below ``tau_o`` (approximate closed form).

    P(alpha, tau_o/(2 rho)) - G0 f_gamma(tau_o) with alpha = (2n_r - n_t + 1)/2
    and f_gamma the Gamma(alpha, 2 rho) density.  The correction term can push
    the raw value slightly below zero near the origin; the result is clamped
    to [0, 1] unless ``raw`` is set.
    """
    if 2 * config.n_r - config.n_t - 1 <= 0 and config.n_t > 1:
        raise ValueError(f"outage closed form needs 2 n_r - n_t - 1 > 0, got n_t={config.n_t}, n_r={config.n_r}")
    t = np.asarray(tau_o, dtype=float)
    if np.any(t < 0):
        raise ValueError("threshold must be nonnegative")
    p = np.asarray(approx_cdf_raw(t, config))
    if not raw:
        p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def conditional_ser(tau):
    """BPSK error probability Q(sqrt(tau)) given the SINR."""
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise ValueError("tau must be nonnegative")
    out = q_function(np.sqrt(t))
    return float(out) if np.ndim(out) == 0 else out


def conditional_ser_approx(tau):
    """Two-exponential approximation exp(-tau/2)/12 + exp(-2 tau/3)/4."""
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise ValueError("tau must be nonnegative")
    out = np.exp(-0.5 * t) / 12.0 + np.exp(-2.0 * t / 3.0) / 4.0
    return float(out) if out.ndim == 0 else out


def ser_closed_form(rho, n_t, n_r):
    """Average BPSK symbol error rate from the approximate SINR law.

    The approximate MGF evaluated at s = -1/2 and s = -2/3 weights the two
    exponentials of :func:`conditional_ser_approx`, giving
    (1 - G0/2)/12 (1 + rho)^-a + (1 - 2 G0/3)/4 (1 + 4 rho/3)^-a
    with a = (2 n_r - n_t + 1)/2.
    """
    _check_nt_nr(n_t, n_r)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("rho must be positive")
    a = (2 * n_r - n_t + 1) / 2.0
    G = g0(n_t, n_r)
    out = (1.0 - G / 2.0) / 12.0 * (1.0 + rho) ** -a + (1.0 - 2.0 * G / 3.0) / 4.0 * (1.0 + 4.0 * rho / 3.0) ** -a
    return float(out) if out.ndim == 0 else out


def _sample_spectra(config, n, rng, j=0, batch=20000):
    out = []
    done = 0
    while done < n:
        m = min(batch, n - done)
        out.append(interference_eigenvalues(sample_channel(config, rng, m), j))
        done += m
    return np.concatenate(out)


def ser_via_mgf(rho, config, n_spectra, rng, *, full_output=False):
    """Average BPSK SER through the MGF integral.

    (1/pi) int_0^{pi/2} G(-1/(2 sin^2 theta)) d theta, where G is the
    conditional MGF averaged over ``n_spectra`` interference spectra drawn
    from ``rng``.  The theta integral uses a fixed 64-point Gauss-Legendre
    rule; the only randomness is in the spectrum average.

    Parameters
    ----------
    rho : float or array_like
        Per-antenna SNR, linear.  An array reuses the same spectra at every
        point, so the curve is smooth in ``rho``.
    config : SystemConfig
        Supplies the antenna counts.
    n_spectra : int
    rng : numpy.random.Generator
    full_output : bool
        Also return the Monte Carlo standard error.
    """
    if n_spectra < 1:
        raise ValueError("n_spectra must be at least 1")
    rhos = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rhos <= 0):
        raise ValueError("rho must be positive")
    n_t, n_r = config.n_t, config.n_r
    lam = _sample_spectra(config, n_spectra, rng) if n_t > 1 else np.zeros((1, 0))
    s = -0.5 / np.sin(_THETA) ** 2
    vals, errs = [], []
    for r in rhos:
        cfg = SystemConfig(n_t, n_r, e_s=r * n_t, sigma2=1.0)
        # (n_spectra, nodes): per-spectrum SER, exact in theta
        per = conditional_mgf(s, lam[:, None, :], cfg) @ _THETA_W / math.pi
        vals.append(float(np.mean(per)))
        errs.append(float(np.std(per, ddof=1) / math.sqrt(per.size)) if per.size > 1 else 0.0)
    vals, errs = np.clip(vals, 0.0, 1.0), np.asarray(errs)
    if np.ndim(rho) == 0:
        vals, errs = float(vals[0]), float(errs[0])
    return (vals, errs) if full_output else vals


def diversity_gain_wl(n_t, n_r):
    """High-SNR SER slope of the widely linear receiver, n_r - (n_t - 1)/2."""
    _check_nt_nr(n_t, n_r)
    return n_r - (n_t - 1) / 2.0


def diversity_gain_lmmse(n_t, n_r):
    """Diversity of the strictly linear MMSE receiver, n_r - n_t + 1."""
    _check_nt_nr(n_t, n_r)
    return float(n_r - n_t + 1)


def diversity_delta(n_t):
    """Gain of widely linear over strictly linear detection, (n_t - 1)/2."""
    if n_t < 1:
        raise ValueError("n_t must be positive")
    return (n_t - 1) / 2.0


def diversity_slope_fit(curve, window_db):
    """Least-squares slope of -log10(SER) against log10(rho) inside a dB window.

    Raises
    ------
    ValueError
        With fewer than three usable points in the window.
    """
    lo, hi = window_db
    snr = np.asarray(curve.snr_db)
    ser = np.asarray(curve.ser)
    sel = (snr >= lo) & (snr <= hi)
    if np.count_nonzero(sel) < 3:
        raise ValueError(f"need at least 3 points in [{lo}, {hi}] dB, have {np.count_nonzero(sel)}")
    if np.any(ser[sel] <= 0):
        raise ValueError("SER must be positive inside the window")
    x = snr[sel] / 10.0
    slope = np.polyfit(x, -np.log10(ser[sel]), 1)[0]
    return float(slope)


def closed_form_curve(snr_db, n_t, n_r):
    """:class:`SerCurve` of :func:`ser_closed_form` on a dB grid."""
    snr_db = np.asarray(snr_db, dtype=float)
    return SerCurve(snr_db, ser_closed_form(10.0 ** (snr_db / 10.0), n_t, n_r), "closed_form")


def mgf_curve(snr_db, config, n_spectra, rng):
    """:class:`SerCurve` of :func:`ser_via_mgf` on a dB grid."""
    snr_db = np.asarray(snr_db, dtype=float)
    v, e = ser_via_mgf(10.0 ** (snr_db / 10.0), config, n_spectra, rng, full_output=True)
    return SerCurve(snr_db, v, "mgf_quadrature", e)


def incomplete_gamma_outage(tau_o, config):
    """Leading term alone, the large-array limit of :func:`outage_probability`."""
    a = (2 * config.n_r - config.n_t + 1) / 2.0
    return sc.gammainc(a, np.asarray(tau_o, dtype=float) / (2.0 * config.rho))
