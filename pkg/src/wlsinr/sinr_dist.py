"""SINR distributions of the widely linear MMSE receiver.

Given the interference spectrum lam_1 > ... > lam_{n_t-1}, the SINR is a sum
of n_t independent gamma variables: shape 1/2 and scale 1/(lam_k + c) for
each interference eigenvalue, plus shape (2 n_r - n_t + 1)/2 and scale 2 rho
for the interference-free subspace, where c = 1/(2 rho).  This module holds
that conditional law, the eigenvalue densities, the exact marginal series
for n_t = 2 and 3, numeric marginalization oracles and the first-order MGF
approximation valid for any n_t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np
from scipy import integrate
from scipy import special as sc
from scipy import stats
from scipy.interpolate import CubicHermiteSpline

from .mimo_model import SystemConfig
from .special_fn import (
    SeriesControl,
    SeriesTruncationError,
    log_lauricella_phi2,
    log_tricomi_u,
    multivariate_gamma,
)

CURVE_KINDS = ("analytic_nt2", "analytic_nt3", "approximate", "empirical", "numeric_oracle")

# the k index of the n_t = 3 series converges only algebraically
NT3_CONTROL = SeriesControl(rel_tol=1e-6, max_terms=4000)
_U_CONTROL = SeriesControl(rel_tol=1e-11)


class IntegrationError(ArithmeticError):
    """Adaptive quadrature did not meet its tolerance."""

    def __init__(self, message, estimate, bound):
        super().__init__(message)
        self.estimate = estimate
        self.bound = bound


@dataclass(frozen=True)
class GammaMixtureParams:
    """Shapes and scales of the independent gamma components."""

    alphas: tuple
    betas: tuple

    def __post_init__(self):
        if len(self.alphas) != len(self.betas) or not self.alphas:
            raise ValueError("alphas and betas must be nonempty and of equal length")
        if min(self.alphas) <= 0 or min(self.betas) <= 0:
            raise ValueError("shapes and scales must be positive")

    @property
    def mean(self):
        return float(sum(a * b for a, b in zip(self.alphas, self.betas)))

    @property
    def total_shape(self):
        return float(sum(self.alphas))


@dataclass(frozen=True)
class DistributionCurve:
    """A density or CDF tabulated on an increasing grid of SINR values."""

    grid: np.ndarray
    values: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}")
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or np.any(np.diff(g) <= 0) or np.any(g < 0):
            raise ValueError("grid must be strictly increasing and nonnegative")
        if np.shape(self.values) != g.shape:
            raise ValueError("values must match the grid")


def _rho(config_or_rho):
    return config_or_rho.rho if isinstance(config_or_rho, SystemConfig) else float(config_or_rho)


# --------------------------------------------------------------------------
# conditional law

def gamma_params(lam, config):
    """Gamma-mixture parameters for a given interference spectrum.

    alpha_k = 1/2, beta_k = 2/(2 lam_k + 1/rho) for each eigenvalue, and a
    final component with alpha = (2 n_r - n_t + 1)/2, beta = 2 rho.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.size != config.n_t - 1:
        raise ValueError(f"expected {config.n_t - 1} eigenvalues, got {lam.size}")
    rho = config.rho
    alphas = (0.5,) * lam.size + ((2 * config.n_r - config.n_t + 1) / 2.0,)
    betas = tuple(2.0 / (2.0 * lam + 1.0 / rho)) + (2.0 * rho,)
    return GammaMixtureParams(alphas, tuple(float(b) for b in betas))


def log_conditional_pdf(tau, params, ctl=None, anchor=None):
    """log of the conditional SINR density; see :func:`conditional_pdf`."""
    a = np.asarray(params.alphas, dtype=float)
    b = np.asarray(params.betas, dtype=float)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    A = a.sum()
    if tau == 0:
        if A == 1:
            return -math.log(b[0])
        return -math.inf if A > 1 else math.inf
    i = int(np.argmin(b)) if anchor is None else int(anchor)
    pre = (A - 1.0) * math.log(tau) - tau / b[i] - float(np.sum(a * np.log(b))) - sc.gammaln(A)
    if a.size == 1:
        return pre
    rest = np.delete(np.arange(a.size), i)
    x = (1.0 / b[i] - 1.0 / b[rest]) * tau
    if np.all(x >= 0):
        return pre + log_lauricella_phi2(a[rest], A, x, ctl)
    from .special_fn import lauricella_phi2
    val = lauricella_phi2(a[rest], A, x, ctl)
    if val <= 0:
        return -math.inf
    return pre + math.log(val)


def conditional_pdf(tau, params, ctl=None, anchor=None):
    """Density of a sum of independent gamma variables.

    f(tau) = tau^{A-1} e^{-tau/beta_1} / (prod beta_k^alpha_k Gamma(A))
             * Phi_2(alpha_2, ...; A; (1/beta_1 - 1/beta_2) tau, ...)

    with A the total shape.  By default the exponential is anchored at the
    smallest scale, so every Phi_2 argument is nonnegative and the series
    has only positive terms.  ``anchor`` selects another component (the
    value is the same; this exists for testing).
    """
    if np.ndim(tau):
        return np.array([conditional_pdf(float(t), params, ctl, anchor) for t in np.ravel(tau)]).reshape(np.shape(tau))
    tau = float(tau)
    if tau > 0:
        # Phi_2 <= e^{max x}: the density is below a gamma-like envelope
        # with the largest scale; skip the series once that underflows
        a, b = np.asarray(params.alphas), np.asarray(params.betas)
        A = a.sum()
        env = (A - 1.0) * math.log(tau) - tau / b.max() - float(np.sum(a * np.log(b))) - sc.gammaln(A)
        if env < -750.0:
            return 0.0
    return math.exp(log_conditional_pdf(tau, params, ctl, anchor))


def sample_gamma_mixture(params, n, rng):
    """Draw ``n`` sums of independent gamma variables."""
    out = np.zeros(n)
    for a, b in zip(params.alphas, params.betas):
        out += rng.gamma(a, b, size=n)
    return out


def conditional_mgf(s, lam, config):
    """E[exp(s tau) | spectrum] = (1 - 2 rho s)^{-(2n_r-n_t+1)/2} prod (1 - 2s/(2 lam_k + 1/rho))^{-1/2}.

    ``lam`` may carry leading batch dimensions; the product runs over the
    last axis.
    """
    rho = config.rho
    lam = np.asarray(lam, dtype=float)
    s = np.asarray(s, dtype=float)
    base0 = 1.0 - 2.0 * rho * s
    base = 1.0 - 2.0 * s[..., None] / (2.0 * lam + 1.0 / rho) if lam.size else np.ones(1)
    if np.any(base0 <= 0) or np.any(base <= 0):
        raise ValueError("s outside the region where the MGF exists")
    alpha = (2 * config.n_r - config.n_t + 1) / 2.0
    logm = -alpha * np.log(base0)
    if lam.size:
        logm = logm - 0.5 * np.sum(np.log(base), axis=-1)
    return np.exp(logm)


# --------------------------------------------------------------------------
# eigenvalue densities

def single_eig_pdf(lam, n_r):
    """Density lam^{n_r-1} e^{-lam}/Gamma(n_r) of the lone eigenvalue when n_t = 2."""
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.exp((n_r - 1) * np.log(lam) - lam - sc.gammaln(n_r))
    out = np.where(lam > 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


def wishart_eig_pdf_general(lambdas, delta, p, q):
    """Joint density of the ordered eigenvalues of a real W_p(delta I, q) matrix."""
    lam = np.asarray(lambdas, dtype=float)
    if lam.size != p:
        raise ValueError("need p eigenvalues")
    if np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
        return 0.0
    logc = (p * p / 2.0) * math.log(math.pi) - (p * q / 2.0) * math.log(2.0 * delta) \
        - multivariate_gamma(p / 2.0, p) - multivariate_gamma(q / 2.0, p)
    logv = np.sum(-lam / (2.0 * delta) + (q - p - 1) / 2.0 * np.log(lam))
    iu = np.triu_indices(p, 1)
    logd = np.sum(np.log((lam[:, None] - lam[None, :])[iu]))
    return math.exp(logc + logv + logd)


def wishart_eig_joint_pdf(lambdas, n_t, n_r):
    """Joint density of the descending interference eigenvalues.

    pi^{p^2/2} / (Gamma_p(n_r) Gamma_p(p/2)) prod e^{-lam_k} lam_k^{n_r - n_t/2}
    prod_{k<l} (lam_k - lam_l), with p = n_t - 1.  Zero outside the ordered
    cone.
    """
    p = n_t - 1
    lam = np.asarray(lambdas, dtype=float)
    if lam.size != p:
        raise ValueError(f"expected {p} eigenvalues")
    if np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
        return 0.0
    logc = (p * p / 2.0) * math.log(math.pi) - multivariate_gamma(n_r, p) - multivariate_gamma(p / 2.0, p)
    iu = np.triu_indices(p, 1)
    logd = np.sum(np.log((lam[:, None] - lam[None, :])[iu]))
    return math.exp(logc + np.sum(-lam + (n_r - n_t / 2.0) * np.log(lam)) + logd)


# --------------------------------------------------------------------------
# exact series, n_t = 2

def nt2_log_terms(tau, n_r, rho, m):
    """log A(m) for the n_t = 2 series, vectorized over the integer array ``m``.

    A(m) = (n_r - 1/2)_m tau^m Gamma(n_r + m) / ((n_r)_m (2 rho)^m m!)
           * U(n_r + m, n_r + m + 3/2, (tau + 1)/(2 rho))
    """
    m = np.asarray(m, dtype=float)
    lp = sc.gammaln(n_r - 0.5 + m) - sc.gammaln(n_r - 0.5) - (sc.gammaln(n_r + m) - sc.gammaln(n_r))
    with np.errstate(divide="ignore"):
        lt = m * math.log(tau) if tau > 0 else np.where(m == 0, 0.0, -np.inf)
    lu = log_tricomi_u(n_r + m, n_r + m + 1.5, (tau + 1.0) / (2.0 * rho))
    return lp + lt + sc.gammaln(n_r + m) - m * math.log(2.0 * rho) - sc.gammaln(m + 1.0) + lu


def _nt2_scalar(tau, n_r, rho, ctl, n_terms):
    if tau == 0:
        return (0.0 if n_r > 1 else math.exp(nt2_log_terms(0.0, n_r, rho, np.zeros(1))[0] - 2 * n_r * math.log(2 * rho))), 1
    lpre = (n_r - 1) * math.log(tau) - tau / (2 * rho) - 2 * n_r * math.log(2 * rho) - 2 * sc.gammaln(n_r)
    if n_terms is not None:
        lt = nt2_log_terms(tau, n_r, rho, np.arange(n_terms))
        return math.exp(lpre + sc.logsumexp(lt)), n_terms
    limit = tau / (tau + 1.0)
    chunk = 64
    logs = np.empty(0)
    while True:
        m = np.arange(logs.size, min(logs.size + chunk, ctl.max_terms))
        logs = np.concatenate([logs, nt2_log_terms(tau, n_r, rho, m)])
        top = logs.max()
        s = np.exp(logs - top).sum()
        last, prev = math.exp(logs[-1] - top), math.exp(logs[-2] - top)
        # term ratios decrease towards tau/(tau+1); the last observed ratio
        # bounds the geometric tail once it is below one
        r = max(last / prev, limit) if prev > 0 else limit
        if r < 1 and last * r / (1 - r) <= ctl.rel_tol * s and prev <= ctl.rel_tol * s:
            return math.exp(lpre + top + math.log(s)), logs.size
        if logs.size >= ctl.max_terms:
            raise SeriesTruncationError(
                f"n_t=2 series not converged after {logs.size} terms at tau={tau}",
                partial_sum=math.exp(lpre + top + math.log(s)), terms=logs.size)
        chunk *= 2


def analytic_pdf_nt2(tau, n_r, rho, ctl=None, *, n_terms=None, full_output=False):
    """Exact SINR density for n_t = 2 as a series of Tricomi functions.

    Parameters
    ----------
    tau : float or array_like
    n_r : int
        Receive antennas, at least 2.
    rho : float or SystemConfig
        Linear per-antenna SNR.
    ctl : SeriesControl, optional
        Truncation once the geometric tail bound drops below ``rel_tol``.
    n_terms : int, optional
        Fixed number of terms instead of the adaptive rule.
    """
    rho = _rho(rho)
    if n_r < 2:
        raise ValueError("n_t = 2 needs n_r >= 2")
    ctl = ctl or SeriesControl()
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(taus < 0):
        raise ValueError("tau must be nonnegative")
    vals = np.empty(taus.size)
    terms = 0
    for i, t in enumerate(taus):
        vals[i], nt = _nt2_scalar(float(t), n_r, rho, ctl, n_terms)
        terms = max(terms, nt)
    out = float(vals[0]) if np.ndim(tau) == 0 else vals.reshape(np.shape(tau))
    if full_output:
        from dataclasses import replace
        return out, replace(ctl, achieved_terms=min(terms, ctl.max_terms), converged=True)
    return out


# --------------------------------------------------------------------------
# exact series, n_t = 3

def _nt3_log_const(n_r, rho):
    # Wishart constant pi^2/(Gamma_2(1) Gamma_2(n_r)) times the factors that
    # come out of the conditional density and the outer lam_1 integral
    logc = 2 * math.log(math.pi) - multivariate_gamma(1.0, 2) - multivariate_gamma(n_r, 2)
    return logc - (n_r - 1) * math.log(2 * rho) - sc.gammaln(n_r)


class _Nt3Series:
    """Four-index series for the n_t = 3 density at one value of tau.

    With c = 1/(2 rho), a = 2 n_r + m1 + m2 + m3 + k and p = 2 + tau the term
    (up to the common factor tau^{n_r-1} e^{-c tau}) is

        (1/2)_m1 (n_r-1)_m2 tau^{m1+m2} / ((n_r)_{m1+m2} m1! m2! m3!)
        * (-1/2)_k / k! * B(n_r - 1/2, m1 + m3 + k + 2)
        * c^{a+1-k} Gamma(a) U(a, a + 2 - k, p c).

    m1, m2 index the Lauricella series of the conditional density, m3 the
    exponential left over after pulling e^{-lam_1} out of the inner
    eigenvalue integral, and k the binomial series of
    sqrt(1 - (1-v) lam_1/(lam_1 + c)), which converges for every v in [0, 1].
    Terms with k >= 1 are negative; all others positive.

    m1 and m3 only enter through n = m1 + m3 once the inner factors are
    combined, so the sum is carried as a three-dimensional array over
    (k, n, m2) in log scale.
    """

    def __init__(self, tau, n_r, rho):
        self.tau, self.n_r, self.rho = tau, n_r, rho
        self.c = 0.5 / rho
        self.z = (2.0 + tau) * self.c
        self._lg = {}

    def _log_gu(self, amax, kmax):
        # Gamma(a) U(a, a+2-k, z) for a = 2 n_r .. amax (rows), k = 0 .. kmax
        have = self._lg.get("shape", (0, -1))
        if have[0] < amax or have[1] < kmax:
            a = np.arange(2 * self.n_r, amax + 1, dtype=float)[:, None]
            k = np.arange(kmax + 1, dtype=float)[None, :]
            a, k = np.broadcast_arrays(a, k)
            self._lg = {"shape": (amax, kmax),
                        "table": np.ascontiguousarray((sc.gammaln(a) + log_tricomi_u(a, a + 2.0 - k, self.z, _U_CONTROL)).T)}
        return self._lg["table"]

    def evaluate(self, n1, n2, n3, kk):
        """Sum over m1 <= n1, m2 <= n2, m3 <= n3, k <= kk.

        Returns log of the common scale, the signed sum and the sum of
        magnitudes at that scale, and for every index the masses of its last
        two slices relative to the sum of magnitudes.
        """
        nr, tau, c = self.n_r, self.tau, self.c
        m1 = np.arange(n1 + 1, dtype=float)[:, None]
        m2 = np.arange(n2 + 1, dtype=float)[None, :]
        lcoef = (sc.gammaln(0.5 + m1) - sc.gammaln(0.5)
                 + sc.gammaln(nr - 1 + m2) - sc.gammaln(nr - 1)
                 - (sc.gammaln(nr + m1 + m2) - sc.gammaln(nr))
                 - sc.gammaln(m1 + 1) - sc.gammaln(m2 + 1) + (m1 + m2) * math.log(tau))
        nn = n1 + n3 + 1
        lg = self._log_gu(2 * nr + nn - 1 + n2 + kk, kk)
        lk = np.concatenate(([0.0], np.cumsum(np.log(np.abs(-0.5 + np.arange(kk)))))) \
            - sc.gammaln(np.arange(kk + 1) + 1.0)
        m2i = np.arange(n2 + 1)[None, :]
        lc = math.log(c)

        def spread(rows, m3s, first=0):
            # rows hold m1 = first, first + 1, ...; collect them at n = m1 + m3
            lo = first + min(m3s)
            d = np.full((first + max(m3s) + rows.shape[0] - lo, n2 + 1), -np.inf)
            for m3 in m3s:
                sl = slice(first + m3 - lo, first + m3 - lo + rows.shape[0])
                d[sl] = np.logaddexp(d[sl], rows - sc.gammaln(m3 + 1))
            return d, lo

        def slice_k(d, first, j):
            # log terms at fixed k = j for rows n = first .. first + len(d) - 1;
            # Gamma(a)U depends on n + m2 only, read through a Hankel view
            n = np.arange(first, first + d.shape[0])[:, None]
            hank = np.lib.stride_tricks.sliding_window_view(lg[j], n2 + 1)
            return (d + (2 * nr + n + m2i + 1) * lc + sc.betaln(nr - 0.5, n + j + 2)
                    + hank[first + j: first + j + d.shape[0]] + lk[j])

        def lsum(t):
            top = t.max()
            return (top, float(np.exp(t - top).sum())) if np.isfinite(top) else (-np.inf, 0.0)

        d_all, _ = spread(lcoef, range(n3 + 1))
        d_m1 = [spread(lcoef[-1:], range(n3 + 1), first=n1), spread(lcoef[-2:-1], range(n3 + 1), first=n1 - 1)]
        parts = []          # (log scale, sum) per k
        m2_edge = []        # per k, masses of the last two m2 columns
        m1_edge = []
        for j in range(kk + 1):
            t = slice_k(d_all, 0, j)
            top, s = lsum(t)
            parts.append((top, s))
            m2_edge.append((top, float(np.exp(t[:, -1] - top).sum()), float(np.exp(t[:, -2] - top).sum())))
            m1_edge.append([lsum(slice_k(d, lo, j)) for d, lo in d_m1])
        top = max(p[0] for p in parts)
        w = [math.exp(p[0] - top) for p in parts]
        pos = parts[0][1] * w[0]
        neg = math.fsum(p[1] * wi for p, wi in zip(parts[1:], w[1:]))
        scale = pos + neg
        ex = lambda ls: math.exp(ls[0] - top) * ls[1] if ls[1] else 0.0
        # m3 is estimated on the dominant k = 0 slice, relative to its mass
        m3 = [lsum(slice_k(*spread(lcoef, [q]), 0)) for q in (n3, n3 - 1)]
        k0 = parts[0][1] * w[0]
        edges = dict(
            k=(parts[-1][1] * w[-1] / scale, parts[-2][1] * w[-2] / scale),
            m2=(math.fsum(math.exp(e[0] - top) * e[1] for e in m2_edge) / scale,
                math.fsum(math.exp(e[0] - top) * e[2] for e in m2_edge) / scale),
            m1=(math.fsum(ex(e[0]) for e in m1_edge) / scale, math.fsum(ex(e[1]) for e in m1_edge) / scale),
            m3=(ex(m3[0]) / k0, ex(m3[1]) / k0),
        )
        logv = _nt3_log_const(nr, self.rho) + (nr - 1) * math.log(tau) - c * tau + top
        return logv, pos - neg, scale, edges


def _tail(last, prev):
    """Geometric tail estimate from the masses of the last two slices."""
    if last == 0.0:
        return 0.0, 0.0
    r = last / prev if prev > 0 else 1.0
    if r >= 1.0:
        return math.inf, r
    return last * r / (1.0 - r), r


def _nt3_scalar(tau, n_r, rho, ctl):
    if tau == 0:
        return 0.0, 1
    ser = _Nt3Series(tau, n_r, rho)
    # starting sizes from the rough decay rates of each index
    size = dict(m1=12 + int(3 * tau), m2=30 + int(12 * tau), m3=16 + int(tau), k=40)
    tol = ctl.rel_tol
    while True:
        logv, total, scale, edges = ser.evaluate(size["m1"], size["m2"], size["m3"], size["k"])
        amp = scale / abs(total) if total else math.inf
        grown = False
        for key, (last, prev) in edges.items():
            tail, r = _tail(last, prev)
            if tail * amp <= tol:
                continue
            if size[key] >= ctl.max_terms:
                raise SeriesTruncationError(
                    f"n_t=3 series not converged at tau={tau} (index {key})",
                    partial_sum=math.exp(logv) * total, terms=sum(size.values()))
            n = size[key]
            if key == "k" and 0.0 < r < 1.0:
                # algebraic decay last ~ k^-p: the tail falls like k^(1-p)
                p = math.log(1.0 / r) / math.log(n / (n - 1.0))
                grow = (tail * amp / tol) ** (1.0 / max(p - 1.0, 0.5))
                new = int(n * min(grow, 4.0) * 1.1) + 4
            elif r < 1.0:
                # solve tail * r^extra = tol, with some slack to avoid a rerun
                extra = math.log(tol / (tail * amp)) / math.log(r)
                new = n + int((1.3 if key == "m1" else 1.1) * extra) + 6
            else:
                new = 2 * n
            size[key] = min(max(new, size[key] + 4), ctl.max_terms)
            grown = True
        if not grown:
            return math.exp(logv) * total, sum(size.values())


def analytic_pdf_nt3(tau, n_r, rho, ctl=None, *, full_output=False):
    """Exact SINR density for n_t = 3 as a convergent four-index series.

    Each index bound grows until the mass on its boundary, carried over into
    a tail estimate, is below ``ctl.rel_tol`` relative to the value.  The
    negative (k >= 1) and positive parts are accumulated separately with
    compensated summation.  Defaults to :data:`NT3_CONTROL`.
    """
    rho = _rho(rho)
    if n_r < 3:
        raise ValueError("n_t = 3 needs n_r >= 3")
    ctl = ctl or NT3_CONTROL
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(taus < 0):
        raise ValueError("tau must be nonnegative")
    vals = np.empty(taus.size)
    terms = 0
    for i, t in enumerate(taus):
        vals[i], nt = _nt3_scalar(float(t), n_r, rho, ctl)
        terms = max(terms, nt)
    out = float(vals[0]) if np.ndim(tau) == 0 else vals.reshape(np.shape(tau))
    if full_output:
        from dataclasses import replace
        return out, replace(ctl, achieved_terms=min(terms, ctl.max_terms), converged=True)
    return out


# --------------------------------------------------------------------------
# numeric marginalization oracle

def general_pdf_numeric(tau, config, *, epsabs=1e-11, epsrel=1e-9, ctl=None, tail=1e-10,
                        full_output=False):
    """SINR density by integrating the conditional density over the spectrum.

    Adaptive Gauss-Kronrod quadrature (QUADPACK) over the ordered eigenvalue
    cone, truncated where the eigenvalue tail mass is below ``tail``.  For
    n_t = 3 the inner variable is v = lam_2/lam_1 and the algebraic endpoint
    factors v^{n_r-3/2}(1-v) are absorbed into the quadrature weight.

    Returns the density, or ``(density, error_bound)`` with ``full_output``.
    The bound is the quadrature estimate plus the truncated tail mass times
    the largest conditional density met.
    """
    if np.ndim(tau):
        res = [general_pdf_numeric(float(t), config, epsabs=epsabs, epsrel=epsrel, ctl=ctl,
                                   tail=tail, full_output=True) for t in np.ravel(tau)]
        vals = np.array([r[0] for r in res]).reshape(np.shape(tau))
        return (vals, np.array([r[1] for r in res]).reshape(np.shape(tau))) if full_output else vals
    tau = float(tau)
    n_t, n_r = config.n_t, config.n_r
    if n_t not in (2, 3):
        raise ValueError("numeric marginalization is implemented for n_t in {2, 3}")
    if tau == 0:
        return (0.0, 0.0) if full_output else 0.0
    peak = [0.0]

    def cond(lam):
        v = math.exp(log_conditional_pdf(tau, gamma_params(lam, config), ctl))
        peak[0] = max(peak[0], v)
        return v

    if n_t == 2:
        L = float(sc.gammainccinv(n_r, tail))
        val, err = integrate.quad(lambda l: cond([l]) * single_eig_pdf(l, n_r), 0.0, L,
                                  epsabs=epsabs, epsrel=epsrel, limit=400)[:2]
    else:
        # lam_1 <= trace, and the trace is Gamma(2 n_r, 1)
        L = float(sc.gammainccinv(2 * n_r, tail))
        logc = (2 * math.log(math.pi) - multivariate_gamma(n_r, 2) - multivariate_gamma(1.0, 2))

        def inner(l1):
            if l1 <= 0:
                return 0.0
            g = lambda v: cond([l1, l1 * v]) * math.exp(logc - l1 * (1 + v) + (2 * n_r - 1) * math.log(l1))
            return integrate.quad(g, 0.0, 1.0, weight="alg", wvar=(n_r - 1.5, 1.0),
                                  epsabs=epsabs, epsrel=epsrel, limit=200)[0]

        val, err = integrate.quad(inner, 0.0, L, epsabs=epsabs, epsrel=epsrel, limit=400)[:2]
    bound = err + tail * peak[0]
    if not (err <= max(100 * epsabs, 100 * epsrel * abs(val))):
        raise IntegrationError(f"marginalization did not converge at tau={tau}", val, bound)
    return (val, bound) if full_output else val


# --------------------------------------------------------------------------
# first-order MGF approximation

def g0(n_t, n_r):
    """Coefficient (n_t - 1)/(2 n_r - n_t) of the first-order MGF correction."""
    d = 2 * n_r - n_t
    if d <= 0:
        raise ValueError(f"need 2 n_r - n_t > 0, got n_t={n_t}, n_r={n_r}")
    return (n_t - 1) / d


def _approx_shape(config):
    return (2 * config.n_r - config.n_t + 1) / 2.0


def approx_mgf(s, config):
    """(1 - 2 rho s)^{-(2n_r - n_t + 1)/2} (1 + G0 s)."""
    s = np.asarray(s, dtype=float)
    base = 1.0 - 2.0 * config.rho * s
    if np.any(base <= 0):
        raise ValueError("s must be below 1/(2 rho)")
    out = base ** (-_approx_shape(config)) * (1.0 + g0(config.n_t, config.n_r) * s)
    return float(out) if out.ndim == 0 else out


def _gamma_logpdf(tau, alpha, beta):
    with np.errstate(divide="ignore"):
        return (alpha - 1.0) * np.log(tau) - tau / beta - alpha * math.log(beta) - sc.gammaln(alpha)


def approx_pdf(tau, config):
    """Signed approximate SINR density.

    Gamma(alpha, 2 rho) density times 1 - G0((alpha - 1)/tau - 1/(2 rho)),
    alpha = (2 n_r - n_t + 1)/2.  The bracket is negative below
    :func:`approx_zero_crossing`.  At tau = 0 the limit is returned: -inf
    when alpha < 2, which is the documented sentinel for that case.
    """
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise ValueError("tau must be nonnegative")
    alpha, beta = _approx_shape(config), 2.0 * config.rho
    G = g0(config.n_t, config.n_r)
    g = stats.gamma.pdf(t, alpha, scale=beta)
    if G > 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = g * (1.0 - G * ((alpha - 1.0) / t - 0.5 / config.rho))
        lim = -math.inf if alpha < 2 else (-G / beta ** 2 if alpha == 2 else -0.0)
        out = np.where(t == 0, lim, out)
    else:
        out = g
    return float(out) if out.ndim == 0 else out


def approx_zero_crossing(config):
    """tau* where the approximate density changes sign (0 when n_t = 1)."""
    G = g0(config.n_t, config.n_r)
    if G == 0:
        return 0.0
    return (_approx_shape(config) - 1.0) / (1.0 / G + 0.5 / config.rho)


def approx_cdf_raw(tau, config):
    """Integral of the signed density from 0: P(alpha, tau/(2 rho)) - G0 g(tau)."""
    t = np.asarray(tau, dtype=float)
    alpha, beta = _approx_shape(config), 2.0 * config.rho
    G = g0(config.n_t, config.n_r)
    with np.errstate(divide="ignore"):
        g = np.where(t > 0, np.exp(_gamma_logpdf(t, alpha, beta)), 0.0)
    out = sc.gammainc(alpha, t / beta) - G * g
    return float(out) if out.ndim == 0 else out


def _clamp_norm(config):
    return 1.0 - approx_cdf_raw(approx_zero_crossing(config), config)


def approx_pdf_clamped(tau, config):
    """Approximate density clipped at zero and renormalized to unit mass."""
    t = np.asarray(tau, dtype=float)
    out = np.where(t > approx_zero_crossing(config), approx_pdf(np.maximum(t, 1e-300), config), 0.0)
    out = np.maximum(out, 0.0) / _clamp_norm(config)
    return float(out) if out.ndim == 0 else out


def approx_cdf_clamped(tau, config):
    """CDF of :func:`approx_pdf_clamped`."""
    t = np.asarray(tau, dtype=float)
    ts = approx_zero_crossing(config)
    base = approx_cdf_raw(ts, config)
    out = np.where(t > ts, (approx_cdf_raw(np.maximum(t, ts), config) - base) / _clamp_norm(config), 0.0)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def approx_moment(n, config):
    """n-th raw moment of the signed approximate density.

    E[tau^n] = m_n + G0 n m_{n-1}, with m_n = (2 rho)^n Gamma(alpha + n)/Gamma(alpha)
    the gamma moments (integration by parts on the correction term).
    """
    alpha, beta = _approx_shape(config), 2.0 * config.rho
    G = g0(config.n_t, config.n_r)
    m = lambda k: math.exp(k * math.log(beta) + sc.gammaln(alpha + k) - sc.gammaln(alpha))
    return m(n) + (G * n * m(n - 1) if n >= 1 else 0.0)


def approx_excess_kurtosis(config):
    """Excess kurtosis of the signed approximate density."""
    m1, m2, m3, m4 = (approx_moment(k, config) for k in (1, 2, 3, 4))
    var = m2 - m1 ** 2
    mu4 = m4 - 4 * m1 * m3 + 6 * m1 ** 2 * m2 - 3 * m1 ** 4
    return mu4 / var ** 2 - 3.0


def approx_quantile(p, config):
    """Quantile of the clamped approximate distribution."""
    from scipy.optimize import brentq
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    lo = approx_zero_crossing(config)
    hi = max(lo, 1.0) * 2
    while approx_cdf_clamped(hi, config) < p:
        hi *= 2
    return brentq(lambda t: approx_cdf_clamped(t, config) - p, lo, hi, xtol=1e-12, rtol=1e-12)


# --------------------------------------------------------------------------
# curves

def sinr_tail_bound(t, n_r, rho):
    """Upper bound on P(tau > t), from tau <= 2 rho |h_j|^2 with |h_j|^2 ~ Gamma(n_r, 1)."""
    return float(sc.gammaincc(n_r, t / (2.0 * _rho(rho))))


def tabulate_cdf(pdf, t_max, n_intervals=160, nodes=6, t_min=None):
    """CDF of a density known only pointwise, as a cubic Hermite interpolant.

    The density is integrated with ``nodes``-point Gauss-Legendre rules on
    log-spaced intervals over [0, t_max]; the cumulative masses are joined
    by a cubic whose slopes at the nodes are the density itself.  Returns
    ``(cdf, mass)`` where ``mass`` is the integral over [0, t_max] and
    ``cdf`` is flat beyond ``t_max``.
    """
    t_min = t_max * 1e-5 if t_min is None else t_min
    edges = np.concatenate(([0.0], np.geomspace(t_min, t_max, n_intervals)))
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = edges[:-1, None], edges[1:, None]
    pts = 0.5 * (b - a) * x + 0.5 * (a + b)
    vals = np.asarray(pdf(np.concatenate((pts.ravel(), edges[1:]))), dtype=float)
    slope = np.concatenate(([0.0], vals[pts.size:]))
    vals = vals[:pts.size].reshape(pts.shape)
    piece = 0.5 * (b - a)[:, 0] * (vals @ w)
    # first interval with t = t_min u^2, which removes a t^{-1/2} singularity
    u = 0.5 * (x + 1.0)
    piece[0] = t_min * np.dot(w * u, np.asarray(pdf(t_min * u ** 2), dtype=float))
    mass = np.concatenate(([0.0], np.cumsum(piece)))
    mass = np.maximum.accumulate(mass)
    # the density may be singular at the origin; use the secant there
    slope[0] = mass[1] / edges[1]
    spline = CubicHermiteSpline(edges, mass, slope, extrapolate=False)

    def cdf(t):
        t = np.asarray(t, dtype=float)
        out = np.where(t >= t_max, mass[-1], spline(np.clip(t, 0.0, t_max)))
        return np.where(t <= 0, 0.0, out)

    return cdf, float(mass[-1])
