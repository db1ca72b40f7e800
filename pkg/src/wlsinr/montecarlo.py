"""Seeded Monte Carlo engine for SINR samples, outage and BPSK error rates.

Random numbers come from per-chunk substreams keyed by (seed, purpose,
chunk index).  The chunk size depends only on the simulation size, never on
the number of workers, so every sample value and its position in the output
are the same for any ``workers`` setting.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .metrics import SerCurve
from .mimo_model import SystemConfig, real_composite, sample_channel, sinr_batch

# substream tags, one per kind of draw
_TAG_SINR = 1
_TAG_SER = 2
_TAG_TRACE = 3
_TAG_TAIL = 4

# realizations per chunk for channel-only work
SINR_CHUNK = 8192
# target number of symbol decisions held in memory per chunk
_SER_CHUNK_DECISIONS = 1 << 19

RECEIVERS = ("wlmmse", "lmmse")


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    Parameters
    ----------
    system : SystemConfig
    seed : int
        Any integer in [0, 2**64).
    n_realizations : int
        Channel draws.
    symbols_per_realization : int
        BPSK symbols sent per stream over each channel draw.
    workers : int
        Threads; results do not depend on this.
    """

    system: SystemConfig
    seed: int = 0
    n_realizations: int = 100_000
    symbols_per_realization: int = 10
    workers: int = 1

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.n_realizations < 1 or self.symbols_per_realization < 1 or self.workers < 1:
            raise ValueError("sizes and workers must be positive")

    def echo(self):
        d = asdict(self)
        d["system"] = asdict(self.system)
        return d


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo estimate with its standard error and sample count."""

    value: float
    stderr: float
    n: int


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    normalized_density: np.ndarray

    @property
    def centers(self):
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


@dataclass
class SimulationReport:
    """Estimates, comparisons against analytic values and timing."""

    config: dict
    estimates: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def add(self, name, est):
        self.estimates[name] = est

    def compare(self, name, analytic, tol, *, relative=False):
        """Record whether estimate ``name`` is within ``tol`` of ``analytic``."""
        est = self.estimates[name]
        gap = abs(est.value - analytic)
        if relative:
            gap /= abs(analytic)
        self.verdicts[name] = dict(estimate=est.value, stderr=est.stderr, n=est.n,
                                   analytic=float(analytic), gap=gap, tol=tol, passed=bool(gap <= tol))
        return self.verdicts[name]["passed"]

    def to_dict(self):
        return dict(config=self.config,
                    estimates={k: asdict(v) for k, v in self.estimates.items()},
                    verdicts=self.verdicts, wall_time=self.wall_time)


def substream(seed, tag, index):
    """Generator for chunk ``index`` of the draws labelled ``tag``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(tag, index)))


def _chunks(total, size):
    return [(i, min(size, total - i * size)) for i in range(math.ceil(total / size))]


def _run(fn, jobs, workers):
    if workers == 1 or len(jobs) == 1:
        return [fn(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda j: fn(*j), jobs))


def empirical_sinr(cfg, j=0):
    """SINR of stream ``j`` over ``cfg.n_realizations`` fresh channels."""
    system = cfg.system
    if not 0 <= j < system.n_t:
        raise IndexError(f"stream index {j} outside 0..{system.n_t - 1}")

    def work(idx, n):
        h = sample_channel(system, substream(cfg.seed, _TAG_SINR, idx), n)
        return sinr_batch(h, j, system.rho)

    return np.concatenate(_run(work, _chunks(cfg.n_realizations, SINR_CHUNK), cfg.workers))


def interference_trace(cfg):
    """Half the trace of the inverse interference Gram matrix, per channel draw.

    Its mean is the first-order correction coefficient of the approximate
    SINR law.
    """
    system = cfg.system
    if system.n_t < 2:
        raise ValueError("needs n_t >= 2")

    def work(idx, n):
        h = sample_channel(system, substream(cfg.seed, _TAG_TRACE, idx), n)
        hi = real_composite(h[..., 1:])
        g = np.swapaxes(hi, -1, -2) @ hi
        return 0.5 * np.trace(np.linalg.inv(g), axis1=-2, axis2=-1)

    return np.concatenate(_run(work, _chunks(cfg.n_realizations, SINR_CHUNK), cfg.workers))


def histogram(samples, bins="fd", range=None):
    """Density-normalized histogram, Freedman-Diaconis bins by default."""
    x = np.asarray(samples, dtype=float)
    edges = np.histogram_bin_edges(x, bins=bins, range=range)
    counts, edges = np.histogram(x, bins=edges)
    width = np.diff(edges)
    dens = counts / (counts.sum() * width) if counts.sum() else np.zeros_like(width)
    return Histogram(edges, counts, dens)


def empirical_outage(samples, tau_o):
    """Fraction of samples at or below ``tau_o``.

    The standard error is that of the Wilson score interval at one sigma,
    which stays positive when no sample (or every sample) falls below the
    threshold.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    k = int(np.count_nonzero(x <= tau_o))
    p = k / n
    se = math.sqrt(n * p * (1 - p) + 0.25) / (n + 1.0)
    return Estimate(p, se, n)


def ks_distance(samples, cdf):
    """Kolmogorov-Smirnov sup distance between the sample and ``cdf``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    return float(stats.kstest(x, cdf).statistic)


# --------------------------------------------------------------------------
# BPSK error rates

def _ser_chunk_size(cfg):
    s = cfg.symbols_per_realization * cfg.system.n_t
    return max(1, _SER_CHUNK_DECISIONS // s)


def _error_counts(cfg, rhos, idx, n):
    """Per-realization error counts (receiver, rho, realization) for one chunk.

    Both receivers and every SNR see the same channels, symbols and unit
    noise; only the noise scale changes with SNR.
    """
    system = cfg.system
    n_t, n_r, s = system.n_t, system.n_r, cfg.symbols_per_realization
    rng = substream(cfg.seed, _TAG_SER, idx)
    h = sample_channel(system, rng, n)                                  # (n, n_r, n_t)
    bits = rng.integers(0, 2, size=(n, n_t, s)).astype(float) * 2 - 1   # (n, n_t, s)
    z = rng.standard_normal((n, 2 * n_r, s)) * math.sqrt(0.5)          # unit CN noise, composite
    ht = real_composite(h)                                              # (n, 2 n_r, n_t)
    # per-stream amplitude sqrt(E_s/n_t) with E_s = 1, noise variance 1/(n_t rho)
    amp = math.sqrt(1.0 / n_t)
    sig = amp * (ht @ bits)
    gram_wl = np.swapaxes(ht, -1, -2) @ ht
    hc = h.conj().swapaxes(-1, -2)
    gram_l = hc @ h
    eye = np.eye(n_t)
    out = np.empty((2, len(rhos), n), dtype=np.int64)
    for i, rho in enumerate(rhos):
        sigma = math.sqrt(1.0 / (n_t * rho))
        yt = sig + sigma * z
        # widely linear MMSE is the real MMSE filter on the composite signal
        x_wl = np.linalg.solve(gram_wl + (0.5 / rho) * eye, np.swapaxes(ht, -1, -2) @ yt)
        y = yt[:, :n_r] + 1j * yt[:, n_r:]
        x_l = np.linalg.solve(gram_l + (1.0 / rho) * eye, hc @ y).real
        out[0, i] = np.count_nonzero(np.sign(x_wl) != bits, axis=(1, 2))
        out[1, i] = np.count_nonzero(np.sign(x_l) != bits, axis=(1, 2))
    return out


def _ser_counts(cfg, rho_grid_db):
    rhos = 10.0 ** (np.asarray(rho_grid_db, dtype=float) / 10.0)
    jobs = [(rhos, i, n) for i, n in _chunks(cfg.n_realizations, _ser_chunk_size(cfg))]
    parts = _run(lambda r, i, n: _error_counts(cfg, r, i, n), jobs, cfg.workers)
    return np.concatenate(parts, axis=2)


def _cluster_estimates(counts, per_real):
    # each realization is one cluster of per_real decisions
    rate = counts / per_real
    n = rate.shape[-1]
    val = rate.mean(axis=-1)
    se = rate.std(axis=-1, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(val)
    return val, se


def empirical_ser_paired(cfg, rho_grid_db):
    """Error rates of both receivers on shared draws.

    Returns
    -------
    dict
        ``wlmmse`` and ``lmmse`` :class:`SerCurve` objects plus
        ``diff`` (lmmse - wlmmse per point) and ``diff_stderr``, the
        standard error of the paired difference.
    """
    counts = _ser_counts(cfg, rho_grid_db)
    per = cfg.symbols_per_realization * cfg.system.n_t
    wl, wl_se = _cluster_estimates(counts[0], per)
    ll, ll_se = _cluster_estimates(counts[1], per)
    d, d_se = _cluster_estimates(counts[1] - counts[0], per)
    return dict(wlmmse=SerCurve(rho_grid_db, wl, "empirical", wl_se),
                lmmse=SerCurve(rho_grid_db, ll, "empirical", ll_se),
                diff=d, diff_stderr=d_se, decisions=int(counts.shape[-1] * per))


def empirical_ser(cfg, receiver, rho_grid_db):
    """Empirical BPSK symbol error rate of one receiver over an SNR grid.

    Symbols are +-sqrt(E_s/n_t) on every stream, noise is CN(0, sigma2).
    ``lmmse`` applies the strictly linear MMSE filter to y alone.  Calls with
    the same ``cfg`` share all random draws, so curves of the two receivers
    are paired.
    """
    if receiver not in RECEIVERS:
        raise ValueError(f"receiver must be one of {RECEIVERS}")
    return empirical_ser_paired(cfg, rho_grid_db)[receiver]


def timed(fn, *args, **kw):
    """Call ``fn`` and return (result, seconds)."""
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def tail_term_samples(cfg, j=0):
    """Interference-free part 2 rho sum_{k >= n_t} h_hat_k^2 of the SINR, per draw.

    This is the energy of the desired channel outside the span of the
    interfering columns, scaled by 2 rho.
    """
    system = cfg.system

    def work(idx, n):
        h = sample_channel(system, substream(cfg.seed, _TAG_TAIL, idx), n)
        ht = real_composite(h)
        hj = ht[..., j]
        if system.n_t == 1:
            return 2.0 * system.rho * np.sum(hj ** 2, axis=-1)
        u = np.linalg.svd(np.delete(ht, j, axis=-1), full_matrices=True)[0]
        proj = np.swapaxes(u, -1, -2) @ hj[..., None]
        return 2.0 * system.rho * np.sum(proj[:, system.n_t - 1:, 0] ** 2, axis=-1)

    return np.concatenate(_run(work, _chunks(cfg.n_realizations, SINR_CHUNK), cfg.workers))
