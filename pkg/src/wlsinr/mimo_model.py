"""Channel representations, the widely linear MMSE receiver and its SINR.

Shapes
------
H : complex (n_r, n_t) channel matrix, column j is stream j's channel.
augmented : complex (2 n_r, n_t), H stacked on conj(H).
real composite : real (2 n_r, ...), Re stacked on Im.

Stream indices are zero-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg


@dataclass(frozen=True)
class SystemConfig:
    """Antenna counts and power budget.

    Parameters
    ----------
    n_t, n_r : int
        Transmit and receive antennas, ``n_t <= n_r``.
    e_s : float
        Total transmit power, split equally over the ``n_t`` streams.
    sigma2 : float
        Noise variance per receive antenna.
    """

    n_t: int
    n_r: int
    e_s: float = 1.0
    sigma2: float = 1.0
    rho: float = field(init=False)

    def __post_init__(self):
        if int(self.n_t) < 1 or int(self.n_r) < 1:
            raise ValueError("antenna counts must be positive")
        if self.n_t > self.n_r:
            raise ValueError(f"need n_t <= n_r, got n_t={self.n_t}, n_r={self.n_r}")
        if not (self.e_s > 0 and self.sigma2 > 0):
            raise ValueError("e_s and sigma2 must be positive")
        object.__setattr__(self, "rho", self.e_s / (self.sigma2 * self.n_t))

    @classmethod
    def from_snr_db(cls, n_t, n_r, snr_db, e_s=1.0):
        """Config whose per-antenna SNR rho equals ``10**(snr_db/10)``."""
        rho = 10.0 ** (snr_db / 10.0)
        return cls(n_t, n_r, e_s, e_s / (rho * n_t))

    @property
    def c(self):
        """Noise loading 1/(2 rho) that shifts the interference eigenvalues."""
        return 0.5 / self.rho


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def sample_channel(config, rng, size=None):
    """Draw i.i.d. CN(0, 1) channel matrices.

    ``size`` prepends batch dimensions, e.g. ``size=1000`` gives shape
    (1000, n_r, n_t).
    """
    shape = (config.n_r, config.n_t) if size is None else tuple(np.atleast_1d(size)) + (config.n_r, config.n_t)
    z = rng.standard_normal(shape + (2,)) * np.sqrt(0.5)
    return z[..., 0] + 1j * z[..., 1]


def augment(h):
    """Stack H on its conjugate along the row axis."""
    h = np.asarray(h)
    return np.concatenate([h, np.conj(h)], axis=-2)


def real_composite(m):
    """Stack real and imaginary parts along the row axis."""
    m = np.asarray(m)
    return np.concatenate([m.real, m.imag], axis=-2)


def from_real_composite(m):
    """Inverse of :func:`real_composite`."""
    m = np.asarray(m)
    n = m.shape[-2] // 2
    return m[..., :n, :] + 1j * m[..., n:, :]


def _check_stream(h, j):
    n_t = np.shape(h)[-1]
    if not 0 <= j < n_t:
        raise IndexError(f"stream index {j} outside 0..{n_t - 1}")


def _without(h, j):
    return np.delete(h, j, axis=-1)


def wlmmse_estimate(h, y, j, config, *, return_residue=False):
    """Widely linear MMSE estimate of the real symbol on stream ``j``.

    x_j = (E_s/N_t) hbar_j^H ((E_s/N_t) Hbar Hbar^H + sigma2 I)^{-1} ybar

    The solve uses a Cholesky factorization of the Hermitian normal matrix.
    The real part is returned; with ``return_residue`` the discarded
    imaginary part is returned as well.
    """
    _check_stream(h, j)
    h = np.asarray(h, dtype=complex)
    hb = augment(h)
    yb = np.concatenate([y, np.conj(y)])
    p = config.e_s / config.n_t
    r = p * hb @ hb.conj().T + config.sigma2 * np.eye(hb.shape[0])
    v = linalg.cho_solve(linalg.cho_factor(r), yb)
    est = p * (hb[:, j].conj() @ v)
    if return_residue:
        return float(est.real), float(est.imag)
    return float(est.real)


def sinr_direct(h, j, config):
    """SINR of stream ``j`` from the interference-plus-noise matrix.

    tau_j = hbar_j^H (Cbar_j + rho^{-1} I)^{-1} hbar_j with
    Cbar_j the Gram matrix of the augmented channel without column ``j``.
    """
    _check_stream(h, j)
    hb = augment(np.asarray(h, dtype=complex))
    hi = _without(hb, j)
    a = hi @ hi.conj().T + np.eye(hb.shape[0]) / config.rho
    hj = hb[:, j]
    v = linalg.cho_solve(linalg.cho_factor(a), hj)
    return float(np.real(hj.conj() @ v))


def sinr_ratio_form(h, j, config):
    """Same SINR through q/(1-q) with q = hbar_j^H (Hbar Hbar^H + rho^{-1} I)^{-1} hbar_j."""
    _check_stream(h, j)
    hb = augment(np.asarray(h, dtype=complex))
    r = hb @ hb.conj().T + np.eye(hb.shape[0]) / config.rho
    hj = hb[:, j]
    q = float(np.real(hj.conj() @ linalg.cho_solve(linalg.cho_factor(r), hj)))
    return q / (1.0 - q)


def sinr_batch(h, j, rho):
    """Vectorized SINR of stream ``j`` for a batch of channels (..., n_r, n_t).

    Works in the real composite domain, where the augmented quadratic form
    becomes htil^T (Ctil + c I)^{-1} htil with c = 1/(2 rho).
    """
    ht = real_composite(np.asarray(h))
    hj = ht[..., :, j]
    hi = _without(ht, j)
    n = ht.shape[-2]
    a = hi @ np.swapaxes(hi, -1, -2) + (0.5 / rho) * np.eye(n)
    v = np.linalg.solve(a, hj[..., None])[..., 0]
    return np.sum(hj * v, axis=-1)


def interference_eigenvalues(h, j):
    """Descending eigenvalues of Htil_<j>^T Htil_<j>, an (n_t-1)-square matrix.

    Htil_<j> is the real composite of H with column ``j`` removed; its Gram
    matrix has the same nonzero spectrum as the 2 n_r-square interference
    matrix.  Ties keep their original order.
    """
    _check_stream(h, j)
    if np.shape(h)[-1] < 2:
        raise ValueError("interference spectrum needs n_t >= 2")
    hi = real_composite(_without(np.asarray(h), j))
    g = np.swapaxes(hi, -1, -2) @ hi
    lam = np.linalg.eigvalsh(g)
    lam = np.clip(lam, 0.0, None)
    order = np.argsort(-lam, axis=-1, kind="stable")
    return np.take_along_axis(lam, order, axis=-1)


def project_channel(h, j):
    """Interference spectrum and the rotated desired channel.

    Returns
    -------
    lam : ndarray, shape (n_t-1,)
        Descending eigenvalues.
    h_hat : ndarray, shape (2 n_r,)
        U^T htil_j, where the columns of U are the left singular vectors of
        Htil_<j> (eigenvectors of the interference matrix) followed by an
        orthonormal basis of its null space.
    """
    _check_stream(h, j)
    h = np.asarray(h)
    ht = real_composite(h)
    hj = ht[:, j]
    if h.shape[-1] == 1:
        return np.zeros(0), hj.copy()
    u, s, _ = np.linalg.svd(_without(ht, j), full_matrices=True)
    return s ** 2, u.T @ hj


def sinr_spectral(lam, h_hat, rho):
    """SINR from the interference spectrum and the projected channel.

    tau = sum_k h_k^2 / (lam_k + 1/(2 rho)) + 2 rho sum_{k >= n_t} h_k^2
    """
    lam = np.asarray(lam, dtype=float)
    h_hat = np.asarray(h_hat, dtype=float)
    k = lam.shape[-1]
    head = np.sum(h_hat[..., :k] ** 2 / (lam + 0.5 / rho), axis=-1)
    tail = 2.0 * rho * np.sum(h_hat[..., k:] ** 2, axis=-1)
    return head + tail
