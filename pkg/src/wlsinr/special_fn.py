"""Special-function kernels: gamma family, Pochhammer symbols, confluent
hypergeometric functions and the Gaussian tail function.

Everything that can overflow is carried in log scale.  Series-based routines
accept a :class:`SeriesControl` and, with ``full_output=True``, hand back a
copy of it with ``achieved_terms`` and ``converged`` filled in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special as sc

__all__ = [
    "SeriesControl",
    "SeriesTruncationError",
    "ln_gamma",
    "reg_lower_incomplete_gamma",
    "multivariate_gamma",
    "pochhammer_rising",
    "log_pochhammer",
    "kummer_m",
    "log_kummer_m",
    "tricomi_u",
    "log_tricomi_u",
    "lauricella_phi2",
    "log_lauricella_phi2",
    "q_function",
    "q_approx",
]


@dataclass(frozen=True)
class SeriesControl:
    """Truncation settings for infinite series.

    Attributes
    ----------
    rel_tol : float
        Stop once the remaining tail is below ``rel_tol`` times the running sum.
    max_terms : int
        Hard budget on the number of terms (per index for multi-index series).
    achieved_terms, converged
        Outputs; only meaningful on the copy returned with ``full_output=True``.
    """

    rel_tol: float = 1e-12
    max_terms: int = 10_000
    achieved_terms: int = 0
    converged: bool = False

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_terms) < 1:
            raise ValueError(f"max_terms must be >= 1, got {self.max_terms}")
        if self.achieved_terms > self.max_terms:
            raise ValueError("achieved_terms exceeds max_terms")


class SeriesTruncationError(ArithmeticError):
    """Raised when a series does not meet its tolerance within the term budget.

    The partial sum and the number of terms used are kept as attributes so the
    caller can decide whether the value is still usable.
    """

    def __init__(self, message, partial_sum, terms):
        super().__init__(message)
        self.partial_sum = partial_sum
        self.terms = terms


_DEFAULT = SeriesControl()


def _ctl(ctl):
    return _DEFAULT if ctl is None else ctl


def _done(ctl, value, terms, full_output):
    if full_output:
        return value, replace(ctl, achieved_terms=int(terms), converged=True)
    return value


# --------------------------------------------------------------------------
# gamma family

def ln_gamma(a):
    """Natural log of the gamma function for positive arguments."""
    arr = np.asarray(a, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError(f"ln_gamma requires a > 0, got {a}")
    out = sc.gammaln(arr)
    return float(out) if out.ndim == 0 else out


def reg_lower_incomplete_gamma(a, x):
    """Regularized lower incomplete gamma function P(a, x) = gamma(a, x)/Gamma(a)."""
    aa = np.asarray(a, dtype=float)
    xx = np.asarray(x, dtype=float)
    if np.any(~(aa > 0)):
        raise ValueError(f"shape a must be positive, got {a}")
    if np.any(~(xx >= 0)):
        raise ValueError(f"x must be nonnegative, got {x}")
    out = sc.gammainc(aa, xx)
    return float(out) if out.ndim == 0 else out


def multivariate_gamma(a, b):
    """Log of the real multivariate gamma function Gamma_b(a).

    log Gamma_b(a) = b(b-1)/4 log(pi) + sum_{i=1..b} log Gamma(a + (1-i)/2)
    """
    b = int(b)
    if b < 1:
        raise ValueError(f"dimension b must be >= 1, got {b}")
    args = a + (1.0 - np.arange(1, b + 1)) / 2.0
    if np.any(args <= 0):
        raise ValueError(f"multivariate gamma undefined for a={a}, b={b}")
    return b * (b - 1) / 4.0 * math.log(math.pi) + float(np.sum(sc.gammaln(args)))


def pochhammer_rising(a, n):
    """Rising factorial (a)_n = a (a+1) ... (a+n-1), with (a)_0 = 1."""
    n = int(n)
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    return math.prod(a + i for i in range(n)) if n else 1.0


def log_pochhammer(a, n):
    """log (a)_n for a > 0; vectorized over both arguments."""
    a = np.asarray(a, dtype=float)
    n = np.asarray(n, dtype=float)
    return sc.gammaln(a + n) - sc.gammaln(a)


def _log_rising_seq(a, n):
    """log|(a)_m| and sign((a)_m) for m = 0..n-1 by cumulative sums.

    Cumulative sums stay accurate when a is large and m small, where a
    difference of two log-gammas would lose digits.
    """
    f = a + np.arange(n - 1, dtype=float)
    with np.errstate(divide="ignore"):
        lf = np.log(np.abs(f))
    lg = np.concatenate(([0.0], np.cumsum(lf)))
    sg = np.concatenate(([1.0], np.cumprod(np.sign(f))))
    return lg, sg


# --------------------------------------------------------------------------
# Kummer M

def _positive_log_series(log_ratio, ctl, n0):
    """Log of sum_m t_m with t_0 = 1 and t_{m+1}/t_m = exp(log_ratio(m)) > 0.

    The tail beyond the last kept term is bounded geometrically by the last
    ratio once that ratio has dropped below one.
    """
    n = max(int(n0), 4)
    while True:
        n = min(n, ctl.max_terms)
        lr = log_ratio(np.arange(n, dtype=float))
        lt = np.concatenate(([0.0], np.cumsum(lr[:-1])))
        top = lt.max()
        s = np.exp(lt - top).sum()
        r = math.exp(min(lr[-1], 0.0)) if lr[-1] < 0 else 1.0
        last = math.exp(lt[-1] - top)
        prev = math.exp(lt[-2] - top)
        if r < 1.0 and last * r / (1.0 - r) <= ctl.rel_tol * s and prev <= ctl.rel_tol * s:
            return top + math.log(s), n
        if n >= ctl.max_terms:
            raise SeriesTruncationError(
                f"positive series not converged after {n} terms",
                partial_sum=math.exp(min(top + math.log(s), 709.0)), terms=n)
        n *= 2


def _signed_series(ratio, ctl, n0):
    """Linear-scale series with possibly alternating terms, summed by fsum."""
    n = max(int(n0), 4)
    while True:
        n = min(n, ctl.max_terms)
        r = ratio(np.arange(n, dtype=float))
        t = np.concatenate(([1.0], np.cumprod(r[:-1])))
        s = math.fsum(t)
        scale = max(abs(s), np.finfo(float).tiny)
        tail_ok = abs(t[-1]) <= ctl.rel_tol * scale and abs(t[-2]) <= ctl.rel_tol * scale
        if tail_ok and (t[-1] == 0.0 or abs(r[-1]) < 0.5):
            return s, n
        if n >= ctl.max_terms:
            raise SeriesTruncationError(
                f"series not converged after {n} terms", partial_sum=s, terms=n)
        n *= 2


def _check_b(b):
    if b <= 0 and float(b).is_integer():
        raise ValueError(f"b must not be a non-positive integer, got {b}")


def _kummer_terms_guess(a, b, x):
    ax = abs(x)
    return int(ax * max(1.0, abs(a) / max(abs(b), 1.0)) + 10 * math.sqrt(ax) + abs(a) + 30)


def log_kummer_m(a, b, x, ctl=None, *, full_output=False):
    """log M(a, b, x) for parameter sets where M is a positive-term series.

    Covers x >= 0 with a, b > 0, and x < 0 with b > a, b > 0 (through the
    Kummer transformation M(a,b,x) = e^x M(b-a, b, -x)).
    """
    ctl = _ctl(ctl)
    _check_b(b)
    if x == 0 or a == 0:
        return _done(ctl, 0.0, 1, full_output)
    if x < 0:
        if not (b > 0 and b - a > 0):
            raise ValueError("log_kummer_m needs b > a for negative x; use kummer_m")
        val = log_kummer_m(b - a, b, -x, ctl, full_output=full_output)
        if full_output:
            return x + val[0], val[1]
        return x + val
    if not (a > 0 and b > 0):
        raise ValueError("log_kummer_m needs a, b > 0 for positive x; use kummer_m")
    lx = math.log(x)

    def log_ratio(m):
        return np.log(a + m) - np.log(b + m) - np.log1p(m) + lx

    val, n = _positive_log_series(log_ratio, ctl, _kummer_terms_guess(a, b, x))
    return _done(ctl, val, n, full_output)


def kummer_m(a, b, x, ctl=None, *, full_output=False):
    """Confluent hypergeometric function of the first kind, M(a, b, x).

    Parameters
    ----------
    a, b, x : float
        ``b`` must not be a non-positive integer.
    ctl : SeriesControl, optional
    full_output : bool
        Also return the updated :class:`SeriesControl`.

    Notes
    -----
    Positive-term cases are summed in log scale; negative ``x`` with
    ``b > a`` goes through the Kummer transformation so no cancellation
    occurs.  Remaining cases fall back to direct summation with ``math.fsum``.
    """
    ctl = _ctl(ctl)
    _check_b(b)
    if (x > 0 and a > 0 and b > 0) or (x < 0 and b > 0 and b - a > 0) or x == 0:
        out = log_kummer_m(a, b, x, ctl, full_output=full_output)
        if full_output:
            return math.exp(out[0]), out[1]
        return math.exp(out)

    def ratio(m):
        return (a + m) * x / ((b + m) * (m + 1.0))

    val, n = _signed_series(ratio, ctl, _kummer_terms_guess(a, b, x))
    return _done(ctl, val, n, full_output)


# --------------------------------------------------------------------------
# Tricomi U via double-exponential quadrature of its integral representation

def _u_peak(a, b, x):
    # stationary point in t of a log t + (b-a-1) log(1+t) - x t, i.e. the
    # positive root of x t^2 - (b-1-x) t - a = 0
    B = b - 1.0 - x
    disc = np.sqrt(B * B + 4.0 * x * a)
    with np.errstate(divide="ignore", invalid="ignore"):
        big = (B + disc) / (2.0 * x)
        small = 2.0 * a / (disc - B)
    return np.where(B >= 0, big, small)


def _log_u_kernel(a, b, x, tp, s):
    lt = np.log(tp) + s
    return a * lt + (b - a - 1.0) * np.logaddexp(0.0, lt) - x * np.exp(lt)


def log_tricomi_u(a, b, x, ctl=None, *, full_output=False):
    """log U(a, b, x) for a > 0, x > 0; broadcasts over array arguments.

    Uses U = (1/Gamma(a)) int_0^inf e^{-xt} t^{a-1} (1+t)^{b-a-1} dt in the
    variable s = log(t/t*), centred at the integrand peak t* and scaled by the
    peak curvature, then mapped by s = w sinh(u) and integrated with the
    trapezoid rule, halving the step until successive levels agree to
    ``rel_tol``.  Accuracy is uniform in a, which matters for the large
    first parameters met in the exact PDF series.
    """
    ctl = _ctl(ctl)
    a, b, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, x)))
    if np.any(~(a > 0)) or np.any(~(x > 0)):
        raise ValueError("log_tricomi_u requires a > 0 and x > 0")
    shape = a.shape
    a, b, x = a.ravel(), b.ravel(), x.ravel()
    out = np.empty(a.size)
    levels = 0
    for lo in range(0, a.size, 1024):
        sl = slice(lo, lo + 1024)
        out[sl], lev = _log_u_batch(a[sl], b[sl], x[sl], ctl)
        levels = max(levels, lev)
    val = out.reshape(shape)
    if val.ndim == 0:
        val = float(val)
    return _done(ctl, val, levels, full_output)


def _log_u_batch(a, b, x, ctl):
    tp = _u_peak(a, b, x)
    r = tp / (1.0 + tp)
    curv = a + (b - a - 1.0) * r * r
    # a wide, flat peak (small a) would leave the steep e^{-xt} edge
    # unresolved, so the scale is capped at one
    w = np.minimum(1.0 / np.sqrt(curv), 1.0)
    # reach e^{-40} both in the Gaussian core (s ~ 9w) and in the left tail,
    # which decays only like exp(a s)
    umax = np.arcsinh(np.maximum(40.0 / (a * w), 12.0)) + 0.5
    U = math.ceil(2.0 * min(float(np.max(umax)), 12.0)) / 2.0
    a_, b_, x_, tp_, w_ = (v[:, None] for v in (a, b, x, tp, w))
    f0 = _log_u_kernel(a_, b_, x_, tp_, 0.0)

    def total(u):
        s = w_ * np.sinh(u)
        with np.errstate(over="ignore", invalid="ignore"):
            lf = _log_u_kernel(a_, b_, x_, tp_, s) - f0 + np.log(np.cosh(u))
        lf = np.where(np.isfinite(lf), lf, -np.inf)
        return np.exp(lf).sum(axis=1)

    h = 0.5
    u = np.arange(-math.floor(U / h), math.floor(U / h) + 1) * h
    acc = h * total(u)
    level = 0
    while True:
        level += 1
        h /= 2.0
        k = np.arange(-math.floor(U / h), math.floor(U / h) + 1)
        u = k[k % 2 == 1] * h
        new = 0.5 * acc + h * total(u)
        if np.all(np.abs(new - acc) <= ctl.rel_tol * np.abs(new)):
            acc = new
            break
        acc = new
        if level >= 14:
            raise SeriesTruncationError(
                "U quadrature did not reach tolerance", partial_sum=acc, terms=level)
    res = f0[:, 0] + np.log(w) + np.log(acc) - sc.gammaln(a)
    return res, level


def tricomi_u(a, b, x, ctl=None, *, full_output=False):
    """Confluent hypergeometric function of the second kind, U(a, b, x).

    Requires a > 0 and x > 0.  See :func:`log_tricomi_u` for the method; use
    that function directly when the value may overflow.
    """
    out = log_tricomi_u(a, b, x, ctl, full_output=full_output)
    if full_output:
        return np.exp(out[0]), out[1]
    return np.exp(out)


# --------------------------------------------------------------------------
# confluent Lauricella Phi_2

def _phi2_shells(b, c, x, L):
    """Signed log-magnitudes of the total-order shells N = 0..L.

    Each one-dimensional sequence (b_i)_m/m! (x_i/X)^m is scaled by its own
    maximum and the sequences are convolved; the common factor X^N/(c)_N is
    restored per shell.  Dividing every x_i by X = max|x_i| keeps the
    convolution inside floating-point range.
    """
    X = float(np.max(np.abs(x)))
    conv = np.ones(1)
    offset = 0.0
    m = np.arange(L, dtype=float)
    for bi, xi in zip(b, x):
        if xi == 0.0:
            continue
        lb, sb = _log_rising_seq(bi, L + 1)
        lseq = lb - np.concatenate(([0.0], np.cumsum(np.log1p(m)))) + np.arange(L + 1) * math.log(abs(xi) / X)
        sseq = sb * (np.sign(xi) ** np.arange(L + 1))
        top = np.max(lseq[np.isfinite(lseq)])
        offset += top
        conv = np.convolve(conv, sseq * np.exp(lseq - top))[: L + 1]
    conv = np.pad(conv, (0, L + 1 - conv.size))
    lc, scn = _log_rising_seq(c, L + 1)
    with np.errstate(divide="ignore"):
        lmag = np.log(np.abs(conv)) + offset + np.arange(L + 1) * math.log(X) - lc
    return lmag, np.sign(conv) * scn


def _phi2_sum(b, c, x, ctl):
    X = float(np.max(np.abs(x)))
    spread = X + float(np.sum(np.abs(b)))
    L = int(spread + 10.0 * math.sqrt(spread) + 40)
    while True:
        L = min(L, ctl.max_terms)
        lmag, sgn = _phi2_shells(b, c, x, L)
        top = np.max(lmag)
        t = sgn * np.exp(lmag - top)
        s = math.fsum(t)
        scale = abs(s)
        a1, a2 = abs(t[-1]), abs(t[-2])
        r = a1 / a2 if a2 > 0 else 0.0
        if scale > 0 and r < 1.0 and a1 * r / (1.0 - r) <= ctl.rel_tol * scale and a2 <= ctl.rel_tol * scale:
            return top, s, L
        if L >= ctl.max_terms:
            raise SeriesTruncationError(
                f"Phi2 not converged with {L} terms per index",
                partial_sum=s * math.exp(min(top, 709.0)), terms=L)
        L *= 2


def _phi2_args(b_list, c, x_list):
    b = np.atleast_1d(np.asarray(b_list, dtype=float))
    x = np.atleast_1d(np.asarray(x_list, dtype=float))
    if b.shape != x.shape or b.ndim != 1 or b.size < 1:
        raise ValueError("b_list and x_list must be nonempty and of equal length")
    _check_b(c)
    return b, x


def log_lauricella_phi2(b_list, c, x_list, ctl=None, *, full_output=False):
    """log of the confluent Lauricella function Phi_2 when it is positive.

    The multi-index sum is organised by total order i_1 + ... + i_n, so each
    shell is a discrete convolution of one-dimensional sequences divided by
    (c)_N.  ``ctl.max_terms`` caps the per-index (and shell) count.
    """
    ctl = _ctl(ctl)
    b, x = _phi2_args(b_list, c, x_list)
    if not np.any(x):
        return _done(ctl, 0.0, 1, full_output)
    top, s, L = _phi2_sum(b, c, x, ctl)
    if s <= 0:
        raise ValueError("Phi2 is not positive here; use lauricella_phi2")
    return _done(ctl, top + math.log(s), L + 1, full_output)


def lauricella_phi2(b_list, c, x_list, ctl=None, *, full_output=False):
    """Confluent Lauricella function

    Phi_2(b_1..b_n; c; x_1..x_n) = sum (b_1)_{i_1}...(b_n)_{i_n} x_1^{i_1}...x_n^{i_n}
                                   / ((c)_{i_1+...+i_n} i_1! ... i_n!)

    Examples
    --------
    >>> round(lauricella_phi2([1.0], 1.0, [1.0]), 12) == round(math.e, 12)
    True
    """
    ctl = _ctl(ctl)
    b, x = _phi2_args(b_list, c, x_list)
    if not np.any(x):
        return _done(ctl, 1.0, 1, full_output)
    top, s, L = _phi2_sum(b, c, x, ctl)
    return _done(ctl, s * math.exp(top), L + 1, full_output)


# --------------------------------------------------------------------------
# Gaussian tail

def q_function(x):
    """Gaussian tail probability Q(x) = 0.5 erfc(x / sqrt(2))."""
    out = 0.5 * sc.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def q_approx(x):
    """Two-exponential approximation (1/12) e^{-x^2/2} + (1/4) e^{-2x^2/3}."""
    x2 = np.asarray(x, dtype=float) ** 2
    out = np.exp(-x2 / 2.0) / 12.0 + np.exp(-2.0 * x2 / 3.0) / 4.0
    return float(out) if np.ndim(out) == 0 else out
