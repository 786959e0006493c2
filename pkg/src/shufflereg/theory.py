"""Closed-form phase-transition predictors.

All logarithms are natural.  ``snr = ||B||_F^2 / (m sigma^2)`` throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq


class DivergenceError(ArithmeticError):
    """The moment generating function is infinite at the requested theta."""


class NoFiniteThreshold(ArithmeticError):
    """The threshold equation has no positive finite solution."""


@dataclass(frozen=True)
class Spectrum:
    """Non-zero singular values of the signal matrix."""

    values: tuple

    def __init__(self, values: Sequence[float]):
        vals = tuple(float(v) for v in np.ravel(values))
        if not vals or any(not v > 0 for v in vals):
            raise ValueError("spectrum needs at least one strictly positive value")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_matrix(cls, B, tol: float = 1e-12) -> "Spectrum":
        s = np.linalg.svd(np.asarray(B, dtype=float), compute_uv=False)
        return cls(s[s > tol * s.max()])

    @classmethod
    def two_level(cls, m: int, lam: float, ratio: float) -> "Spectrum":
        """``m`` values: first half ``lam``, second half ``ratio * lam``."""
        half = m // 2
        return cls([lam] * (m - half) + [lam * ratio] * half)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values)

    @property
    def rank(self) -> int:
        return len(self.values)

    @property
    def fro2(self) -> float:
        """``||B||_F^2``."""
        return float(np.sum(self.array**2))

    @property
    def fro4(self) -> float:
        """``||B^T B||_F^2``."""
        return float(np.sum(self.array**4))

    @property
    def shape_factor(self) -> float:
        """``||B^T B||_F^2 / ||B||_F^4``, between ``1/rank`` and 1."""
        return self.fro4 / self.fro2**2

    def sigma_for_snr(self, m: int, snr: float) -> float:
        return 0.0 if math.isinf(snr) else math.sqrt(self.fro2 / (m * snr))

    def scaled(self, c: float) -> "Spectrum":
        return Spectrum(self.array * c)


# ----------------------------------------------------------------- oracle case


def oracle_theta_max(spec: Spectrum, sigma: float) -> float:
    """Supremum of the theta interval on which the oracle MGF is finite."""
    lam2 = spec.array**2
    a = lam2 * (lam2 + 2 * sigma**2)
    # positive root of a t^2 - 2 lam2 t - 1 = 0
    t_det = (lam2 + np.sqrt(lam2**2 + a)) / a
    t = float(t_det.min())
    if sigma > 0:
        t = min(t, float((1.0 / (sigma * spec.array)).min()))
    return t


def oracle_log_mgf(theta: float, spec: Spectrum, sigma: float) -> float:
    """``log E exp(-theta Xi)`` for the oracle edge gap ``Xi``.

    Per singular value ``lam`` the factor is
    ``(1 + 2 theta lam^2 - theta^2 lam^2 (lam^2 + 2 sigma^2))^(-1/2)``.
    """
    lam2 = spec.array**2
    if np.any(theta**2 * sigma**2 * lam2 >= 1):
        raise DivergenceError(f"theta={theta} violates theta^2 sigma^2 lam^2 < 1")
    det = 1 + 2 * theta * lam2 - theta**2 * lam2 * (lam2 + 2 * sigma**2)
    if np.any(det <= 0):
        raise DivergenceError(f"theta={theta} is outside the finite-MGF interval")
    return float(-0.5 * np.sum(np.log(det)))


def _golden_min(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def oracle_drift_objective(theta: float, n: int, spec: Spectrum, sigma: float) -> float:
    return (math.log(n) + oracle_log_mgf(theta, spec, sigma)) / theta


def oracle_drift(n: int, spec: Spectrum, sigma: float, tol: float = 1e-10) -> float:
    """``inf_{theta>0} (log n + log E e^{-theta Xi}) / theta``.

    A non-positive value predicts full recovery.  The objective is
    quasi-convex in theta, so a golden-section search over the finite-MGF
    interval finds the infimum.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    tmax = oracle_theta_max(spec, sigma)
    if not tmax > 0:
        raise ValueError("empty feasible theta interval")
    hi = tmax * (1 - 1e-12)
    lo = hi * 1e-12
    _, val = _golden_min(lambda t: oracle_drift_objective(t, n, spec, sigma), lo, hi, tol * tmax)
    return val


def oracle_theta_star_lb(n: int, spec: Spectrum, sigma: float) -> float:
    """Minimiser of ``log n / theta - ||B||^2 + theta V / 2``, i.e. ``sqrt(2 log n / V)``.

    ``V = ||B^T B||_F^2 + 2 sigma^2 ||B||_F^2`` is the quadratic coefficient of
    the lower bound on the log-MGF.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    V = spec.fro4 + 2 * sigma**2 * spec.fro2
    return math.sqrt(2 * math.log(n) / V)


def _linear_threshold(n: int, m: int, F: float, coef: float) -> float:
    if n < 2 or m < 1:
        raise ValueError("need n >= 2 and m >= 1")
    if not 0 < F <= 1:
        raise ValueError(f"shape factor must lie in (0, 1], got {F}")
    ln = math.log(n)
    denom = 1 - coef * F * ln
    if denom <= 0:
        raise NoFiniteThreshold(f"no finite threshold: 1 - {coef:g} F log n = {denom:.6g} <= 0")
    return (4 * ln / m) / denom


def oracle_snr_threshold(n: int, m: int, F: float) -> float:
    """Root of ``2 log(n) snr F + 4 log(n) / m = snr``."""
    return _linear_threshold(n, m, F, 2.0)


def oracle_snr_threshold_gaussian(n: int, m: int, F: float) -> float:
    """Root of ``6 log(n) snr F + 4 log(n) / m = snr`` (Gaussian approximation)."""
    return _linear_threshold(n, m, F, 6.0)


def oracle_moments(spec: Spectrum, sigma: float) -> tuple[float, float]:
    """Exact mean and variance of the oracle gap ``Xi``."""
    return spec.fro2, 3 * spec.fro4 + 2 * sigma**2 * spec.fro2


# ------------------------------------------------------------- non-oracle case


@dataclass(frozen=True)
class NonOracleMoments:
    mean: float
    variance: float


def nonoracle_moments(n: int, m: int, p: int, h: int, fro2: float, fro4: float, sigma: float) -> NonOracleMoments:
    """Leading-order mean and variance of the non-oracle gap.

    The two ``||B^T B||_F^2`` terms of the variance are kept separate, exactly
    as the per-term expansion produces them.
    """
    if not 0 <= h <= n or p < 1:
        raise ValueError("need 0 <= h <= n and p >= 1")
    tp, th = p / n, h / n
    s2 = sigma**2
    mean = n * (1 - th) * ((1 + tp) * fro2 + m * tp * s2)
    var = (
        n**2 * th * (1 - th) * tp**2 * (fro2 + m * s2) ** 2
        + n**2 * (2 * tp + 3 * (1 - th) ** 2) * fro4
        + n**2 * (6 * tp * (1 - th) ** 2 + (3 - th) * tp**2) * fro4
    )
    return NonOracleMoments(mean, var)


def nonoracle_criticality(snr: float, n: int, m: int, p: int, h: int, spec: Spectrum) -> float:
    """``2 log(n tau_h) Var - E^2`` (positive: failure predicted)."""
    sigma = spec.sigma_for_snr(m, snr)
    mo = nonoracle_moments(n, m, p, h, spec.fro2, spec.fro4, sigma)
    return 2 * math.log(h) * mo.variance - mo.mean**2


def nonoracle_snr_threshold(
    n: int, m: int, p: int, h: int, spec: Spectrum, lo: float = 1e-6, hi: float = 1e6, grid: int = 481
) -> float | None:
    """Size-corrected non-oracle threshold, or ``None`` when there is none.

    Scans ``log snr`` upward for the first crossing from predicted failure
    (criticality > 0) to predicted recovery (criticality <= 0) and refines it
    with Brent's method.
    """
    if h < 2 or h > n:
        raise ValueError("need 2 <= h <= n")

    def f(logs):
        return nonoracle_criticality(math.exp(logs), n, m, p, h, spec)

    xs = np.linspace(math.log(lo), math.log(hi), grid)
    vals = [f(x) for x in xs]
    for k in range(grid - 1):
        if vals[k] > 0 and vals[k + 1] <= 0:
            if vals[k + 1] == 0:
                return float(math.exp(xs[k + 1]))
            root = brentq(f, xs[k], xs[k + 1], xtol=1e-14, rtol=1e-14)
            return float(math.exp(root))
    return None


class ClosedForm(NamedTuple):
    snr: float
    eta1: float
    eta2: float
    regime: str  # "ok", "singular" or "below-validity"


def eta_terms(n: int, tau_p: float, tau_h: float) -> tuple[float, float]:
    L = math.log(n * tau_h)
    eta1 = (
        2 * tau_h * tau_p**2 * L
        - tau_p * (tau_p + 1) * (1 - tau_h)
        + tau_p * math.sqrt(2 * (1 - tau_h) * tau_h * L)
    )
    eta2 = (1 - tau_h) * (tau_p + 1) ** 2 - 2 * tau_h * tau_p**2 * L
    return eta1, eta2


def nonoracle_snr_closed_form(n: int, tau_p: float, tau_h: float) -> ClosedForm:
    """``eta1 / eta2`` for spectra whose singular values are all of one order.

    ``snr`` is ``inf`` when ``eta2 <= 0`` (beyond the singular ``tau_h``).  A
    non-positive ``eta1`` marks parameters outside the formula's range of
    validity; the raw ratio is still reported.
    """
    if not (0 < tau_h < 1) or tau_p <= 0 or n * tau_h <= 1:
        raise ValueError("need 0 < tau_h < 1, tau_p > 0 and n tau_h > 1")
    e1, e2 = eta_terms(n, tau_p, tau_h)
    if e2 <= 0:
        return ClosedForm(math.inf, e1, e2, "singular")
    if e1 <= 0:
        return ClosedForm(e1 / e2, e1, e2, "below-validity")
    return ClosedForm(e1 / e2, e1, e2, "ok")


def eta2(n: int, tau_p: float, tau_h: float) -> float:
    return (1 - tau_h) * (tau_p + 1) ** 2 - 2 * tau_h * tau_p**2 * math.log(n * tau_h)


def tau_h_singularity(n: int, tau_p: float, tol: float = 1e-6, grid: int = 2001) -> float | None:
    """Smallest ``tau_h`` in ``(1/n, 1)`` where ``eta2`` changes sign.

    Returns ``None`` when ``eta2`` stays positive on the whole interval, i.e.
    the predicted transition sits at ``tau_h -> 1``.
    """
    if tau_p <= 0 or n < 2:
        raise ValueError("need tau_p > 0 and n >= 2")
    lo, hi = 1.0 / n + 1e-9, 1.0 - 1e-9
    xs = np.linspace(lo, hi, grid)
    vals = np.array([eta2(n, tau_p, x) for x in xs])
    idx = np.nonzero((vals[:-1] > 0) & (vals[1:] <= 0))[0]
    if idx.size == 0:
        return None
    k = int(idx[0])
    a, b = xs[k], xs[k + 1]
    # plain bisection on the bracketed sign change
    while b - a > tol:
        mid = (a + b) / 2
        if eta2(n, tau_p, mid) > 0:
            a = mid
        else:
            b = mid
    return float((a + b) / 2)
