"""Monte-Carlo checks of closed-form Gaussian expectations.

Each check returns a :class:`MomentCheckReport`.  Exact identities pass when
``|z| <= z_max``; leading-order (asymptotic) formulas pass when
``|mc - formula| <= 3 SE + c_asym |formula|``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import theory
from .evolution import OracleEdges
from .model import Dimensions, ExplicitSpectrum, SignalSpec, build_signal, sample_permutation
from .theory import Spectrum

EXACT = "exact"
ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class MomentCheckReport:
    name: str
    mc_estimate: float
    mc_standard_error: float
    closed_form: float
    z_score: float
    passed: bool
    criterion: str = EXACT
    rel_error: float = 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _report(name, mc, se, closed, criterion=EXACT, z_max=4.0, c_asym=0.1) -> MomentCheckReport:
    se = float(se)
    z = (mc - closed) / se if se > 0 else (0.0 if mc == closed else math.copysign(math.inf, mc - closed))
    rel = abs(mc - closed) / abs(closed) if closed else abs(mc - closed)
    if criterion == EXACT:
        ok = abs(z) <= z_max
    else:
        ok = abs(mc - closed) <= 3 * se + c_asym * abs(closed)
    return MomentCheckReport(name, float(mc), se, float(closed), float(z), bool(ok), criterion, float(rel))


def mean_check(name, samples, closed, **kw) -> MomentCheckReport:
    s = np.asarray(samples, dtype=float)
    return _report(name, s.mean(), s.std(ddof=1) / math.sqrt(s.size), closed, **kw)


def variance_check(name, samples, closed, **kw) -> MomentCheckReport:
    s = np.asarray(samples, dtype=float)
    sq = (s - s.mean()) ** 2
    return _report(name, s.var(ddof=1), sq.std(ddof=1) / math.sqrt(s.size), closed, **kw)


# ------------------------------------------------------- Gaussian identities


def gaussian_identities(
    p: int, M: np.ndarray, M2: np.ndarray, tr_scale: float = 1.0
) -> list[tuple[str, Callable, float]]:
    """``(name, integrand(x, y), closed form)`` for the eight identities.

    ``x`` and ``y`` are ``(trials, p)`` arrays of independent standard normals.
    ``tr_scale`` multiplies ``tr M`` in the closed forms (failure injection).
    """
    tr = tr_scale * np.trace(M)
    K = tr**2 + np.trace(M @ M) + np.trace(M.T @ M)

    def quad(x):
        return np.einsum("ti,ij,tj->t", x, M, x)

    def nrm2(x):
        return np.einsum("ti,ti->t", x, x)

    def cross(x, y):
        xy = np.einsum("ti,ti->t", x, y)
        a = np.einsum("ti,ij,tj->t", y, M, x)
        b = np.einsum("ti,ij,tj->t", x, M2, y)
        return xy**2 * a * b

    return [
        ("E tr(yy'xx'M) = tr M", lambda x, y: np.einsum("ti,ti->t", y, x) * np.einsum("ti,ij,tj->t", x, M, y), tr),
        ("E |y|^2 x'Mx = p tr M", lambda x, y: nrm2(y) * quad(x), p * tr),
        ("E (x'Mx)^2 = K", lambda x, y: quad(x) ** 2, K),
        ("E |x|^2 x'Mx = (p+2) tr M", lambda x, y: nrm2(x) * quad(x), (p + 2) * tr),
        ("E |x|^4 x'Mx = (p+2)(p+4) tr M", lambda x, y: nrm2(x) ** 2 * quad(x), (p + 2) * (p + 4) * tr),
        ("E |x|^2 (x'Mx)^2 = (p+4) K", lambda x, y: nrm2(x) * quad(x) ** 2, (p + 4) * K),
        ("E |x|^4 (x'Mx)^2 = (p+4)(p+6) K", lambda x, y: nrm2(x) ** 2 * quad(x) ** 2, (p + 4) * (p + 6) * K),
        (
            "E (x'y)^2 y'M1x x'M2y",
            cross,
            2 * tr * np.trace(M2) + (p + 4) * np.trace(M @ M2) + 2 * np.trace(M @ M2.T),
        ),
    ]


def gaussian_identity_suite(
    p: int,
    M: np.ndarray | None,
    trials: int,
    rng: np.random.Generator,
    M2: np.ndarray | None = None,
    z_max: float = 4.0,
    batch: int = 50_000,
    corrupt: float = 1.0,
) -> list[MomentCheckReport]:
    """Check all eight identities against one shared Monte-Carlo stream.

    ``M`` (and the second matrix of the cross identity) default to random
    non-symmetric matrices.  ``corrupt`` scales every ``tr M`` in the closed
    forms and exists only to exercise the failure path.
    """
    if M is None:
        M = rng.standard_normal((p, p))
    if M2 is None:
        M2 = rng.standard_normal((p, p))
    M = np.asarray(M, dtype=float)
    M2 = np.asarray(M2, dtype=float)
    ids = gaussian_identities(p, M, M2, corrupt)
    sums = np.zeros(len(ids))
    sq = np.zeros(len(ids))
    done = 0
    while done < trials:
        k = min(batch, trials - done)
        x = rng.standard_normal((k, p))
        y = rng.standard_normal((k, p))
        for idx, (_, f, _) in enumerate(ids):
            v = f(x, y)
            sums[idx] += v.sum()
            sq[idx] += (v * v).sum()
        done += k
    out = []
    for idx, (name, _, closed) in enumerate(ids):
        mean = sums[idx] / trials
        var = (sq[idx] - trials * mean**2) / (trials - 1)
        se = math.sqrt(max(var, 0.0) / trials)
        out.append(_report(name, mean, se, closed, EXACT, z_max))
    return out


def norm_power_checks(p: int, trials: int, rng: np.random.Generator, z_max: float = 4.0) -> list[MomentCheckReport]:
    """``E|x|^4 = p(p+2)``, ``E|x|^6 = p(p+2)(p+4)``, ``E|x|^8 = p(p+2)(p+4)(p+6)``."""
    r2 = rng.chisquare(p, size=trials)
    return [
        mean_check("E |x|^4", r2**2, p * (p + 2), z_max=z_max),
        mean_check("E |x|^6", r2**3, p * (p + 2) * (p + 4), z_max=z_max),
        mean_check("E |x|^8", r2**4, p * (p + 2) * (p + 4) * (p + 6), z_max=z_max),
    ]


# ------------------------------------------------------------ oracle moments


def oracle_moment_check(
    spec: Spectrum,
    sigma: float,
    trials: int,
    rng: np.random.Generator,
    thetas=None,
    z_max: float = 4.0,
) -> list[MomentCheckReport]:
    """Mean, variance and MGF of the oracle gap against their exact forms.

    Default thetas are 10%, 25% and 40% of the finite-MGF bound, where the
    Monte-Carlo estimate of ``E exp(-theta xi)`` still has finite variance.
    """
    xi = OracleEdges(spec, sigma).sample_xi(trials, rng)
    mean, var = theory.oracle_moments(spec, sigma)
    out = [
        mean_check("E xi", xi, mean, z_max=z_max),
        variance_check("Var xi", xi, var, z_max=z_max),
    ]
    if thetas is None:
        tmax = theory.oracle_theta_max(spec, sigma)
        thetas = [0.1 * tmax, 0.25 * tmax, 0.4 * tmax]
    for t in thetas:
        closed = math.exp(theory.oracle_log_mgf(t, spec, sigma))
        out.append(mean_check(f"E exp(-{t:.4g} xi)", np.exp(-t * xi), closed, z_max=z_max))
    return out


# -------------------------------------------------------- non-oracle per-term


def sample_xi_terms(
    dims: Dimensions, B: np.ndarray, sigma: float, trials: int, rng: np.random.Generator
) -> np.ndarray:
    """``(trials, 5)`` array of ``(xi, xi1, xi2, xi3, xi4)`` from fresh instances.

    ``xi = xi1 + sigma (xi2 + xi3) + sigma^2 xi4`` is the gap between the
    non-oracle cost of a uniform other column ``j`` and the planted one in a
    uniform row ``i``.
    """
    n, m, p, h = dims.n, dims.m, dims.p, dims.h
    M = B @ B.T
    out = np.empty((trials, 5))
    for t in range(trials):
        X = rng.standard_normal((n, p))
        W = rng.standard_normal((n, m))
        pi = sample_permutation(n, h, rng)
        i, j = rng.integers(0, n, size=2)
        a = X[pi[i]]
        d = a - X[j]
        u = X @ d
        Pu = X[pi].T @ u
        Wu = W.T @ u
        x1 = a @ M @ Pu
        x2 = a @ B @ Wu
        x3 = W[i] @ (B.T @ Pu)
        x4 = W[i] @ Wu
        out[t] = (x1 + sigma * (x2 + x3) + sigma**2 * x4, x1, x2, x3, x4)
    return out


def xi_term_formulas(n: int, m: int, p: int, h: int, trM: float, trMM: float) -> dict:
    """Leading-order second moments of the four pieces of the non-oracle gap."""
    return {
        "E xi1^2": (n - h) ** 2 * (1 + 2 * p / n + p**2 / (n * (n - h))) * trM**2
        + n**2 * (2 * p / n + 3 * (1 - h / n) ** 2 + 6 * (n - h) ** 2 * p / n**3 + (3 * n - h) * p**2 / n**3) * trMM,
        "E xi2^2": 2 * n * p * (1 + p / n) * trM,
        "E xi3^2": 2 * n**2 * (p / n + (1 - h / n) ** 2 + p**2 / n**2 + 4 * p * (n - h) ** 2 / n**3) * trM,
        "E xi4^2": (n - h) * m**2 * p**2 / n,
        "E xi1 xi4": m * p * (n - h) * (n + p - h) / n * trM,
        "E xi2 xi3": p * (n - h) * (n + p - h) / n * trM,
    }


def xi_term_moments_mc(
    n: int,
    m: int,
    p: int,
    h: int,
    signal: SignalSpec,
    sigma: float,
    trials: int,
    rng: np.random.Generator,
    c_asym: float = 0.1,
) -> list[MomentCheckReport]:
    """Non-oracle mean/variance and the six per-term second moments versus Monte Carlo."""
    dims = Dimensions(n, m, p, h)
    B = build_signal(signal, p, m, rng)
    fro2 = float(np.sum(B**2))
    fro4 = float(np.sum((B.T @ B) ** 2))
    s = sample_xi_terms(dims, B, sigma, trials, rng)
    xi, x1, x2, x3, x4 = s.T
    mo = theory.nonoracle_moments(n, m, p, h, fro2, fro4, sigma)
    kw = dict(criterion=ASYMPTOTIC, c_asym=c_asym)
    out = [mean_check("E xi", xi, mo.mean, **kw), variance_check("Var xi", xi, mo.variance, **kw)]
    f = xi_term_formulas(n, m, p, h, fro2, fro4)
    products = {
        "E xi1^2": x1 * x1,
        "E xi2^2": x2 * x2,
        "E xi3^2": x3 * x3,
        "E xi4^2": x4 * x4,
        "E xi1 xi4": x1 * x4,
        "E xi2 xi3": x2 * x3,
    }
    for name, v in products.items():
        out.append(mean_check(name, v, f[name], **kw))
    return out


def all_passed(reports) -> bool:
    return all(r.passed for r in reports)


def identity_spectrum_signal(k: int) -> ExplicitSpectrum:
    """``k`` unit singular values embedded in a ``p x m`` signal."""
    return ExplicitSpectrum([1.0] * k)
