"""Population dynamics for the min-sum message distribution.

Edge weights on the planted edge are called ``omega`` and on the other edges
``omega_hat``; their difference ``xi = omega_hat - omega`` drives everything.
A :class:`Population` is an empirical sample of the message variable ``H``.
One density-evolution step produces each new sample as

    H_new = min_{i < n} ( omega_hat_i - min(omega_i - H_i, H'_i) )

with ``H_i, H'_i`` resampled from the current population.  The branching
random walk variant replaces this by ``H_new = min_i (H_i + xi_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .model import DesignDistribution, Dimensions, NoiseSpec, SignalSpec, generate_instance, sample_permutation
from .model import build_signal
from .theory import Spectrum


@dataclass(frozen=True, eq=False)
class Population:
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("population must be a non-empty 1-d sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("population has non-finite samples")
        object.__setattr__(self, "samples", s)

    @classmethod
    def zeros(cls, size: int = 10_000) -> "Population":
        return cls(np.zeros(size))

    @property
    def size(self) -> int:
        return self.samples.size

    def mean(self) -> float:
        return float(self.samples.mean())

    def resample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return self.samples[rng.integers(0, self.size, size=shape)]


# --------------------------------------------------------------- edge samplers


class OracleEdges:
    """Exact edge-weight laws of the oracle cost for a given spectrum.

    In the singular basis of the signal,
    ``omega = -(sum lam^2 x^2 + sigma sum lam w x)`` and
    ``omega_hat = -(sum lam^2 x y + sigma sum lam w y)`` with ``x, y, w``
    standard normal.  Conditioning on ``x`` (resp. ``y``) makes the cross
    terms Gaussian, and coordinates sharing a singular value pool into one
    chi-square, so large batches cost ``O(#distinct values)`` per draw.
    """

    def __init__(self, spec: Spectrum, sigma: float):
        self.spec = spec
        self.sigma = float(sigma)
        vals, counts = np.unique(spec.array, return_counts=True)
        self._lam = vals
        self._k = counts

    def _chi2(self, size, rng: np.random.Generator) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        return np.stack([rng.chisquare(k, size=shape) for k in self._k], axis=-1)

    def sample_true(self, size, rng: np.random.Generator) -> np.ndarray:
        Q = self._chi2(size, rng)
        quad = Q @ self._lam**2
        z = rng.standard_normal(quad.shape)
        return -(quad + self.sigma * np.sqrt(quad) * z)

    def sample_false(self, size, rng: np.random.Generator) -> np.ndarray:
        Q = self._chi2(size, rng)
        var = Q @ (self._lam**4 + self.sigma**2 * self._lam**2)
        z = rng.standard_normal(var.shape)
        return -np.sqrt(var) * z

    def sample_xi(self, size: int, rng: np.random.Generator, batch: int = 20_000) -> np.ndarray:
        """Joint draws of ``omega_hat - omega`` sharing the same ``x``."""
        lam = self.spec.array
        out = np.empty(size)
        for start in range(0, size, batch):
            k = min(batch, size - start)
            x = rng.standard_normal((k, lam.size))
            y = rng.standard_normal((k, lam.size))
            w = rng.standard_normal((k, lam.size))
            d = x - y
            out[start : start + k] = (x * d) @ lam**2 + self.sigma * ((w * d) @ lam)
        return out


def sample_xi_oracle(spec: Spectrum, sigma: float, rng: np.random.Generator, size: int | None = None):
    """Draw(s) of the oracle gap ``xi``; a float when ``size`` is None."""
    xs = OracleEdges(spec, sigma).sample_xi(1 if size is None else size, rng)
    return float(xs[0]) if size is None else xs


class NonOracleEmpirical:
    """Edge weights of the non-oracle cost ``-Y Y^T X X^T`` read off fresh instances.

    ``sample_xi`` draws one fresh instance per sample with independent uniform
    row indices ``i`` and ``j``.  The edge samplers reuse every row of an
    instance (one planted and one random other edge per row).
    """

    def __init__(
        self,
        dims: Dimensions,
        signal: SignalSpec,
        sigma: float,
        design: DesignDistribution = DesignDistribution(),
    ):
        self.dims = dims
        self.signal = signal
        self.sigma = float(sigma)
        self.design = design

    def _instance(self, rng):
        return generate_instance(self.dims, self.signal, NoiseSpec(sigma=self.sigma), self.design, rng)

    def sample_xi(self, size: int, rng: np.random.Generator) -> np.ndarray:
        out = np.empty(size)
        n = self.dims.n
        for s in range(size):
            inst = self._instance(rng)
            i, j = rng.integers(0, n, size=2)
            v = inst.Y.T @ inst.X  # m x p
            out[s] = inst.Y[i] @ v @ (inst.X[inst.pi[i]] - inst.X[j])
        return out

    def _edges(self, size: int, rng: np.random.Generator, planted: bool) -> np.ndarray:
        n = self.dims.n
        chunks, got = [], 0
        while got < size:
            inst = self._instance(rng)
            G = (inst.Y @ (inst.Y.T @ inst.X)) @ inst.X.T
            rows = np.arange(n)
            if planted:
                cols = inst.pi
            else:
                shift = rng.integers(1, n, size=n)
                cols = (inst.pi + shift) % n
            chunks.append(-G[rows, cols])
            got += n
        return np.concatenate(chunks)[:size]

    def sample_true(self, size, rng: np.random.Generator) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        return self._edges(int(np.prod(shape)), rng, True).reshape(shape)

    def sample_false(self, size, rng: np.random.Generator) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        return self._edges(int(np.prod(shape)), rng, False).reshape(shape)


# ------------------------------------------------------------ density evolution

FULL = "full"
BRW = "brw"


def de_step(pop: Population, sampler, n: int, rng: np.random.Generator, mode: str = FULL, chunk: int = 2_000_000) -> Population:
    if n < 2:
        raise ValueError("n must be >= 2")
    N, k = pop.size, n - 1
    rows_per_chunk = max(1, chunk // k)
    new = np.empty(N)
    for start in range(0, N, rows_per_chunk):
        r = min(rows_per_chunk, N - start)
        H = pop.resample(rng, (r, k))
        if mode == FULL:
            omega = sampler.sample_true((r, k), rng)
            H2 = pop.resample(rng, (r, k))
            h_hat = np.minimum(omega - H, H2)
            omega_hat = sampler.sample_false((r, k), rng)
            new[start : start + r] = (omega_hat - h_hat).min(axis=1)
        elif mode == BRW:
            xi = sampler.sample_xi(r * k, rng).reshape(r, k)
            new[start : start + r] = (H + xi).min(axis=1)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return Population(new)


def de_iterate(
    pop: Population,
    sampler,
    n: int,
    iters: int,
    rng: np.random.Generator,
    mode: str = FULL,
    callback=None,
) -> Population:
    """Run ``iters`` population-dynamics steps; ``callback(t, pop)`` sees each one."""
    for t in range(iters):
        pop = de_step(pop, sampler, n, rng, mode)
        if callback is not None:
            callback(t + 1, pop)
    return pop


def recovery_probability(pop: Population, sampler, probes: int, rng: np.random.Generator) -> float:
    """Fraction of probes with ``H + H' > omega``."""
    H = pop.resample(rng, probes)
    H2 = pop.resample(rng, probes)
    omega = sampler.sample_true(probes, rng)
    return float(np.mean(H + H2 > omega))


# ---------------------------------------------------------------- drift

def default_theta_grid(xi: np.ndarray, n: int, points: int = 200) -> np.ndarray:
    """Log-spaced grid from ``1e-4`` up to twice the Gaussian-approximation optimum.

    The optimum of ``(log n - theta mu + theta^2 s^2 / 2) / theta`` is
    ``sqrt(2 log n) / s``; beyond a few multiples of it the sample average of
    ``exp(-theta xi)`` is carried by a handful of draws.
    """
    s = float(np.std(xi))
    if not s > 0:
        s = max(abs(float(np.mean(xi))), 1.0)
    tmax = 2 * math.sqrt(2 * math.log(n)) / s
    tmin = min(1e-4, tmax * 1e-4)
    return np.geomspace(tmin, tmax, points)


def empirical_log_mgf(xi: np.ndarray, theta: float) -> float:
    """``log mean exp(-theta xi)`` via a max-shifted sum."""
    return float(logsumexp(-theta * xi) - math.log(xi.size))


def empirical_drift(xi: Sequence[float], n: int, theta_grid: Sequence[float] | None = None) -> float:
    """Grid minimum of ``(log n + log mean exp(-theta xi)) / theta``.

    Returns ``inf`` when no grid point gives a finite value.
    """
    xi = np.asarray(xi, dtype=float)
    grid = default_theta_grid(xi, n) if theta_grid is None else np.asarray(theta_grid, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("theta grid must be positive")
    logn = math.log(n)
    vals = np.array([(logn + empirical_log_mgf(xi, t)) / t for t in grid])
    vals = vals[np.isfinite(vals)]
    return float(vals.min()) if vals.size else math.inf


def oracle_drift_root(n: int, m: int, spec_shape: Spectrum, xi_samples: int, seed: int, lo: float, hi: float, tol: float = 1e-3):
    """Bisection (in log snr) for the snr where the empirical oracle drift crosses zero.

    Each probe uses ``xi_samples`` draws from a stream seeded only by ``seed``
    (common random numbers across probes), so the crossing is monotone-stable.
    """
    from .rng import child_rng  # local to keep module import light

    def drift(snr):
        sigma = spec_shape.sigma_for_snr(m, snr)
        xi = OracleEdges(spec_shape, sigma).sample_xi(xi_samples, child_rng(seed, 0))
        return empirical_drift(xi, n)

    a, b = math.log(lo), math.log(hi)
    da, db = drift(lo), drift(hi)
    if not (da > 0 and db <= 0):
        raise ValueError(f"drift does not change sign on [{lo}, {hi}]: {da:.4g}, {db:.4g}")
    while b - a > tol:
        mid = (a + b) / 2
        if drift(math.exp(mid)) > 0:
            a = mid
        else:
            b = mid
    return math.exp((a + b) / 2)
