"""Problem dimensions, signal/noise/design specifications and instance sampling.

An instance is one draw of ``Y = P X B + sigma W`` where ``P`` permutes the
rows of ``X B``.  Permutations are stored as index vectors: ``pi[i]`` is the
row of ``X`` that ends up in row ``i`` of ``Y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class DomainError(ValueError):
    """Raised when arguments fall outside an operation's domain."""


@dataclass(frozen=True)
class Dimensions:
    n: int
    m: int
    p: int
    h: int = 0

    def __post_init__(self):
        if self.n < 2 or self.m < 1 or self.p < 1:
            raise DomainError(f"need n >= 2, m >= 1, p >= 1; got {self}")
        if self.h == 1 or not (0 <= self.h <= self.n):
            raise DomainError(f"h must be 0 or in [2, n]; got h={self.h}, n={self.n}")

    @property
    def tau_m(self) -> float:
        return self.m / self.n

    @property
    def tau_p(self) -> float:
        return self.p / self.n

    @property
    def tau_h(self) -> float:
        return self.h / self.n


# ---------------------------------------------------------------- signal specs


@dataclass(frozen=True)
class ScaledIdentity:
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("ScaledIdentity needs lam > 0")


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class GaussianIID:
    pass


@dataclass(frozen=True)
class BlockDiagonal:
    high: float = 1.0
    low: float = 0.5


@dataclass(frozen=True)
class ExplicitSpectrum:
    values: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values or any(not v > 0 for v in self.values):
            raise DomainError("ExplicitSpectrum needs a non-empty list of positive values")


SignalSpec = Union[ScaledIdentity, Identity, GaussianIID, BlockDiagonal, ExplicitSpectrum]


@dataclass(frozen=True)
class NoiseSpec:
    """Exactly one of ``sigma`` or ``snr``; ``snr=inf`` means noiseless."""

    sigma: float | None = None
    snr: float | None = None

    def __post_init__(self):
        if (self.sigma is None) == (self.snr is None):
            raise DomainError("NoiseSpec takes exactly one of sigma or snr")
        if self.sigma is not None and self.sigma < 0:
            raise DomainError("sigma must be non-negative")
        if self.snr is not None and not self.snr > 0:
            raise DomainError("snr must be positive (or inf)")

    def resolve_sigma(self, B: np.ndarray, m: int) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        if math.isinf(self.snr):
            return 0.0
        return math.sqrt(float(np.sum(B * B)) / (m * self.snr))


class Design:
    GAUSS = "gauss"
    UNIF = "unif"


@dataclass(frozen=True)
class DesignDistribution:
    kind: str = Design.GAUSS
    standardize: bool = False  # scale Unif[-1, 1] by sqrt(3) to unit variance

    def __post_init__(self):
        if self.kind not in (Design.GAUSS, Design.UNIF):
            raise DomainError(f"unknown design {self.kind!r}")

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == Design.GAUSS:
            return rng.standard_normal(shape)
        X = rng.uniform(-1.0, 1.0, shape)
        if self.standardize:
            X *= math.sqrt(3.0)
        return X


@dataclass(frozen=True, eq=False)
class Instance:
    dims: Dimensions
    X: np.ndarray
    B: np.ndarray
    pi: np.ndarray
    W: np.ndarray
    sigma: float
    Y: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.X @ self.B)[self.pi] + self.sigma * self.W


# ------------------------------------------------------------------ operations


def sample_permutation(n: int, h: int, rng: np.random.Generator) -> np.ndarray:
    """Permutation of ``range(n)`` with exactly ``h`` displaced indices.

    The displaced set is a uniform ``h``-subset and the permutation restricted
    to it is a uniform derangement (rejection sampling, about ``e`` tries).
    """
    if h == 1 or not (0 <= h <= n):
        raise DomainError(f"h must be 0 or in [2, n]; got h={h}, n={n}")
    pi = np.arange(n)
    if h == 0:
        return pi
    subset = np.sort(rng.choice(n, size=h, replace=False))
    ar = np.arange(h)
    while True:
        sigma = rng.permutation(h)
        if not np.any(sigma == ar):
            break
    pi[subset] = subset[sigma]
    return pi


def build_signal(spec: SignalSpec, p: int, m: int, rng: np.random.Generator | None = None) -> np.ndarray:
    if isinstance(spec, (ScaledIdentity, Identity, BlockDiagonal)) and p != m:
        raise DomainError(f"{type(spec).__name__} requires p == m (got p={p}, m={m})")
    if isinstance(spec, ScaledIdentity):
        return spec.lam * np.eye(p)
    if isinstance(spec, Identity):
        return np.eye(p)
    if isinstance(spec, BlockDiagonal):
        half = p // 2
        diag = np.full(p, float(spec.low))
        diag[: p - half] = spec.high
        return np.diag(diag)
    if isinstance(spec, GaussianIID):
        if rng is None:
            raise DomainError("GaussianIID signal needs a random generator")
        return rng.standard_normal((p, m))
    if isinstance(spec, ExplicitSpectrum):
        k = len(spec.values)
        if k > min(p, m):
            raise DomainError(f"spectrum of length {k} does not fit a {p}x{m} matrix")
        B = np.zeros((p, m))
        B[np.arange(k), np.arange(k)] = spec.values
        return B
    raise DomainError(f"unknown signal spec {spec!r}")


def snr_of(B: np.ndarray, m: int, sigma: float) -> float:
    """``||B||_F^2 / (m sigma^2)``; ``inf`` when ``sigma == 0``."""
    if sigma == 0:
        return math.inf
    return float(np.sum(np.asarray(B) ** 2)) / (m * sigma**2)


def generate_instance(
    dims: Dimensions,
    signal: SignalSpec,
    noise: NoiseSpec,
    design: DesignDistribution,
    rng: np.random.Generator,
) -> Instance:
    # draw order is fixed so that equal seeds give identical instances
    B = build_signal(signal, dims.p, dims.m, rng)
    sigma = noise.resolve_sigma(B, dims.m)
    X = design.sample(rng, (dims.n, dims.p))
    pi = sample_permutation(dims.n, dims.h, rng)
    W = rng.standard_normal((dims.n, dims.m))
    Y = (X @ B)[pi] + sigma * W
    return Instance(dims=dims, X=X, B=B, pi=pi, W=W, sigma=sigma, Y=Y)


def singular_values(B: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    s = np.linalg.svd(np.asarray(B, dtype=float), compute_uv=False)
    return s[s > tol * max(1.0, s.max(initial=0.0))]


def spectrum_values(spec: SignalSpec, p: int, m: int) -> Sequence[float]:
    """Singular values of a deterministic signal spec without building it."""
    if isinstance(spec, ScaledIdentity):
        return [spec.lam] * p
    if isinstance(spec, Identity):
        return [1.0] * min(p, m)
    if isinstance(spec, BlockDiagonal):
        half = p // 2
        return [spec.high] * (p - half) + [spec.low] * half
    if isinstance(spec, ExplicitSpectrum):
        return list(spec.values)
    raise DomainError(f"{type(spec).__name__} has no deterministic spectrum")
