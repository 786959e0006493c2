"""Permutation recovery, error-rate estimation and the bisection threshold finder."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import lap
from .model import DesignDistribution, Dimensions, Instance, NoiseSpec, SignalSpec, generate_instance
from .rng import child_rng

ORACLE = "oracle"
NONORACLE = "nonoracle"


@dataclass(frozen=True)
class Exact:
    backend: str = "scipy"


@dataclass(frozen=True)
class MP:
    max_iters: int = 2000
    damping: float = 0.3
    tol: float = 1e-9
    patience: int | None = None


Solver = Exact | MP


def oracle_cost(inst: Instance) -> np.ndarray:
    """``-Y B^T X^T``: entry ``(i, j)`` scores row ``i`` of Y against row ``j`` of X."""
    return -((inst.Y @ inst.B.T) @ inst.X.T)


def nonoracle_cost(inst: Instance) -> np.ndarray:
    """``-Y Y^T X X^T``, evaluated as ``(-Y (Y^T X)) X^T``."""
    return (-inst.Y @ (inst.Y.T @ inst.X)) @ inst.X.T


def cost_matrix(inst: Instance, mode: str) -> np.ndarray:
    if mode == ORACLE:
        return oracle_cost(inst)
    if mode == NONORACLE:
        return nonoracle_cost(inst)
    raise ValueError(f"unknown recovery mode {mode!r}")


def solve(C: np.ndarray, solver: Solver) -> lap.AssignmentResult:
    if isinstance(solver, Exact):
        return lap.solve_exact(C, solver.backend)
    return lap.solve_mp(C, solver.max_iters, solver.damping, solver.tol, solver.patience)


def recover(inst: Instance, mode: str = ORACLE, solver: Solver = Exact()) -> np.ndarray | None:
    """Estimated permutation (``pi_hat[i]`` = row of X matched to row ``i`` of Y).

    ``None`` when message passing decodes something that is not a permutation.
    """
    res = solve(cost_matrix(inst, mode), solver)
    return res.assignment if res.is_permutation else None


def recovered(inst: Instance, mode: str = ORACLE, solver: Solver = Exact()) -> bool:
    pi_hat = recover(inst, mode, solver)
    return pi_hat is not None and bool(np.array_equal(pi_hat, inst.pi))


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def full_recovery_error_rate(
    dims: Dimensions,
    signal: SignalSpec,
    noise: NoiseSpec,
    design: DesignDistribution = DesignDistribution(),
    mode: str = ORACLE,
    solver: Solver = Exact(),
    trials: int = 100,
    seed: int = 0,
    key: Sequence[int] = (),
    threads: int = 1,
) -> float:
    """Fraction of ``trials`` fresh instances that are not fully recovered.

    Trial ``t`` draws its instance from ``child_rng(seed, *key, t)``, so the
    rate does not depend on ``threads``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    key = tuple(key)

    def one(t: int) -> bool:
        inst = generate_instance(dims, signal, noise, design, child_rng(seed, *key, t))
        return recovered(inst, mode, solver)

    ok = _map(one, range(trials), threads)
    return 1.0 - sum(ok) / trials


# ------------------------------------------------------------- threshold search


@dataclass(frozen=True)
class ThresholdSearchConfig:
    lower: float
    upper: float
    epsilon: float = 1e-3
    trials_per_probe: int = 100
    error_threshold: float = 0.05
    repeats: int = 20
    validate_bracket: bool = True

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("need lower < upper")
        if not 0 < self.epsilon < self.upper - self.lower:
            raise ValueError("need 0 < epsilon < upper - lower")
        if self.trials_per_probe < 1 or self.repeats < 1:
            raise ValueError("trials_per_probe and repeats must be positive")
        if not 0 < self.error_threshold <= 1:
            raise ValueError("error_threshold must be a probability")


@dataclass(frozen=True)
class ThresholdEstimate:
    mean: float
    std: float
    per_repeat: list = field(default_factory=list)
    probes_used: int = 0
    probes_per_repeat: list = field(default_factory=list)
    bracket_error: str | None = None

    @property
    def ok(self) -> bool:
        return self.bracket_error is None


# experiment(snr, key) -> error rate; key = (repeat, probe) identifies the probe
Experiment = Callable[[float, tuple], float]


def bisect_threshold(cfg: ThresholdSearchConfig, experiment: Experiment, repeat: int = 0) -> tuple[float, int]:
    """One bisection run; returns ``(estimate, probes)``.

    Below the error threshold the right end moves to ``mid - eps``, otherwise
    the left end moves to ``mid + eps``; stops once ``|l - r| <= eps``.
    """
    l, r = cfg.lower, cfg.upper
    mid = (l + r) / 2
    probes = 0
    while abs(l - r) > cfg.epsilon:
        mid = (l + r) / 2
        err = experiment(mid, (repeat, probes))
        probes += 1
        if err < cfg.error_threshold:
            r = mid - cfg.epsilon
        else:
            l = mid + cfg.epsilon
    return mid, probes


def find_threshold(cfg: ThresholdSearchConfig, experiment: Experiment) -> ThresholdEstimate:
    """Repeat the bisection ``cfg.repeats`` times and aggregate mean and std.

    When ``validate_bracket`` is set both ends are probed once first (with a
    stream key outside the repeat range); an invalid bracket returns an
    estimate whose ``bracket_error`` explains the failure and whose mean is NaN.
    """
    extra = 0
    if cfg.validate_bracket:
        err_hi = experiment(cfg.upper, (cfg.repeats, 0))
        err_lo = experiment(cfg.lower, (cfg.repeats, 1))
        extra = 2
        problems = []
        if err_hi >= cfg.error_threshold:
            problems.append(f"error rate {err_hi:.3f} at upper={cfg.upper:g} is not below {cfg.error_threshold:g}")
        if err_lo < cfg.error_threshold:
            problems.append(f"error rate {err_lo:.3f} at lower={cfg.lower:g} is already below {cfg.error_threshold:g}")
        if problems:
            return ThresholdEstimate(math.nan, math.nan, [], extra, [], "; ".join(problems))
    ests, probes = [], []
    for rep in range(cfg.repeats):
        est, k = bisect_threshold(cfg, experiment, rep)
        ests.append(est)
        probes.append(k)
    arr = np.asarray(ests)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return ThresholdEstimate(float(arr.mean()), std, ests, sum(probes) + extra, probes)


def snr_experiment(
    dims: Dimensions,
    signal: SignalSpec,
    design: DesignDistribution = DesignDistribution(),
    mode: str = ORACLE,
    solver: Solver = Exact(),
    trials: int = 100,
    seed: int = 0,
    threads: int = 1,
) -> Experiment:
    """Experiment closure mapping an snr probe to its full-recovery error rate."""

    def run(snr: float, key: tuple) -> float:
        return full_recovery_error_rate(
            dims, signal, NoiseSpec(snr=snr), design, mode, solver, trials, seed, key, threads
        )

    return run
