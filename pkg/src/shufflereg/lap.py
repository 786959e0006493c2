"""Linear assignment: exact solvers and min-sum message passing.

All solvers minimise ``sum_i C[i, assignment[i]]`` over permutations.

Message convention: ``L[i, j]`` is the row-side message on edge ``(i, j)`` and
``R[i, j]`` the column-side one.  One min-sum sweep is

    L[i, j] <- min_{k != j} (C[i, k] - R[i, k])
    R[i, j] <- min_{k != i} (C[k, j] - L[k, j])

and edge ``(i, j)`` is selected when ``L + R - C > 0`` there.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

UNASSIGNED = -1
EMPTY_MIN_CAP = 1e18


def as_cost_matrix(C) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix has non-finite entries")
    return C


@dataclass(frozen=True)
class AssignmentResult:
    assignment: np.ndarray
    is_permutation: bool
    converged: bool
    iterations_used: int
    objective: float | None = None


def _is_permutation(a: np.ndarray) -> bool:
    n = a.shape[0]
    if np.any(a < 0):
        return False
    return np.unique(a).shape[0] == n


def _result(C: np.ndarray, assignment: np.ndarray, converged: bool, iterations: int) -> AssignmentResult:
    ok = _is_permutation(assignment)
    obj = float(C[np.arange(C.shape[0]), assignment].sum()) if ok else None
    return AssignmentResult(assignment, ok, converged, iterations, obj)


# ---------------------------------------------------------------- exact solver


def _solve_native(C: np.ndarray) -> np.ndarray:
    """Shortest augmenting path with dual potentials, O(n^3).

    Rows are inserted one at a time; each insertion runs a Dijkstra-style scan
    over columns using reduced costs ``C[i, j] - u[i] - v[j]``.
    """
    n = C.shape[0]
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    # 1-based: col_owner[j] = row matched to column j, 0 = free
    col_owner = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    cost = np.zeros((n + 1, n + 1))
    cost[1:, 1:] = C
    for i in range(1, n + 1):
        col_owner[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = col_owner[j0]
            free = ~used
            free[0] = False
            cur = cost[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, INF)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[col_owner[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if col_owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            col_owner[j0] = col_owner[j1]
            j0 = j1
    assignment = np.empty(n, dtype=np.int64)
    assignment[col_owner[1:] - 1] = np.arange(n)
    return assignment


def solve_exact(C, backend: str = "scipy") -> AssignmentResult:
    """Minimum-cost permutation.

    ``backend="scipy"`` uses :func:`scipy.optimize.linear_sum_assignment`
    (a shortest-augmenting-path solver); ``"native"`` uses the pure numpy
    implementation in this module.  Both are deterministic for a fixed input.
    """
    C = as_cost_matrix(C)
    if backend == "scipy":
        _, cols = linear_sum_assignment(C)
        assignment = cols.astype(np.int64)
    elif backend == "native":
        assignment = _solve_native(C)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return _result(C, assignment, True, 0)


# ------------------------------------------------------------------ min-sum MP


@dataclass(frozen=True, eq=False)
class MPState:
    L: np.ndarray
    R: np.ndarray
    iteration: int = 0
    damping: float = 0.3

    @classmethod
    def zeros(cls, n: int, damping: float = 0.3) -> "MPState":
        if not 0 <= damping < 1:
            raise ValueError("damping must lie in [0, 1)")
        return cls(np.zeros((n, n)), np.zeros((n, n)), 0, damping)

    def zeta(self, C: np.ndarray) -> np.ndarray:
        return self.L + self.R - C


def _min_excluding_self(A: np.ndarray, axis: int) -> np.ndarray:
    """``out[i, j] = min_{k != j} A[i, k]`` (axis=1) or ``min_{k != i} A[k, j]`` (axis=0)."""
    if axis == 0:
        return _min_excluding_self(A.T, 1).T
    n = A.shape[1]
    if n == 1:
        return np.full_like(A, EMPTY_MIN_CAP)
    idx = np.argpartition(A, 1, axis=1)[:, :2]
    rows = np.arange(A.shape[0])
    a0 = A[rows, idx[:, 0]]
    a1 = A[rows, idx[:, 1]]
    first = np.where(a0 <= a1, idx[:, 0], idx[:, 1])
    m1 = np.minimum(a0, a1)
    m2 = np.maximum(a0, a1)
    out = np.repeat(m1[:, None], n, axis=1)
    out[rows, first] = m2
    return out


def mp_step(state: MPState, C) -> MPState:
    """One synchronous min-sum sweep with damping ``new = (1-d) update + d old``."""
    C = np.asarray(C, dtype=float)
    if state.L.shape != C.shape:
        raise ValueError("message shape does not match cost matrix")
    L_upd = _min_excluding_self(C - state.R, axis=1)
    R_upd = _min_excluding_self(C - state.L, axis=0)
    np.clip(L_upd, -EMPTY_MIN_CAP, EMPTY_MIN_CAP, out=L_upd)
    np.clip(R_upd, -EMPTY_MIN_CAP, EMPTY_MIN_CAP, out=R_upd)
    d = state.damping
    if d:
        L_upd = (1 - d) * L_upd + d * state.L
        R_upd = (1 - d) * R_upd + d * state.R
    return replace(state, L=L_upd, R=R_upd, iteration=state.iteration + 1)


def mp_residual(state: MPState, C) -> float:
    """Max violation of the undamped fixed-point equations."""
    C = np.asarray(C, dtype=float)
    rL = np.abs(_min_excluding_self(C - state.R, axis=1) - state.L).max()
    rR = np.abs(_min_excluding_self(C - state.L, axis=0) - state.R).max()
    return float(max(rL, rR))


def mp_decode(state: MPState, C, converged: bool = False) -> AssignmentResult:
    C = np.asarray(C, dtype=float)
    z = state.zeta(C)
    best = np.argmax(z, axis=1)  # first maximum wins ties
    picked = z[np.arange(z.shape[0]), best] > 0
    assignment = np.where(picked, best, UNASSIGNED).astype(np.int64)
    return _result(C, assignment, converged, state.iteration)


def solve_mp(
    C,
    max_iters: int = 2000,
    damping: float = 0.3,
    tol: float = 1e-9,
    patience: int | None = None,
) -> AssignmentResult:
    """Iterate :func:`mp_step` from zero messages until the L-inf change is ``<= tol``.

    On most random cost matrices min-sum messages never settle: they keep
    drifting at a constant rate while ``zeta`` (and so the decoded assignment)
    stays fixed.  ``patience`` optionally stops early once the decoded
    permutation has been unchanged for that many sweeps; ``converged`` still
    refers to the message change only.
    """
    if max_iters < 1 or tol <= 0:
        raise ValueError("need max_iters >= 1 and tol > 0")
    C = as_cost_matrix(C)
    state = MPState.zeros(C.shape[0], damping)
    converged = False
    last, streak = None, 0
    for _ in range(max_iters):
        new = mp_step(state, C)
        change = max(np.abs(new.L - state.L).max(), np.abs(new.R - state.R).max())
        state = new
        if change <= tol:
            converged = True
            break
        if patience is not None:
            dec = mp_decode(state, C)
            if dec.is_permutation and last is not None and np.array_equal(dec.assignment, last):
                streak += 1
                if streak >= patience:
                    break
            else:
                streak = 0
            last = dec.assignment
    return mp_decode(state, C, converged)
