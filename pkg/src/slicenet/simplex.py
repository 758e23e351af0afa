"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves   max c @ x   s.t.   A_ub @ x <= b_ub,   A_eq @ x == b_eq,   x >= 0.
Problem sizes here are a few hundred columns, so a dense numpy tableau is fine.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    fun: float | None = None
    pivots: int = 0

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    f = T[:, col].copy()
    f[row] = 0.0
    T -= np.outer(f, T[row])


def _run(T: np.ndarray, basis: list[int], allowed: np.ndarray, tol: float, max_pivots: int):
    """Primal simplex on tableau T whose last row holds reduced costs (minimization form).

    Entering column: smallest index with negative reduced cost (Bland).
    Leaving row: min ratio, ties broken by smallest basic variable index.
    """
    m = T.shape[0] - 1
    pivots = 0
    while True:
        rc = T[-1, :-1]
        cand = np.flatnonzero((rc < -tol) & allowed)
        if cand.size == 0:
            return OPTIMAL, pivots
        col = int(cand[0])
        colv = T[:m, col]
        pos = colv > tol
        if not pos.any():
            return UNBOUNDED, pivots
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / colv[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + tol * max(1.0, abs(rmin)))
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
        if pivots >= max_pivots:
            return ITERATION_LIMIT, pivots


def linprog_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, *,
                tol: float = PIVOT_TOL, max_pivots: int = 50_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # standard form with slacks, then one artificial per row
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    n_std = n + m_ub

    T = np.zeros((m + 1, n_std + m + 1))
    T[:m, :n_std] = A
    T[:m, n_std:n_std + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n_std, n_std + m))
    # phase 1: minimize sum of artificials
    T[-1, :] = -T[:m, :].sum(axis=0)
    T[-1, n_std:n_std + m] = 0.0
    allowed = np.ones(n_std + m, dtype=bool)
    status, piv1 = _run(T, basis, allowed, tol, max_pivots)
    if status == ITERATION_LIMIT:
        return LPResult(ITERATION_LIMIT, pivots=piv1)
    if -T[-1, -1] > tol * max(1.0, np.abs(b).max(initial=0.0)) * 10:
        return LPResult(INFEASIBLE, pivots=piv1)

    # drive zero-level artificials out of the basis; drop redundant rows
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n_std:
            nz = np.flatnonzero(np.abs(T[r, :n_std]) > tol)
            if nz.size:
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
            else:
                keep[r] = False
    rows = np.flatnonzero(keep)
    T = np.vstack([T[rows][:, list(range(n_std)) + [-1]], np.zeros(n_std + 1)])
    basis = [basis[r] for r in rows]

    # phase 2: minimize -c
    cost = np.zeros(n_std)
    cost[:n] = -c
    T[-1, :-1] = cost
    T[-1, -1] = 0.0
    for r, bv in enumerate(basis):
        T[-1] -= cost[bv] * T[r]
    status, piv2 = _run(T, basis, np.ones(n_std, dtype=bool), tol, max_pivots - piv1)
    if status != OPTIMAL:
        return LPResult(status, pivots=piv1 + piv2)
    x = np.zeros(n_std)
    x[basis] = T[:-1, -1]
    x = np.maximum(x[:n], 0.0)
    return LPResult(OPTIMAL, x, float(c @ x), piv1 + piv2)
