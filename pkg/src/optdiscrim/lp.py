"""Dense two-phase simplex method with Bland's anti-cycling rule.

Solves ``max c.x  s.t.  A x = b, x >= 0``. Redundant equality rows are
detected after phase one and dropped, which the covariant reduction relies
on (its stabilizer constraints are frequently linearly dependent).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    value: float
    iterations: int


def _pivot(t: np.ndarray, row: int, col: int) -> None:
    t[row] /= t[row, col]
    for r in range(t.shape[0]):
        if r != row and t[r, col] != 0.0:
            t[r] -= t[r, col] * t[row]
    t[:, col] = 0.0
    t[row, col] = 1.0


def _run(t: np.ndarray, basis: list[int], ncols: int, max_iter: int) -> tuple[str, int]:
    """Iterate on tableau ``t`` whose last row holds reduced costs (maximize)."""
    it = 0
    while it < max_iter:
        obj = t[-1, :ncols]
        entering = next((j for j in range(ncols) if obj[j] > PIVOT_TOL), None)
        if entering is None:
            return "optimal", it
        col = t[:-1, entering]
        best, leave = None, None
        for r in range(len(basis)):
            if col[r] > PIVOT_TOL:
                ratio = t[r, -1] / col[r]
                if (
                    best is None
                    or ratio < best - 1e-13
                    or (abs(ratio - best) <= 1e-13 and basis[r] < basis[leave])
                ):
                    best, leave = ratio, r
        if leave is None:
            return "unbounded", it
        _pivot(t, leave, entering)
        basis[leave] = entering
        it += 1
    return "max_iter", it


def simplex(c, A, b, max_iter: int = 10_000) -> LPResult:
    c = np.asarray(c, dtype=float).reshape(-1)
    A = np.array(A, dtype=float, ndmin=2)
    b = np.asarray(b, dtype=float).reshape(-1).copy()
    m, n = A.shape
    if c.shape[0] != n or b.shape[0] != m:
        raise ValueError("inconsistent LP dimensions")
    A = A.copy()
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase one: artificials n..n+m-1
    t = np.zeros((m + 1, n + m + 1))
    t[:m, :n] = A
    t[:m, n : n + m] = np.eye(m)
    t[:m, -1] = b
    t[-1, :n] = A.sum(axis=0)
    t[-1, -1] = b.sum()
    basis = list(range(n, n + m))
    status, it1 = _run(t, basis, n + m, max_iter)
    if status != "optimal":
        return LPResult("infeasible", None, float("nan"), it1)
    if t[-1, -1] > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
        return LPResult("infeasible", None, float("nan"), it1)

    # drive artificials out of the basis; drop rows that cannot be pivoted
    keep_rows = []
    for r in range(m):
        if basis[r] >= n:
            cand = next((j for j in range(n) if abs(t[r, j]) > 1e-9), None)
            if cand is None:
                continue
            _pivot(t, r, cand)
            basis[r] = cand
        keep_rows.append(r)

    t2 = np.zeros((len(keep_rows) + 1, n + 1))
    t2[:-1, :n] = t[keep_rows, :n]
    t2[:-1, -1] = t[keep_rows, -1]
    basis2 = [basis[r] for r in keep_rows]
    # reduced costs for the original objective
    t2[-1, :n] = c
    for r, j in enumerate(basis2):
        if t2[-1, j] != 0.0:
            t2[-1] -= t2[-1, j] * t2[r]
    status, it2 = _run(t2, basis2, n, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", None, float("inf"), it1 + it2)
    if status != "optimal":
        return LPResult(status, None, float("nan"), it1 + it2)
    x = np.zeros(n)
    for r, j in enumerate(basis2):
        x[j] = max(t2[r, -1], 0.0)
    return LPResult("optimal", x, float(c @ x), it1 + it2)


def cone_membership(gens_as_columns, v, tol: float = 1e-10) -> bool:
    """Is ``v`` a nonnegative combination of the given columns (within ``tol``)?"""
    G = np.asarray(gens_as_columns, dtype=float)
    v = np.asarray(v, dtype=float).reshape(-1)
    if np.max(np.abs(v), initial=0.0) <= tol:
        return True
    res = simplex(np.zeros(G.shape[1]), G, v)
    if res.status == "optimal":
        return bool(np.max(np.abs(G @ res.x - v)) <= max(tol, 1e-9))
    # near-boundary points: accept if a slight inward push is feasible
    res = simplex(np.zeros(G.shape[1]), G, v + tol * G.sum(axis=1))
    return res.status == "optimal"
