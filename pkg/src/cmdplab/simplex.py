"""Small dense two-phase simplex for ``max c.x  s.t.  A x = b, x >= 0``.

Bland's rule is used for both entering and leaving variables, so the method
terminates on degenerate problems. The final basis is re-solved against the
original data to recover primal values and duals at working precision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float | None = None
    basis: np.ndarray | None = None
    iterations: int = 0


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    tab -= np.outer(col_vals, tab[row])


def _run(tab, basis, ncols, max_iter):
    """Bland-rule simplex on a tableau whose last row is the reduced-cost row.

    The objective row stores ``-reduced costs``; a negative entry means the
    column can improve a maximisation.
    """
    m = len(basis)
    it = 0
    while True:
        obj = tab[m, :ncols]
        candidates = np.nonzero(obj < -PIVOT_TOL)[0]
        if candidates.size == 0:
            return "optimal", it
        col = int(candidates[0])
        column = tab[:m, col]
        pos = column > PIVOT_TOL
        if not np.any(pos):
            return "unbounded", it
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[:m, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + 1e-13 * max(1.0, abs(best)))[0]
        row = int(ties[np.argmin(basis[ties])])
        _pivot(tab, row, col)
        basis[row] = col
        it += 1
        if it > max_iter:
            raise RuntimeError("simplex iteration limit reached")


def linprog_max(c, A_eq, b_eq, feas_tol=1e-9, max_iter=100_000) -> LpResult:
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A_s = A * sign[:, None]
    b_s = b * sign

    # phase 1: maximise -sum(artificials)
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A_s
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b_s
    tab[m, :n] = -A_s.sum(axis=0)
    tab[m, -1] = -b_s.sum()
    basis = np.arange(n, n + m)
    status, it1 = _run(tab, basis, n + m, max_iter)
    if -tab[m, -1] > feas_tol * max(1.0, np.abs(b_s).sum()):
        return LpResult("infeasible", iterations=it1)

    # drive remaining artificials out of the basis; drop redundant rows
    keep = np.ones(m, dtype=bool)
    for row in range(m):
        if basis[row] >= n:
            nz = np.nonzero(np.abs(tab[row, :n]) > PIVOT_TOL)[0]
            if nz.size:
                _pivot(tab, row, int(nz[0]))
                basis[row] = int(nz[0])
            else:
                keep[row] = False
    rows = np.nonzero(keep)[0]
    tab2 = np.zeros((rows.size + 1, n + 1))
    tab2[:rows.size, :n] = tab[rows, :n]
    tab2[:rows.size, -1] = tab[rows, -1]
    basis2 = basis[rows].copy()
    # phase 2 objective row: -c + c_B B^-1 A
    tab2[-1, :n] = -c
    for i, j in enumerate(basis2):
        tab2[-1] -= tab2[-1, j] * tab2[i]
    status, it2 = _run(tab2, basis2, n, max_iter)
    if status == "unbounded":
        return LpResult("unbounded", iterations=it1 + it2)

    # recompute the basic solution from the original system
    B = A[np.ix_(rows, basis2)]
    x = np.zeros(n)
    x[basis2] = np.linalg.solve(B, b[rows])
    y = np.zeros(m)
    y[rows] = np.linalg.solve(B.T, c[basis2])
    x[np.abs(x) < 1e-15] = 0.0
    return LpResult("optimal", x=x, duals=y, objective=float(c @ x), basis=basis2,
                    iterations=it1 + it2)
