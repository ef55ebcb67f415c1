"""Dense-tableau bounded-variable simplex for ``min c.x  s.t.  A x = b,  0 <= x <= upper``.

Two phases with artificial variables.  Pricing is Dantzig's most negative
reduced cost; after a run of degenerate pivots it falls back to Bland's
smallest-index rule, which cannot cycle.  The tableau is refactorised from
the original data at regular intervals and once more at the end, so the
returned point satisfies ``A x = b`` to near machine precision.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
COST_TOL = 1e-10
REFACTOR_EVERY = 50
DEGENERATE_RUN = 500


class LPError(RuntimeError):
    pass


class InfeasibleError(LPError):
    pass


class UnboundedError(LPError):
    pass


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    objective: float
    iterations: int
    basis: tuple


class _Tableau:
    def __init__(self, A, b, c, upper, basis, x):
        self.A, self.b, self.c, self.upper = A, b, c, upper
        self.basis = list(basis)
        self.x = x
        self.iterations = 0
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        self.T = np.linalg.solve(B, self.A)
        nonbasic = np.ones(self.A.shape[1], dtype=bool)
        nonbasic[self.basis] = False
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = np.linalg.solve(B, rhs)
        self.d = self.c - self.c[self.basis] @ self.T

    def entering(self, bland: bool, allowed: np.ndarray):
        nonbasic = np.ones(len(self.c), dtype=bool)
        nonbasic[self.basis] = False
        at_upper = nonbasic & np.isfinite(self.upper) & (self.x >= self.upper - 1e-12)
        gain = np.where(at_upper, self.d, -self.d)  # positive gain means improving
        gain = np.where(nonbasic & allowed, gain, 0.0)
        scale = COST_TOL * max(1.0, float(np.max(np.abs(self.c))))
        eligible = np.flatnonzero(gain > scale)
        if eligible.size == 0:
            return None, 0
        j = int(eligible[0]) if bland else int(eligible[np.argmax(gain[eligible])])
        return j, (-1 if at_upper[j] else 1)

    def step(self, j: int, direction: int, bland: bool) -> bool:
        """Move entering ``j``; returns True if the step was degenerate."""
        alpha = self.T[:, j] * direction
        xb = self.x[self.basis]
        ub = self.upper[self.basis]
        ratios = np.full(len(alpha), np.inf)
        dec = alpha > PIVOT_TOL
        inc = alpha < -PIVOT_TOL
        ratios[dec] = xb[dec] / alpha[dec]
        ratios[inc] = (ub[inc] - xb[inc]) / (-alpha[inc])
        ratios = np.maximum(ratios, 0.0)
        t_pivot = float(np.min(ratios)) if ratios.size else np.inf
        t_flip = float(self.upper[j])
        if not np.isfinite(t_pivot) and not np.isfinite(t_flip):
            raise UnboundedError("objective unbounded below")
        self.iterations += 1
        if t_flip <= t_pivot:
            self.x[self.basis] = xb - t_flip * alpha
            self.x[j] = self.x[j] + direction * t_flip
            return t_flip == 0.0
        ties = np.flatnonzero(ratios <= t_pivot + 1e-12)
        if bland:
            r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
        else:
            r = int(ties[np.argmax(np.abs(alpha[ties]))])
        leaving = self.basis[r]
        self.x[self.basis] = xb - t_pivot * alpha
        self.x[j] = self.x[j] + direction * t_pivot
        # pin the leaving variable exactly on the bound it reached
        self.x[leaving] = 0.0 if alpha[r] > 0 else self.upper[leaving]
        self._pivot(r, j)
        return t_pivot <= 1e-14

    def _pivot(self, r: int, j: int):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.d = self.d - self.d[j] * T[r]
        self.basis[r] = j
        if self.iterations % REFACTOR_EVERY == 0:
            self.refactor()

    def run(self, allowed: np.ndarray, max_iter: int):
        degenerate = 0
        while self.iterations < max_iter:
            bland = degenerate >= DEGENERATE_RUN
            j, direction = self.entering(bland, allowed)
            if j is None:
                self.refactor()
                j, direction = self.entering(bland, allowed)
                if j is None:
                    return
            degenerate = degenerate + 1 if self.step(j, direction, bland) else 0
        raise LPError(f"simplex did not finish within {max_iter} iterations")


def solve_lp(c, A_eq, b_eq, upper=None, max_iter: int = 50_000) -> LPResult:
    """Minimise ``c.x`` over ``A_eq x = b_eq``, ``0 <= x <= upper`` (``inf`` allowed)."""
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    c = np.array(c, dtype=float)
    m, n = A.shape
    upper = np.full(n, np.inf) if upper is None else np.array(upper, dtype=float)
    if np.any(upper < 0):
        raise LPError("upper bounds must be nonnegative")
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    # phase 1: artificials start basic at x_art = b
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    up1 = np.concatenate([upper, np.full(m, np.inf)])
    x1 = np.zeros(n + m)
    x1[n:] = b
    tab = _Tableau(A1, b, c1, up1, range(n, n + m), x1)
    everything = np.ones(n + m, dtype=bool)
    tab.run(everything, max_iter)
    infeas = float(np.sum(tab.x[n:]))
    if infeas > 1e-9 * max(1.0, float(np.max(np.abs(b)))):
        raise InfeasibleError(f"no feasible point (phase-1 residual {infeas:.3e})")

    # drive remaining artificials out of the basis; rows where that is impossible are redundant
    keep_rows = np.ones(m, dtype=bool)
    for r in range(m):
        if tab.basis[r] >= n:
            row = tab.T[r, :n]
            nonbasic = np.ones(n, dtype=bool)
            nonbasic[[k for k in tab.basis if k < n]] = False
            cand = np.flatnonzero(nonbasic & (np.abs(row) > 1e-7))
            if cand.size:
                tab._pivot(r, int(cand[np.argmax(np.abs(row[cand]))]))
            else:
                keep_rows[tab.basis[r] - n] = False
    rows = np.flatnonzero(keep_rows)
    basis = [k for k in tab.basis if k < n]
    if len(basis) != len(rows):
        raise LPError("could not recover a basis after phase 1")

    x2 = tab.x[:n].copy()
    x2[basis] = 0.0
    tab2 = _Tableau(A[rows], b[rows], c, upper, basis, x2)
    tab2.iterations = tab.iterations
    tab2.run(np.ones(n, dtype=bool), max_iter)
    tab2.refactor()
    x = tab2.x.copy()
    x = np.clip(x, 0.0, upper)
    return LPResult(x, float(c @ x), tab2.iterations, tuple(tab2.basis))
