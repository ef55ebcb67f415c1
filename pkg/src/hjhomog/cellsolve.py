"""Frozen-``theta`` cell problems and the effective value ``Hbar(p, theta)``.

First order: ``H(x, p + Dv, theta) = Hbar``.  Second order:
``H(x, p + Dv, theta) = Lap v + Hbar``.  Both are solved on a periodic grid
with the Lax-Friedrichs scheme of :mod:`hjhomog.scheme`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import PeriodicGrid, ScalarField, laplacian, one_sided_differences
from .hamiltonian import HamiltonianSpec
from .scheme import (
    CFLError,
    ConvergenceError,
    LFOperator,
    bordered_newton,
    cfl_timestep,
    estimate_sigma,
    gradient_radius,
    newton_solve,
)

logger = logging.getLogger(__name__)

P_MAX = 8.0
METHODS = ("large-time", "discounted", "eigenvalue-oracle")
DISCOUNT_LADDER = (1e-1, 1e-2, 1e-3)

__all__ = [
    "CellProblem",
    "CellSolution",
    "solve_cell",
    "cfl_timestep",
    "hopf_cole_eigenvalue",
    "CFLError",
    "ConvergenceError",
]


@dataclass(frozen=True)
class CellProblem:
    hamiltonian: HamiltonianSpec
    p: tuple = (0.0,)
    theta: float = 0.0
    order: str = "first"
    method: str = "large-time"

    def __post_init__(self):
        p = tuple(float(v) for v in np.atleast_1d(self.p))
        if len(p) == 1 and self.hamiltonian.dim == 2:
            p = p * 2
        if len(p) != self.hamiltonian.dim:
            raise ValueError(f"slope has {len(p)} components, Hamiltonian has dim {self.hamiltonian.dim}")
        object.__setattr__(self, "p", p)
        if self.order not in ("first", "second"):
            raise ValueError(f"order must be 'first' or 'second', got {self.order!r}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method == "eigenvalue-oracle":
            if self.order != "second" or not self.hamiltonian.quadratic_separable:
                raise ValueError("the eigenvalue oracle needs order='second' and a quadratic-separable Hamiltonian")
            if any(self.p):
                raise ValueError("the eigenvalue oracle is implemented for p = 0 only")
        if np.linalg.norm(p) > P_MAX - 1:
            raise ValueError(f"|p| = {np.linalg.norm(p):.3g} exceeds the sampled box limit {P_MAX - 1}")


@dataclass(frozen=True)
class CellSolution:
    hbar: float
    corrector: ScalarField
    residual_sup: float
    iterations: int
    sigma: np.ndarray = field(repr=False, default=None)
    method: str = ""


def dissipation_for(ham: HamiltonianSpec, p, theta: float, order: str, grid: PeriodicGrid) -> np.ndarray:
    """Lax-Friedrichs ``sigma`` from sampled ``|dH/dp|`` on a box of radius ``|p| + Lip + 1``."""
    x = grid.coordinates().reshape(-1, grid.dim)
    upper = float(np.max(ham(x, np.broadcast_to(np.asarray(p), x.shape), theta)))
    lip = gradient_radius(ham, upper, [theta], p_max=P_MAX + 4)
    radius = float(np.linalg.norm(p)) + lip + 1.0
    return estimate_sigma(ham, np.zeros(ham.dim), radius, [theta])


def _operator(prob: CellProblem, grid: PeriodicGrid, dissipation: str = "local") -> LFOperator:
    sigma = dissipation_for(prob.hamiltonian, prob.p, prob.theta, prob.order, grid)
    return LFOperator(
        dissipation=dissipation,
        ham=prob.hamiltonian,
        grid=grid,
        sigma=sigma,
        slope=np.asarray(prob.p),
        viscosity=1.0 if prob.order == "second" else 0.0,
        frozen_u=float(prob.theta),
    )


def _residual(op: LFOperator, corrector: np.ndarray, hbar: float) -> float:
    return float(np.max(np.abs(op.with_(discount=0.0, level=0.0)(corrector) - hbar)))


def _normalised(grid: PeriodicGrid, values: np.ndarray) -> ScalarField:
    flat = values.reshape(-1)
    return ScalarField(grid, values - flat[0])


def solve_cell(prob: CellProblem, grid: PeriodicGrid, tol: float = 1e-6, *, dt: float | None = None,
               max_steps: int = 2_000_000, polish: bool = True,
               dissipation: str = "local") -> CellSolution:
    """Effective value and node-0-normalised corrector of a cell problem.

    ``large-time`` evolves ``w_t + H_LF(x, p + Dw) - [Lap w] = 0`` explicitly and
    reads ``Hbar`` from the drift of the mean of ``w``.  ``discounted`` solves
    ``delta*u + H_LF - [Lap u] = 0`` down the ladder 1e-1, 1e-2, 1e-3 and
    extrapolates ``-delta*mean(u)`` linearly to ``delta = 0``; the result is
    then polished on the undiscounted scheme unless ``polish=False``.
    ``dissipation`` selects local (default) or global Lax-Friedrichs.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if grid.n < 32:
        raise ValueError("cell problems need at least 32 points per axis")
    if grid.dim != prob.hamiltonian.dim:
        raise ValueError("grid and Hamiltonian dimensions differ")
    if prob.method == "eigenvalue-oracle":
        return _solve_eigen(prob, grid, tol)
    op = _operator(prob, grid, dissipation)
    if prob.method == "large-time":
        return _solve_large_time(op, grid, tol, dt, max_steps)
    return _solve_discounted(op, grid, tol, polish)


def _solve_large_time(op: LFOperator, grid: PeriodicGrid, tol: float, dt: float | None, max_steps: int):
    dt_limit = op.cfl() / 0.4
    if dt is None:
        dt = op.cfl()
    elif dt > dt_limit * (1 + 1e-12):
        raise CFLError(f"time step {dt:.3e} exceeds the monotone limit {dt_limit:.3e}")
    if not np.isfinite(dt) or dt <= 0:
        raise CFLError(f"invalid time step {dt}")
    w = np.zeros(grid.shape)
    window = max(1, int(round(0.05 / dt)))
    step = 0
    mean_prev = float(np.mean(w))
    t_prev = 0.0
    hbar_prev = np.nan
    while step < max_steps:
        for _ in range(window):
            w = w - dt * op(w)
        step += window
        if not np.all(np.isfinite(w)):
            raise ConvergenceError("NaN detected during large-time evolution")
        t_now = step * dt
        mean_now = float(np.mean(w))
        hbar = -(mean_now - mean_prev) / (t_now - t_prev)
        residual = _residual(op, w, hbar)
        if residual <= tol and abs(hbar - hbar_prev) <= tol:
            if not op.is_monotone_at(w):
                raise CFLError("dissipation estimate too small for the computed gradients")
            corrector = _normalised(grid, w)
            return CellSolution(hbar, corrector, _residual(op, corrector.values, hbar), step, op.sigma, "large-time")
        mean_prev, t_prev, hbar_prev = mean_now, t_now, hbar
    raise ConvergenceError(f"large-time evolution not settled after {max_steps} steps (residual {residual:.2e})")


def _solve_discounted(op: LFOperator, grid: PeriodicGrid, tol: float, polish: bool):
    u = np.zeros(grid.shape)
    levels = []
    iterations = 0
    for delta in DISCOUNT_LADDER:
        u, op, its = newton_solve(op.with_(discount=delta), u, tol=0.1 * tol)
        iterations += its
        levels.append((delta, -delta * float(np.mean(u)), u.copy()))
    (d1, h1, _), (d2, h2, u2) = levels[-2], levels[-1]
    slope = (h1 - h2) / (d1 - d2)
    hbar = h2 - slope * d2
    corrector = u2 - u2.reshape(-1)[0]
    if polish:
        corrector, hbar, op, its = bordered_newton(op, corrector, hbar, tol=0.1 * tol)
        iterations += its
    field = _normalised(grid, corrector)
    residual = _residual(op, field.values, hbar)
    if residual > tol:
        raise ConvergenceError(f"discounted cell solve residual {residual:.2e} exceeds tol {tol:.1e}")
    return CellSolution(hbar, field, residual, iterations, op.sigma, "discounted")


def hopf_cole_operator(ham: HamiltonianSpec, theta: float, grid: PeriodicGrid) -> sp.csr_matrix:
    """Matrix of ``w -> 2 Lap w + V w`` with ``V(x) = H(x, 0, theta)``."""
    n = grid.size
    h = grid.spacing
    V = ham.potential(grid.coordinates(), theta).reshape(n)
    idx = np.arange(n).reshape(grid.shape)
    A = sp.diags(V - 2 * 2 * grid.dim / h**2)
    for k in range(grid.dim):
        fwd = np.roll(idx, -1, axis=k).reshape(n)
        bwd = np.roll(idx, 1, axis=k).reshape(n)
        A = A + sp.csr_matrix((np.full(n, 2 / h**2), (np.arange(n), fwd)), shape=(n, n))
        A = A + sp.csr_matrix((np.full(n, 2 / h**2), (np.arange(n), bwd)), shape=(n, n))
    return A.tocsr()


def hopf_cole_eigenvalue(ham: HamiltonianSpec, theta: float, grid: PeriodicGrid, tol: float = 1e-12,
                         max_iter: int = 10_000):
    """Principal eigenpair of ``2 Lap + V`` by shifted inverse power iteration.

    For ``H = |p|^2/2 + V`` the substitution ``v = -2 log w`` turns the viscous
    cell problem into ``2 Lap w + V w = Hbar w``, so the top eigenvalue is
    ``Hbar(0, theta)`` and ``-2 log w`` is the corrector.
    """
    A = hopf_cole_operator(ham, theta, grid)
    n = grid.size
    shift = float(np.max(A.diagonal())) + 4 * grid.dim / grid.spacing**2 + 1.0
    # shift - A is an M-matrix; its inverse is positive and the top eigenvalue of A dominates
    lu = spla.splu((shift * sp.identity(n) - A).tocsc())
    w = np.ones(n)
    lam = np.nan
    for it in range(1, max_iter + 1):
        z = lu.solve(w)
        w_new = z / np.linalg.norm(z)
        lam_new = float(w_new @ (A @ w_new))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)) and np.linalg.norm(w_new - w) < 1e-10:
            return lam_new, w_new.reshape(grid.shape), it
        w, lam = w_new, lam_new
    return lam, w.reshape(grid.shape), max_iter


def _solve_eigen(prob: CellProblem, grid: PeriodicGrid, tol: float) -> CellSolution:
    lam, w, its = hopf_cole_eigenvalue(prob.hamiltonian, prob.theta, grid)
    if np.min(w) <= 0:
        w = -w
    corrector = _normalised(grid, -2.0 * np.log(w))
    # residual of the centred discretisation; O(h^2) since the transform is only exact in the continuum
    pm, pp = one_sided_differences(corrector.values, grid.spacing)
    grad = 0.5 * (pm + pp)
    resid = prob.hamiltonian(grid.coordinates(), grad, prob.theta) - laplacian(corrector.values, grid.spacing) - lam
    return CellSolution(lam, corrector, float(np.max(np.abs(resid))), its, None, "eigenvalue-oracle")
