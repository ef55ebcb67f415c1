"""Lax-Friedrichs discretisation of ``lam*U + H(x, p + s*DU, u) - nu*Lap U - c`` on a periodic grid.

The same operator serves the cell problems (``u`` frozen at a constant
``theta``, ``s = 1``) and the rescaled oscillatory problems (``u = U`` and
``s = 1/eps``).  The numerical Hamiltonian is

    H_LF(x, q-, q+) = H(x, p + (q- + q+)/2, u) - sum_k sigma_k/2 (q+_k - q-_k)

with ``sigma`` either a global bound (``dissipation="global"``) or, by
default, ``1.2 * max |dH/dp_k|`` over the segment between ``q-_k`` and
``q+_k`` at each node (local Lax-Friedrichs).  For H convex in p the
maximum sits at a segment end, and both variants are monotone.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import PeriodicGrid, laplacian, one_sided_differences
from .hamiltonian import HamiltonianSpec

logger = logging.getLogger(__name__)

SIGMA_SAFETY = 1.2
DISSIPATIONS = ("local", "global")


class SchemeError(RuntimeError):
    pass


class CFLError(SchemeError):
    pass


class ConvergenceError(SchemeError):
    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace or []


def cfl_timestep(grid: PeriodicGrid, sigma, order: str = "first", viscosity: float = 1.0,
                 grad_scale: float = 1.0) -> float:
    """``0.4 * min(h / sum(sigma), h^2 / (2 dim nu))``; the second bound only for second order."""
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (grid.dim,))
    if np.any(sigma <= 0):
        raise CFLError(f"dissipation must be positive, got {sigma}")
    h = grid.spacing
    dt = h / (grad_scale * float(np.sum(sigma)))
    if order == "second":
        if viscosity <= 0:
            raise CFLError("viscosity must be positive for second order")
        dt = min(dt, h * h / (2 * grid.dim * viscosity))
    return 0.4 * dt


def gradient_radius(ham: HamiltonianSpec, level: float, u_values, p_max: float = 8.0, samples: int = 64) -> float:
    """Largest ``|q|`` with ``min_x H(x, q, u) <= level`` for some sampled ``u``.

    Coercivity makes this a bound on the gradient of any subsolution at ``level``.
    """
    dim = ham.dim
    xs = np.linspace(0.0, 1.0, samples, endpoint=False)
    if dim == 1:
        x = xs[:, None]
        dirs = np.array([[1.0], [-1.0]])
    else:
        gx, gy = np.meshgrid(xs[::4], xs[::4], indexing="ij")
        x = np.stack([gx.ravel(), gy.ravel()], axis=-1)
        ang = np.linspace(0.0, 2 * np.pi, 32, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    u_values = np.atleast_1d(np.asarray(u_values, dtype=float))
    radii = np.linspace(0.0, p_max, 401)
    q = radii[:, None, None] * dirs[None, :, :]  # (nr, ndir, dim)
    vals = ham(x[None, None, :, None, :], q[:, :, None, None, :], u_values[None, None, None, :])
    reachable = np.min(vals.reshape(len(radii), -1), axis=1) <= level
    return float(radii[reachable].max()) if np.any(reachable) else 0.0


def estimate_sigma(ham: HamiltonianSpec, center, radius: float, u_values, samples: int = 33) -> np.ndarray:
    """``1.2 * max |dH/dp_k|`` over sampled x, a box of half-width ``radius`` around ``center``, sampled ``u``."""
    dim = ham.dim
    center = np.broadcast_to(np.asarray(center, dtype=float), (dim,))
    xs = np.linspace(0.0, 1.0, samples, endpoint=False)
    ps = np.linspace(-radius, radius, 2 * samples + 1)
    u_values = np.atleast_1d(np.asarray(u_values, dtype=float))
    if dim == 1:
        x = xs[:, None]
        q = center + ps[:, None]
    else:
        gx, gy = np.meshgrid(xs[::2], xs[::2], indexing="ij")
        x = np.stack([gx.ravel(), gy.ravel()], axis=-1)
        qx, qy = np.meshgrid(ps[::2], ps[::2], indexing="ij")
        q = center + np.stack([qx.ravel(), qy.ravel()], axis=-1)
    grad = ham.dp(x[:, None, None, :], q[None, :, None, :], u_values[None, None, :])
    sigma = SIGMA_SAFETY * np.max(np.abs(grad).reshape(-1, dim), axis=0)
    return np.maximum(sigma, 1e-3)


@dataclass(frozen=True)
class LFOperator:
    """Discrete operator ``F(U) = lam*U + H_LF(x, U) - nu*Lap U - c``.

    ``frozen_u`` is ``None`` when the Hamiltonian reads the unknown itself;
    otherwise it is a constant (or node array) fed in as the ``u`` argument.
    ``sigma`` is the global dissipation bound; it fixes the explicit time step
    and, for ``dissipation="global"``, the flux itself.
    """

    ham: HamiltonianSpec
    grid: PeriodicGrid
    sigma: np.ndarray
    slope: np.ndarray
    grad_scale: float = 1.0
    viscosity: float = 0.0
    discount: float = 0.0
    level: float = 0.0
    frozen_u: object = 0.0
    dissipation: str = "local"

    def __post_init__(self):
        if self.dissipation not in DISSIPATIONS:
            raise ValueError(f"dissipation must be one of {DISSIPATIONS}")

    def with_(self, **changes) -> "LFOperator":
        return replace(self, **changes)

    def _u_arg(self, U):
        return U if self.frozen_u is None else np.broadcast_to(np.asarray(self.frozen_u, dtype=float), U.shape)

    def _pieces(self, U):
        pm, pp = one_sided_differences(U, self.grid.spacing)
        s = self.grad_scale
        qm = self.slope + s * pm
        qp = self.slope + s * pp
        return qm, qp

    def _flux(self, x, qm, qp, u) -> np.ndarray:
        qbar = 0.5 * (qm + qp)
        if self.dissipation == "global":
            sigma = self.sigma
        else:
            sigma = np.empty(qm.shape)
            for k in range(self.grid.dim):
                lo = qbar.copy()
                hi = qbar.copy()
                lo[..., k] = qm[..., k]
                hi[..., k] = qp[..., k]
                sigma[..., k] = SIGMA_SAFETY * np.maximum(
                    np.abs(self.ham.dp(x, lo, u)[..., k]), np.abs(self.ham.dp(x, hi, u)[..., k])
                )
        return self.ham(x, qbar, u) - 0.5 * np.sum(sigma * (qp - qm), axis=-1)

    def numerical_hamiltonian(self, U: np.ndarray) -> np.ndarray:
        qm, qp = self._pieces(U)
        return self._flux(self.grid.coordinates(), qm, qp, self._u_arg(U))

    def __call__(self, U: np.ndarray) -> np.ndarray:
        out = self.numerical_hamiltonian(U) - self.level
        if self.viscosity:
            out = out - self.viscosity * laplacian(U, self.grid.spacing)
        if self.discount:
            out = out + self.discount * U
        return out

    def max_dp(self, U: np.ndarray) -> np.ndarray:
        qm, qp = self._pieces(U)
        x = self.grid.coordinates()
        u = self._u_arg(U)
        a = np.maximum(np.abs(self.ham.dp(x, qm, u)), np.abs(self.ham.dp(x, qp, u)))
        return np.max(a.reshape(-1, self.grid.dim), axis=0)

    def is_monotone_at(self, U: np.ndarray) -> bool:
        if self.dissipation == "local":
            return True
        return bool(np.all(self.max_dp(U) <= self.sigma * (1 + 1e-12)))

    def widened(self, U: np.ndarray) -> "LFOperator":
        return self.with_(sigma=np.maximum(self.sigma, SIGMA_SAFETY * self.max_dp(U)))

    def flux_derivatives(self, U: np.ndarray, step: float = 1e-6):
        """``(dF/dq-, dF/dq+, dF/du)`` per node; the first two carry a trailing ``dim`` axis."""
        qm, qp = self._pieces(U)
        x = self.grid.coordinates()
        u = self._u_arg(U)
        A = np.empty(qm.shape)
        B = np.empty(qm.shape)
        for k in range(self.grid.dim):
            e = np.zeros(self.grid.dim)
            e[k] = step
            A[..., k] = (self._flux(x, qm + e, qp, u) - self._flux(x, qm - e, qp, u)) / (2 * step)
            B[..., k] = (self._flux(x, qm, qp + e, u) - self._flux(x, qm, qp - e, u)) / (2 * step)
        if self.frozen_u is None:
            C = (self._flux(x, qm, qp, u + step) - self._flux(x, qm, qp, u - step)) / (2 * step)
        else:
            C = np.zeros(U.shape)
        return A, B, C

    def jacobian(self, U: np.ndarray, F: np.ndarray | None = None) -> sp.csr_matrix:
        """Sparse Jacobian built from per-node flux derivatives.

        Each row only sees differences of ``U`` through ``q-`` and ``q+``, so
        its entries sum to ``lam + dH/du`` exactly whatever the derivative
        error; this keeps the nearly singular small-``lam`` systems accurate.
        """
        grid = self.grid
        n = grid.size
        A, B, C = self.flux_derivatives(U)
        c = self.grad_scale / grid.spacing
        nu = self.viscosity / grid.spacing**2
        idx = np.arange(n).reshape(grid.shape)
        diag = self.discount + C.reshape(n) + 2 * grid.dim * nu
        rows, cols, vals = [], [], []
        for k in range(grid.dim):
            a = A[..., k].reshape(n) * c
            b = B[..., k].reshape(n) * c
            diag = diag + a - b
            rows += [idx.reshape(n), idx.reshape(n)]
            cols += [np.roll(idx, 1, axis=k).reshape(n), np.roll(idx, -1, axis=k).reshape(n)]
            vals += [-a - nu, b - nu]
        rows.append(idx.reshape(n))
        cols.append(idx.reshape(n))
        vals.append(diag)
        J = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        return J.tocsr()

    def explicit_step(self, U: np.ndarray, dt: float) -> np.ndarray:
        return U - dt * self(U)

    def cfl(self) -> float:
        order = "second" if self.viscosity else "first"
        return cfl_timestep(self.grid, self.sigma, order, self.viscosity or 1.0, self.grad_scale)


def _sparse_solve(A, b: np.ndarray) -> np.ndarray | None:
    """``A^{-1} b``, or ``None`` when ``A`` is numerically singular."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(A.tocsc(), b)
        except (spla.MatrixRankWarning, RuntimeError):
            return None
    return x if np.all(np.isfinite(x)) else None


def newton_solve(op: LFOperator, U0: np.ndarray, tol: float, max_iter: int = 100):
    """Damped Newton for ``op(U) = 0``; returns ``(U, op, iterations)``.

    Steps are backtracked on the Euclidean residual.  When backtracking
    stalls, the linear systems are regularised with ``I/dt`` (an implicit
    pseudo-time step) and ``dt`` grows again as the residual falls.
    """
    U = np.array(U0, dtype=float)
    F = op(U)
    res = float(np.max(np.abs(F)))
    n = op.grid.size
    eye = sp.identity(n, format="csr")
    inv_dt = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        if res <= tol:
            if op.is_monotone_at(U):
                return U, op, it - 1
            op = op.widened(U)
            F = op(U)
            res = float(np.max(np.abs(F)))
            continue
        A = op.jacobian(U) + inv_dt * eye
        dU = _sparse_solve(A, -F.reshape(n))
        if dU is None:
            inv_dt = max(10 * inv_dt, 1.0)
            continue
        dU = dU.reshape(U.shape)
        norm = float(np.linalg.norm(F))
        t = 1.0
        while t >= 1e-4:
            U_try = U + t * dU
            F_try = op(U_try)
            if np.all(np.isfinite(F_try)) and np.linalg.norm(F_try) <= (1 - 1e-4 * t) * norm:
                break
            t /= 2
        else:
            inv_dt = max(10 * inv_dt, 1.0)
            continue
        inv_dt = inv_dt / 10 if t == 1.0 and inv_dt > 1e-6 else (0.0 if t == 1.0 else inv_dt)
        U, F = U_try, F_try
        res = float(np.max(np.abs(F)))
        if not op.is_monotone_at(U):
            op = op.widened(U)
            F = op(U)
            res = float(np.max(np.abs(F)))
    if res <= tol and op.is_monotone_at(U):
        return U, op, it
    raise ConvergenceError(f"Newton did not converge: residual {res:.3e} > {tol:.1e} after {it} iterations")


def bordered_newton(op: LFOperator, V0: np.ndarray, level0: float, tol: float, max_iter: int = 60):
    """Solve ``H_LF(V) - nu*Lap V = level`` with ``V[node 0] = 0`` for ``(V, level)``.

    The undiscounted Jacobian is a singular M-matrix with the constants as
    kernel; pinning node 0 and adding ``level`` as an unknown makes the
    bordered system regular.
    """
    op = op.with_(discount=0.0, level=0.0)
    n = op.grid.size
    V = np.array(V0, dtype=float) - np.asarray(V0).reshape(-1)[0]
    level = float(level0)
    e0 = sp.csr_matrix(([1.0], ([0], [0])), shape=(1, n))
    minus_one = sp.csr_matrix(-np.ones((n, 1)))
    F = op(V) - level
    res = float(np.max(np.abs(F)))
    for it in range(1, max_iter + 1):
        if res <= tol:
            if op.is_monotone_at(V):
                return V, level, op, it - 1
            op = op.widened(V)
            F = op(V) - level
            res = float(np.max(np.abs(F)))
            continue
        J = op.jacobian(V, F + level)
        A = sp.bmat([[J, minus_one], [e0, None]], format="csc")
        step = spla.spsolve(A, np.concatenate([-F.reshape(n), [0.0]]))
        if not np.all(np.isfinite(step)):
            break
        t = 1.0
        while True:
            V_try = V + t * step[:n].reshape(V.shape)
            lvl_try = level + t * step[n]
            F_try = op(V_try) - lvl_try
            r_try = float(np.max(np.abs(F_try)))
            if r_try < res or t < 1e-3:
                break
            t /= 2
        V, level, F, res = V_try, lvl_try, F_try, r_try
    if res <= tol and op.is_monotone_at(V):
        return V, level, op, max_iter
    raise ConvergenceError(f"bordered Newton stalled at residual {res:.3e}")
