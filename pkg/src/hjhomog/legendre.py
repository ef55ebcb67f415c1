"""Numerical Legendre transform ``L(x, v, theta) = sup_p <p, v> - H(x, p, theta)``.

The supremum is taken over a uniform p-grid on ``[-Pmax, Pmax]^dim`` and then
refined by golden-section searches along each axis around the discrete
argmax.  For H convex in p the objective is concave, so the refinement
converges to the true maximiser whenever it lies inside the box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import HamiltonianSpec

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
# points per axis of the coarse product grid in 2D; the full 1D count would be 257^2 evaluations per query
COARSE_2D = 65


class LegendreError(ValueError):
    pass


@dataclass(frozen=True)
class LagrangianEval:
    source: HamiltonianSpec
    p_search_radius: float = 8.0
    p_search_points: int = 257
    v_max: float = 5.0
    golden_iterations: int = 60
    sweeps_2d: int = 4

    def __post_init__(self):
        if not self.p_search_radius > 0:
            raise LegendreError("p_search_radius must be positive")
        if self.p_search_points < 129:
            raise LegendreError("p_search_points must be at least 129")
        if not self.v_max > 0:
            raise LegendreError("v_max must be positive")

    def p_axis(self) -> np.ndarray:
        n = self.p_search_points if self.source.dim == 1 else COARSE_2D
        return np.linspace(-self.p_search_radius, self.p_search_radius, n)


def _prepare(le: LagrangianEval, x, v, theta):
    dim = le.source.dim
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if dim == 1:
        x = x[..., None] if x.shape[-1:] != (1,) else x
        v = v[..., None] if v.shape[-1:] != (1,) else v
    batch = np.broadcast_shapes(x.shape[:-1], v.shape[:-1], np.shape(theta))
    x = np.broadcast_to(x, batch + (dim,)).reshape(-1, dim)
    v = np.broadcast_to(v, batch + (dim,)).reshape(-1, dim)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), batch).reshape(-1)
    if np.any(np.linalg.norm(v, axis=-1) > le.v_max * (1 + 1e-12)):
        raise LegendreError(f"|v| exceeds the declared v_max = {le.v_max}")
    return x, v, theta, batch


def _objective(le: LagrangianEval, x, v, theta, p):
    vals = np.sum(p * v, axis=-1) - le.source(x, p, theta)
    if not np.all(np.isfinite(vals)):
        raise LegendreError("Hamiltonian returned non-finite values")
    return vals


def _golden(le: LagrangianEval, x, v, theta, p, axis: int, lo, hi):
    """Vectorised golden-section maximisation of the objective along one axis."""
    a, b = lo.copy(), hi.copy()

    def at(t):
        q = p.copy()
        q[:, axis] = t
        return _objective(le, x, v, theta, q)

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = at(c), at(d)
    for _ in range(le.golden_iterations):
        left = fc >= fd
        # keep [a, d] when the left probe wins, else [c, b]; one new probe per step
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        keep = np.where(left, c, d)
        fkeep = np.where(left, fc, fd)
        new = np.where(left, b - _GOLDEN * (b - a), a + _GOLDEN * (b - a))
        fnew = at(new)
        c = np.where(left, new, keep)
        d = np.where(left, keep, new)
        fc = np.where(left, fnew, fkeep)
        fd = np.where(left, fkeep, fnew)
    t = 0.5 * (a + b)
    best = p.copy()
    best[:, axis] = t
    return best


def _argmax(le: LagrangianEval, x, v, theta, chunk: int = 4096):
    dim = le.source.dim
    axis = le.p_axis()
    step = axis[1] - axis[0]
    if dim == 1:
        grid = axis[:, None]
    else:
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        grid = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    m = len(x)
    idx = np.empty(m, dtype=int)
    rows = max(1, chunk * 64 // len(grid))
    for s in range(0, m, rows):
        sl = slice(s, min(m, s + rows))
        vals = _objective(le, x[sl, None, :], v[sl, None, :], theta[sl, None], grid[None, :, :])
        idx[sl] = np.argmax(vals, axis=1)
    p = grid[idx].copy()
    edge = np.any(np.isclose(np.abs(p), le.p_search_radius), axis=-1)
    if np.any(edge):
        k = int(np.argmax(edge))
        raise LegendreError(
            f"maximiser on the search boundary at x={x[k]}, v={v[k]}, theta={theta[k]}; increase p_search_radius"
        )
    sweeps = 1 if dim == 1 else le.sweeps_2d
    for sweep in range(sweeps):
        width = step if sweep == 0 else step / 2**sweep
        for k in range(dim):
            p = _golden(le, x, v, theta, p, k, p[:, k] - width, p[:, k] + width)
    return p


def _shape_out(vals, batch):
    return vals.reshape(batch) if batch else float(vals[0])


def lagrangian_with_argmax(le: LagrangianEval, x, v, theta):
    """``(L, p*)`` where ``p*`` is the refined maximiser (trailing ``dim`` axis)."""
    x, v, theta, batch = _prepare(le, x, v, theta)
    p = _argmax(le, x, v, theta)
    vals = _objective(le, x, v, theta, p)
    return _shape_out(vals, batch), p.reshape(batch + (le.source.dim,))


def lagrangian(le: LagrangianEval, x, v, theta=0.0):
    """Vectorised ``L(x, v, theta)``; ``x``/``v`` carry a trailing ``dim`` axis (optional in 1D)."""
    return lagrangian_with_argmax(le, x, v, theta)[0]


def lagrangian_du(le: LagrangianEval, x, v, theta=0.0, dtheta: float = 1e-4):
    """Centred difference of ``L`` in ``theta``.

    Monotone Hamiltonians have ``dL/du <= 0``; a value above ``1e-6`` means
    the transform or the monotonicity declaration is wrong and is an error.
    """
    if not dtheta > 0:
        raise LegendreError("dtheta must be positive")
    theta = np.asarray(theta, dtype=float)
    up = np.asarray(lagrangian(le, x, v, theta + dtheta))
    down = np.asarray(lagrangian(le, x, v, theta - dtheta))
    out = (up - down) / (2 * dtheta)
    if le.source.monotone_u and np.any(out > 1e-6):
        raise LegendreError(f"dL/du = {float(np.max(out)):.3e} > 0 for a Hamiltonian declared monotone in u")
    return out if out.ndim else float(out)


def lagrangian_du_envelope(le: LagrangianEval, x, v, theta=0.0):
    """``-dH/du`` at the maximiser; equals ``dL/du`` by the envelope theorem."""
    xs, vs, ts, batch = _prepare(le, x, v, theta)
    p = _argmax(le, xs, vs, ts)
    return _shape_out(-le.source.du(xs, p, ts), batch)
