"""Oscillatory problems ``H(x/eps, Du, u) = c`` and ``H(x/eps, Du, u) = eps*Lap u + c`` on the torus.

With ``1/eps`` an integer the equations are invariant under shifts by
``eps``, and so is the discounted solution.  Everything is therefore solved
for ``U(y) = u(eps*y)`` on one unit cell:

    lam*U + H(y, D_y U / eps, U) - (1/eps) Lap_y U = c      (viscous term for second order)

The discount runs down a ladder with warm starts; each level is solved by
damped Newton on the Lax-Friedrichs discretisation.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cellsolve import CellProblem, solve_cell
from .core import PeriodicGrid, ScalarField, one_sided_differences
from .effective import ThetaInterval
from .hamiltonian import HamiltonianSpec
from .scheme import ConvergenceError, LFOperator, SchemeError, estimate_sigma, gradient_radius, newton_solve

logger = logging.getLogger(__name__)

LAMBDA_LADDER = (1e-1, 1e-2, 1e-3, 1e-4)
POLISH_ITER = 40
DU_STEP = 1e-6


class StagnationError(SchemeError):
    """The discount sweep did not settle; ``trace`` holds ``(lambda, sup-change)`` pairs."""

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace


def inverse_eps(eps: float) -> int:
    if not 0 < eps <= 1 or abs(round(1.0 / eps) * eps - 1.0) > 1e-9:
        raise ValueError(f"eps must be 1/m for a positive integer m, got {eps}")
    return int(round(1.0 / eps))


@dataclass(frozen=True)
class EpsProblem:
    hamiltonian: HamiltonianSpec
    eps: float
    c: float
    order: str = "first"
    grid: PeriodicGrid = field(default_factory=lambda: PeriodicGrid(1, 256))
    interval: ThetaInterval | None = None

    def __post_init__(self):
        inverse_eps(self.eps)
        if self.order not in ("first", "second"):
            raise ValueError("order must be 'first' or 'second'")
        if self.grid.dim != self.hamiltonian.dim:
            raise ValueError("grid and Hamiltonian dimensions differ")
        if self.grid.n < 32:
            raise ValueError("need at least 32 nodes per oscillation period")

    def operator(self, discount: float) -> LFOperator:
        ham = self.hamiltonian
        guess = 0.0 if self.interval is None else self.interval.midpoint
        u_samples = np.linspace(guess - 20.0, guess + 20.0, 9)
        lip = gradient_radius(ham, self.c + 1.0, u_samples, p_max=12.0)
        sigma = estimate_sigma(ham, np.zeros(ham.dim), lip + 1.0, u_samples)
        return LFOperator(
            ham=ham,
            grid=self.grid,
            sigma=sigma,
            slope=np.zeros(ham.dim),
            grad_scale=1.0 / self.eps,
            viscosity=1.0 / self.eps if self.order == "second" else 0.0,
            discount=discount,
            level=self.c,
            frozen_u=None,
        )

    def initial_guess(self) -> float:
        return 0.0 if self.interval is None else float(self.interval.midpoint)


@dataclass(frozen=True)
class EpsSolution:
    problem: EpsProblem
    u: ScalarField  # U(y) on the unit cell
    lambda_trace: list
    lipschitz_estimate: float
    residual_sup: float
    iterations: int
    settled: bool

    def on_x_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """``(x, u(x))`` on the torus grid with ``N/eps`` nodes per axis (the cell tiled ``1/eps`` times)."""
        m = inverse_eps(self.problem.eps)
        grid = self.problem.grid
        values = np.tile(self.u.values, (m,) * grid.dim)
        xgrid = PeriodicGrid(grid.dim, grid.n * m)
        return xgrid.coordinates(), values

    def sup_deviation(self, target: float) -> float:
        return float(np.max(np.abs(self.u.values - target)))

    def to_csv(self) -> str:
        x, values = self.on_x_grid()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        dim = self.problem.grid.dim
        writer.writerow(["x", "u"] if dim == 1 else ["x1", "x2", "u"])
        for xi, ui in zip(x.reshape(-1, dim), values.reshape(-1)):
            writer.writerow([repr(float(t)) for t in (*xi, ui)])
        return buf.getvalue()


def x_lipschitz(values: np.ndarray, grid: PeriodicGrid, eps: float) -> float:
    _, pp = one_sided_differences(values, grid.spacing)
    return float(np.max(np.abs(pp))) / eps


def solve_eps(prob: EpsProblem, tol: float = 1e-6, *, strict: bool = False, initial=None) -> EpsSolution:
    """Vanishing-discount solve; ``settled`` says whether the sweep reached its limit.

    The sweep is settled when the last ladder step moves ``U`` by at most
    ``tol``, or when a final Newton solve of the undiscounted scheme succeeds
    from the last level (recorded in the trace as ``lambda = 0``).

    A sweep that does not settle is returned with ``settled=False`` and its
    trace (the selection may drift when ``I(c)`` is not a singleton);
    ``strict=True`` turns that into :class:`StagnationError`.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    U = np.full(prob.grid.shape, prob.initial_guess()) if initial is None else np.array(initial, dtype=float)
    op = prob.operator(LAMBDA_LADDER[0])
    trace = []
    iterations = 0
    prev = None
    for lam in LAMBDA_LADDER:
        try:
            U, op, its = newton_solve(op.with_(discount=lam), U, tol=0.1 * tol)
        except ConvergenceError as exc:
            raise ConvergenceError(f"discount level {lam:g}: {exc}", trace) from exc
        iterations += its
        change = math.inf if prev is None else float(np.max(np.abs(U - prev)))
        trace.append((lam, change))
        prev = U.copy()
    settled = trace[-1][1] <= tol
    if not settled:
        # the undiscounted scheme is uniquely solvable when H is strictly increasing in u;
        # otherwise its Jacobian is singular and the polish fails, leaving the ladder result
        try:
            U0, op0, its = newton_solve(op.with_(discount=0.0), U, tol=0.1 * tol, max_iter=POLISH_ITER)
        except ConvergenceError:
            pass
        else:
            trace.append((0.0, float(np.max(np.abs(U0 - U)))))
            U, op, settled = U0, op0, True
            iterations += its
    if not settled:
        msg = f"discount sweep not settled: last sup-change {trace[-1][1]:.3e} > {tol:.1e}"
        if strict:
            raise StagnationError(msg, trace)
        logger.warning(msg)
    residual = float(np.max(np.abs(op(U))))
    lip = x_lipschitz(U, prob.grid, prob.eps)
    if not math.isfinite(lip):
        raise ConvergenceError("non-finite Lipschitz estimate", trace)
    return EpsSolution(prob, ScalarField(prob.grid, U), trace, lip, residual, iterations, settled)


@dataclass(frozen=True)
class Envelope:
    lower: ScalarField | None
    upper: ScalarField | None
    theta_minus: float | None
    theta_plus: float | None
    eps: float
    lower_residual: float | None = None  # max of the scheme residual; <= 0 for a subsolution
    upper_residual: float | None = None  # min of the scheme residual; >= 0 for a supersolution

    @property
    def minus_unbounded(self) -> bool:
        return self.lower is None

    @property
    def plus_unbounded(self) -> bool:
        return self.upper is None

    def contains(self, u: ScalarField, slack: float) -> bool:
        ok = True
        if self.lower is not None:
            ok &= bool(np.all(self.lower.values <= u.values + slack))
        if self.upper is not None:
            ok &= bool(np.all(u.values <= self.upper.values + slack))
        return ok

    def deviation(self) -> tuple[float | None, float | None]:
        """Largest distance of each envelope from its constant ``theta``."""
        lo = None if self.lower is None else float(np.max(np.abs(self.lower.values - self.theta_minus)))
        hi = None if self.upper is None else float(np.max(np.abs(self.upper.values - self.theta_plus)))
        return lo, hi

    def to_csv(self) -> str:
        grid = (self.lower or self.upper).grid
        m = inverse_eps(self.eps)
        x = PeriodicGrid(grid.dim, grid.n * m).coordinates().reshape(-1, grid.dim)
        cols = []
        names = ["x"] if grid.dim == 1 else ["x1", "x2"]
        for name, fld in (("lower", self.lower), ("upper", self.upper)):
            if fld is not None:
                names.append(name)
                cols.append(np.tile(fld.values, (m,) * grid.dim).reshape(-1))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        for k in range(len(x)):
            writer.writerow([repr(float(t)) for t in (*x[k], *(col[k] for col in cols))])
        return buf.getvalue()


class EnvelopeError(SchemeError):
    pass


def build_envelope(ham: HamiltonianSpec, eps: float, c: float, interval: ThetaInterval, order: str,
                   grid: PeriodicGrid, tol: float = 1e-6, sign_tol: float = 2e-3) -> Envelope:
    """``theta_- + eps*w - eps*|w|`` below and ``theta_+ + eps*w + eps*|w|`` above.

    ``w`` is the cell corrector at ``(0, theta)``.  Each side is checked to be a
    sub/supersolution of the undiscounted scheme up to ``sign_tol``, which
    must cover the level tolerance used to locate ``theta``.
    """
    prob = EpsProblem(ham, eps, c, order, grid, interval)
    op = prob.operator(0.0)

    def side(theta: float, sign: float):
        cell = solve_cell(CellProblem(ham, p=(0.0,) * ham.dim, theta=theta, order=order, method="discounted"),
                          grid, tol)
        w = cell.corrector.values
        values = theta + eps * w + sign * eps * float(np.max(np.abs(w)))
        return ScalarField(grid, values), op(values)

    lower = upper = None
    lo_res = hi_res = None
    if not interval.minus_unbounded:
        lower, res = side(interval.theta_minus, -1.0)
        lo_res = float(np.max(res))
        if lo_res > sign_tol:
            raise EnvelopeError(f"lower envelope is not a subsolution (residual {lo_res:.3e})")
    if not interval.plus_unbounded:
        upper, res = side(interval.theta_plus, 1.0)
        hi_res = float(np.min(res))
        if hi_res < -sign_tol:
            raise EnvelopeError(f"upper envelope is not a supersolution (residual {hi_res:.3e})")
    return Envelope(
        lower,
        upper,
        None if interval.minus_unbounded else interval.theta_minus,
        None if interval.plus_unbounded else interval.theta_plus,
        eps,
        lo_res,
        hi_res,
    )


@dataclass(frozen=True)
class UniquenessProbe:
    verdict: str  # "certified-unique" | "inconclusive"
    statistic: float
    shift_residual: float | None
    detail: str = ""


def uniqueness_probe(sol: EpsSolution, ham: HamiltonianSpec | None = None, eps: float | None = None,
                     c: float | None = None, order: str | None = None, tol: float = 1e-6,
                     measure_grid=None) -> UniquenessProbe:
    """Sufficient uniqueness check for the computed solution.

    Second order: ``max dH/du(y, Du, u) > 10 * step`` over the nodes; the
    settled difference of a re-solve started one unit higher is reported as
    the shift residual.  First order: the ordinal Mather LP with ``u`` frozen
    must be empty.
    """
    prob = sol.problem
    ham = ham or prob.hamiltonian
    eps = prob.eps if eps is None else eps
    c = prob.c if c is None else c
    order = order or prob.order
    grid = prob.grid
    U = sol.u.values
    if order == "second":
        pm, pp = one_sided_differences(U, grid.spacing)
        grad = 0.5 * (pm + pp) / eps
        du = ham.du(grid.coordinates(), grad, U, step=DU_STEP)
        stat = float(np.max(du))
        shifted = solve_eps(EpsProblem(ham, eps, c, order, grid, prob.interval), tol, initial=U + 1.0)
        shift = float(np.max(np.abs(shifted.u.values - U)))
        verdict = "certified-unique" if stat > 10 * DU_STEP else "inconclusive"
        return UniquenessProbe(verdict, stat, shift, "max of dH/du along the solution")
    from .mather import MeasureGrid, ordinal_diagnostic

    mg = measure_grid or MeasureGrid.default(ham.dim)
    diag = ordinal_diagnostic(ham, sol.u, mg)
    verdict = "certified-unique" if diag.status == "empty-certified" else "inconclusive"
    return UniquenessProbe(verdict, diag.max_integral, None, f"ordinal diagnostic: {diag.status}")
