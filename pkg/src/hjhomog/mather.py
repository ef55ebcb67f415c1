"""Mather measures as linear programs over discretised holonomic measures.

Unknowns are nonnegative weights on an (x-node, v-node) product grid.  The
holonomic condition is imposed against real Fourier modes up to order ``K``:

    first order:   sum mu <d phi(x), v>              = 0
    second order:  sum mu (<d phi(x), v> + Lap phi(x)) = 0

and the objective is ``sum mu L(x, v, u(x))`` (``L(x, -v, u(x))`` in the
second-order case).  The ergodic value is minus the optimum.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import PeriodicGrid, ScalarField, resample
from .hamiltonian import HamiltonianSpec
from .legendre import LagrangianEval, lagrangian, lagrangian_du
from .simplex import LPError, solve_lp

logger = logging.getLogger(__name__)

PIN_TOL = 1e-8
ORDINAL_FOUND = -1e-6
EMPTY_CERTIFIED = -1e-3
SUPPORT_CUTOFF = 1e-6


class MatherError(RuntimeError):
    pass


@dataclass(frozen=True)
class MeasureGrid:
    x_grid: PeriodicGrid
    v_max: float = 5.0
    mv: int = 33

    def __post_init__(self):
        if not self.v_max > 0:
            raise ValueError("v_max must be positive")
        if self.mv < 3 or self.mv % 2 == 0:
            raise ValueError("mv must be odd and at least 3 so that v = 0 is a node")

    @classmethod
    def default(cls, dim: int = 1) -> "MeasureGrid":
        if dim == 1:
            return cls(PeriodicGrid(1, 32), 5.0, 33)
        return cls(PeriodicGrid(2, 12), 2.0, 9)

    @property
    def dim(self) -> int:
        return self.x_grid.dim

    def v_axis(self) -> np.ndarray:
        return np.linspace(-self.v_max, self.v_max, self.mv)

    def v_nodes(self) -> np.ndarray:
        axes = [self.v_axis()] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def x_nodes(self) -> np.ndarray:
        return self.x_grid.coordinates().reshape(-1, self.dim)

    def default_order(self, order: str) -> int:
        if order == "second":
            # the full grid-resolved basis; a truncated one leaves too few rows for a positive density
            return self.x_grid.n // 2
        return 8 if self.dim == 1 else 4


@dataclass(frozen=True)
class DiscreteMeasure:
    grid: MeasureGrid
    weights: np.ndarray = field(repr=False)  # shape (n_x, n_v)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, table: np.ndarray) -> float:
        return float(np.sum(self.weights * table))

    def x_marginal(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def support(self, cutoff: float = SUPPORT_CUTOFF) -> list[tuple]:
        xs = self.grid.x_nodes()
        vs = self.grid.v_nodes()
        out = []
        for i, j in zip(*np.nonzero(self.weights > cutoff)):
            out.append((tuple(float(t) for t in xs[i]), tuple(float(t) for t in vs[j]), float(self.weights[i, j])))
        return out

    def to_csv(self, cutoff: float = 0.0) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        dim = self.grid.dim
        if dim == 1:
            writer.writerow(["x", "v", "weight"])
        else:
            writer.writerow(["x1", "x2", "v1", "v2", "weight"])
        xs = self.grid.x_nodes()
        vs = self.grid.v_nodes()
        for i, j in zip(*np.nonzero(self.weights > cutoff)):
            writer.writerow([repr(float(t)) for t in (*xs[i], *vs[j], self.weights[i, j])])
        return buf.getvalue()


@dataclass(frozen=True)
class MatherResult:
    measure: DiscreteMeasure
    c_value: float
    order: str
    fourier_order: int
    residual: float
    cost: np.ndarray = field(repr=False)

    @property
    def support(self) -> list[tuple]:
        return self.measure.support()


def fourier_modes(dim: int, K: int) -> list[tuple[int, ...]]:
    """One representative of each pair ``+-k`` with ``0 < |k|_inf <= K``."""
    modes = []
    for k in itertools.product(range(-K, K + 1), repeat=dim):
        first = next((c for c in k if c != 0), 0)
        if first > 0:
            modes.append(k)
    return modes


def holonomic_rows(mg: MeasureGrid, order: str, K: int) -> np.ndarray:
    """Constraint matrix, one row per test function, each scaled to unit max-norm."""
    xs = mg.x_nodes()
    vs = mg.v_nodes()
    rows = []
    for k in fourier_modes(mg.dim, K):
        k = np.asarray(k, dtype=float)
        phase = 2 * np.pi * xs @ k
        kv = 2 * np.pi * vs @ k
        lap = -4 * np.pi**2 * float(k @ k)
        for value, deriv in ((np.cos(phase), -np.sin(phase)), (np.sin(phase), np.cos(phase))):
            row = deriv[:, None] * kv[None, :]
            if order == "second":
                row = row + lap * value[:, None]
            row = row.ravel()
            scale = np.max(np.abs(row))
            if scale > 1e-12:
                rows.append(row / scale)
    return np.array(rows)


def _frozen_values(frozen, mg: MeasureGrid) -> np.ndarray:
    if isinstance(frozen, ScalarField):
        field_ = resample(frozen, mg.x_grid) if frozen.grid != mg.x_grid else frozen
        return field_.flat()
    return np.full(mg.x_grid.size, float(frozen))


def _lagrangian_eval(ham: HamiltonianSpec, mg: MeasureGrid) -> LagrangianEval:
    v_reach = mg.v_max * np.sqrt(mg.dim)
    return LagrangianEval(ham, p_search_radius=max(8.0, v_reach + 3.0), v_max=v_reach)


def cost_table(ham: HamiltonianSpec, frozen, mg: MeasureGrid, order: str) -> np.ndarray:
    le = _lagrangian_eval(ham, mg)
    xs = mg.x_nodes()
    vs = mg.v_nodes()
    u = _frozen_values(frozen, mg)
    sign = -1.0 if order == "second" else 1.0
    return np.asarray(lagrangian(le, xs[:, None, :], sign * vs[None, :, :], u[:, None]))


def du_table(ham: HamiltonianSpec, frozen, mg: MeasureGrid, order: str = "first") -> np.ndarray:
    le = _lagrangian_eval(ham, mg)
    xs = mg.x_nodes()
    vs = mg.v_nodes()
    u = _frozen_values(frozen, mg)
    sign = -1.0 if order == "second" else 1.0
    return np.asarray(lagrangian_du(le, xs[:, None, :], sign * vs[None, :, :], u[:, None]))


def mather_lp(ham: HamiltonianSpec, frozen=0.0, order: str = "first", mg: MeasureGrid | None = None,
              fourier_order: int | None = None) -> MatherResult:
    """Minimise the action over discrete holonomic probability measures."""
    if order not in ("first", "second"):
        raise ValueError("order must be 'first' or 'second'")
    mg = mg or MeasureGrid.default(ham.dim)
    if mg.dim != ham.dim:
        raise ValueError("measure grid and Hamiltonian dimensions differ")
    K = mg.default_order(order) if fourier_order is None else int(fourier_order)
    if K < 1:
        raise ValueError("fourier_order must be at least 1")
    cost = cost_table(ham, frozen, mg, order)
    A = holonomic_rows(mg, order, K)
    A_eq = np.vstack([np.ones((1, cost.size)), A])
    b_eq = np.zeros(len(A_eq))
    b_eq[0] = 1.0
    try:
        res = solve_lp(cost.ravel(), A_eq, b_eq, upper=np.ones(cost.size))
    except LPError as exc:
        raise MatherError(f"Mather LP failed: {exc}") from exc
    weights = res.x.reshape(cost.shape)
    measure = DiscreteMeasure(mg, weights)
    residual = float(np.max(np.abs(A_eq @ res.x - b_eq)))
    return MatherResult(measure, -res.objective, order, K, residual, cost)


@dataclass(frozen=True)
class OrdinalDiagnostic:
    status: str  # "ordinal-found" | "empty-certified" | "inconclusive"
    max_integral: float
    c_value: float
    measure: DiscreteMeasure | None = None


def ordinal_diagnostic(ham: HamiltonianSpec, frozen=0.0, mg: MeasureGrid | None = None,
                       fourier_order: int | None = None, result: MatherResult | None = None,
                       order: str = "first") -> OrdinalDiagnostic:
    """Look for a Mather measure with ``int dL/du dmu = 0``.

    Phase 1 is :func:`mather_lp`.  Phase 2 maximises ``int dL/du`` over the
    measures whose action is within ``1e-8`` of the optimum.
    """
    if order != "first":
        raise ValueError("the ordinal diagnostic is defined for first-order problems")
    mg = mg or MeasureGrid.default(ham.dim)
    result = result or mather_lp(ham, frozen, "first", mg, fourier_order)
    K = result.fourier_order
    cost = result.cost.ravel()
    du = du_table(ham, frozen, mg).ravel()
    A = holonomic_rows(mg, "first", K)
    n = cost.size
    # columns: weights, then one slack for the pinned action
    A_eq = np.zeros((2 + len(A), n + 1))
    A_eq[0, :n] = 1.0
    A_eq[1, :n] = cost
    A_eq[1, n] = 1.0
    A_eq[2:, :n] = A
    b_eq = np.zeros(len(A_eq))
    b_eq[0] = 1.0
    b_eq[1] = -result.c_value + PIN_TOL
    upper = np.concatenate([np.ones(n), [np.inf]])
    try:
        res = solve_lp(np.concatenate([-du, [0.0]]), A_eq, b_eq, upper=upper)
    except LPError as exc:
        raise MatherError(f"ordinal LP failed: {exc}") from exc
    best = -res.objective
    measure = DiscreteMeasure(mg, res.x[:n].reshape(result.cost.shape))
    if best >= ORDINAL_FOUND:
        status = "ordinal-found"
    elif best <= EMPTY_CERTIFIED:
        status = "empty-certified"
    else:
        status = "inconclusive"
    return OrdinalDiagnostic(status, best, result.c_value, measure if status == "ordinal-found" else None)


@dataclass(frozen=True)
class MarginalTable:
    x: np.ndarray
    weight: np.ndarray
    positivity_fraction: float
    threshold: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "weight"] if self.x.shape[1] == 1 else ["x1", "x2", "weight"])
        for xi, w in zip(self.x, self.weight):
            writer.writerow([repr(float(t)) for t in (*xi, w)])
        return buf.getvalue()


def measure_pushforward_density(result: MatherResult, threshold: float = 1e-8) -> MarginalTable:
    """x-marginal of a second-order Mather measure and the fraction of nodes above ``threshold``."""
    if result.order != "second":
        raise ValueError("the x-marginal density is reported for second-order measures only")
    marginal = result.measure.x_marginal()
    frac = float(np.mean(marginal > threshold))
    return MarginalTable(result.measure.grid.x_nodes(), marginal, frac, threshold)
