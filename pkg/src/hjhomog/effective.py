"""The curve ``theta -> Hbar(0, theta)``, its level sets ``I(c)`` and singleton checks."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass

import numpy as np

from .cellsolve import CellProblem, solve_cell
from .core import PeriodicGrid, one_sided_differences
from .hamiltonian import HamiltonianSpec

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 0.05
# tolerance on hbar when deciding membership of a level set; above the O(h^2) bias at N = 256
DEFAULT_LEVEL_TOL = 1e-3
DU_STEP = 1e-6


class CurveError(RuntimeError):
    pass


class OutOfRangeError(ValueError):
    """The requested level is not attained on the sampled range."""


@dataclass(frozen=True)
class EffectiveCurve:
    hamiltonian: HamiltonianSpec
    order: str
    thetas: np.ndarray
    hbars: np.ndarray
    residuals: np.ndarray
    grid: PeriodicGrid
    tol: float
    method: str = "discounted"

    def __len__(self) -> int:
        return len(self.thetas)

    def value_range(self) -> tuple[float, float]:
        return float(np.min(self.hbars)), float(np.max(self.hbars))

    def solve_at(self, theta: float) -> float:
        prob = CellProblem(self.hamiltonian, p=(0.0,) * self.hamiltonian.dim, theta=theta,
                           order=self.order, method=self.method)
        return solve_cell(prob, self.grid, self.tol).hbar

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["theta", "hbar", "residual"])
        for row in zip(self.thetas, self.hbars, self.residuals):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


@dataclass(frozen=True)
class ThetaInterval:
    c: float
    theta_minus: float
    theta_plus: float
    singleton: bool
    minus_unbounded: bool = False
    plus_unbounded: bool = False

    def __post_init__(self):
        if not (self.minus_unbounded or self.plus_unbounded) and self.theta_minus > self.theta_plus:
            raise ValueError("theta_minus exceeds theta_plus")

    @property
    def midpoint(self) -> float:
        if self.minus_unbounded or self.plus_unbounded:
            finite = [t for t, flag in ((self.theta_minus, self.minus_unbounded),
                                        (self.theta_plus, self.plus_unbounded)) if not flag]
            return finite[0] if finite else 0.0
        return 0.5 * (self.theta_minus + self.theta_plus)

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "theta_minus": None if self.minus_unbounded else self.theta_minus,
            "theta_plus": None if self.plus_unbounded else self.theta_plus,
            "minus_unbounded": self.minus_unbounded,
            "plus_unbounded": self.plus_unbounded,
            "singleton": self.singleton,
        }


def sample_curve(ham: HamiltonianSpec, order: str, theta_range, count: int, grid: PeriodicGrid,
                 tol: float = 1e-6, method: str = "discounted") -> EffectiveCurve:
    """``Hbar(0, theta_j)`` on ``count`` uniform points; raises if the samples decrease beyond ``2*tol``."""
    a, b = (float(t) for t in theta_range)
    if not a < b:
        raise ValueError("theta_range must satisfy a < b")
    if count < 9:
        raise ValueError("count must be at least 9")
    thetas = np.linspace(a, b, count)
    hbars = np.empty(count)
    residuals = np.empty(count)
    for j, theta in enumerate(thetas):
        prob = CellProblem(ham, p=(0.0,) * ham.dim, theta=float(theta), order=order, method=method)
        sol = solve_cell(prob, grid, tol)
        hbars[j] = sol.hbar
        residuals[j] = sol.residual_sup
    drops = hbars[:-1] - hbars[1:]
    if np.any(drops > 2 * tol):
        j = int(np.argmax(drops))
        raise CurveError(
            f"effective curve decreases between theta={thetas[j]:.4g} and {thetas[j + 1]:.4g} "
            f"({hbars[j]:.6g} -> {hbars[j + 1]:.6g}); solver breakdown"
        )
    return EffectiveCurve(ham, order, thetas, hbars, residuals, grid, tol, method)


def _bisect(curve: EffectiveCurve, lo: float, hi: float, inside, width: float) -> float:
    """Shrink ``[lo, hi]`` with ``inside(lo) != inside(hi)`` to ``width``; returns the midpoint."""
    in_lo = inside(curve.solve_at(lo))
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if inside(curve.solve_at(mid)) == in_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def level_set(curve: EffectiveCurve, c: float, resolution: float = DEFAULT_RESOLUTION,
              level_tol: float = DEFAULT_LEVEL_TOL) -> ThetaInterval:
    """``I(c)`` on the sampled range, endpoints refined to ``resolution / 4`` by fresh cell solves.

    ``theta_minus`` is the smallest theta with ``hbar >= c - level_tol`` and
    ``theta_plus`` the largest with ``hbar <= c + level_tol``.  An endpoint at
    the edge of the sampled range is reported as unbounded.
    """
    lo_val, hi_val = curve.value_range()
    if c < lo_val - level_tol or c > hi_val + level_tol:
        raise OutOfRangeError(f"c = {c} lies outside the sampled values [{lo_val:.6g}, {hi_val:.6g}]")
    thetas, hbars = curve.thetas, curve.hbars
    width = resolution / 4

    above = hbars >= c - level_tol
    j = int(np.argmax(above))
    if j == 0:
        theta_minus, minus_inf = -math.inf, True
    else:
        theta_minus = _bisect(curve, thetas[j - 1], thetas[j], lambda h: h >= c - level_tol, width)
        minus_inf = False

    below = hbars <= c + level_tol
    k = len(thetas) - 1 - int(np.argmax(below[::-1]))
    if k == len(thetas) - 1:
        theta_plus, plus_inf = math.inf, True
    else:
        theta_plus = _bisect(curve, thetas[k], thetas[k + 1], lambda h: h <= c + level_tol, width)
        plus_inf = False

    if not (minus_inf or plus_inf) and theta_minus > theta_plus:
        # a steep curve can put both endpoints inside one bracket
        theta_minus = theta_plus = 0.5 * (theta_minus + theta_plus)
    singleton = bool(not (minus_inf or plus_inf) and theta_plus - theta_minus <= resolution)
    return ThetaInterval(float(c), float(theta_minus), float(theta_plus), singleton, minus_inf, plus_inf)


@dataclass(frozen=True)
class SingletonCertificate:
    verdict: str  # "certified-singleton" or "inconclusive"
    theta: float
    statistic: float
    detail: str = ""


def singleton_certificate(ham: HamiltonianSpec, order: str, interval: ThetaInterval | float,
                          grid: PeriodicGrid, tol: float = 1e-6, measure_grid=None) -> SingletonCertificate:
    """Sufficient check that ``I(c)`` is a single point.

    Second order: ``max_x dH/du(x, Dw_theta, theta) > 0`` along the corrector.
    First order: no ordinal Mather measure at ``theta`` (LP diagnostic).
    """
    theta = interval.midpoint if isinstance(interval, ThetaInterval) else float(interval)
    if order == "second":
        prob = CellProblem(ham, p=(0.0,) * ham.dim, theta=theta, order="second", method="discounted")
        sol = solve_cell(prob, grid, tol)
        pm, pp = one_sided_differences(sol.corrector.values, grid.spacing)
        grad = 0.5 * (pm + pp)
        du = ham.du(grid.coordinates(), grad, theta, step=DU_STEP)
        stat = float(np.max(du))
        verdict = "certified-singleton" if stat > 10 * DU_STEP else "inconclusive"
        return SingletonCertificate(verdict, theta, stat, "max of dH/du along the corrector gradient")
    from .mather import MeasureGrid, ordinal_diagnostic

    mg = measure_grid or MeasureGrid.default(ham.dim)
    diag = ordinal_diagnostic(ham, theta, mg)
    verdict = "certified-singleton" if diag.status == "empty-certified" else "inconclusive"
    return SingletonCertificate(verdict, theta, diag.max_integral, f"ordinal diagnostic: {diag.status}")
