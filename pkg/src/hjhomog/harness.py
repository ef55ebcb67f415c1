"""Epsilon sweeps: sup-norm errors against a constant target, rate fits and envelope checks."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import PeriodicGrid
from .effective import ThetaInterval
from .epsolve import EpsProblem, build_envelope, inverse_eps, solve_eps
from .hamiltonian import HamiltonianSpec

logger = logging.getLogger(__name__)

MIN_ROWS = 4
SLOPE_MIN = 0.7
C_SLACK = 1.5


class RateError(ValueError):
    pass


@dataclass(frozen=True)
class RateRow:
    eps: float
    sup_error: float
    lipschitz: float
    iterations: int


def fit_rate(eps, errors) -> tuple[float, float]:
    """Least-squares ``log err = slope * log eps + log C``; returns ``(slope, C)``."""
    eps = np.asarray(eps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(eps) < 2:
        raise RateError("need at least two points for a fit")
    if np.any(errors <= 0):
        raise RateError("errors must be positive for a log-log fit")
    slope, intercept = np.polyfit(np.log(eps), np.log(errors), 1)
    return float(slope), float(math.exp(intercept))


def rate_verdict(eps, errors, slope: float, C: float) -> bool:
    eps = np.asarray(eps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    return bool(slope >= SLOPE_MIN and np.all(errors <= C_SLACK * C * eps))


@dataclass(frozen=True)
class RateReport:
    example: str
    order: str
    c: float
    target: float
    rows: list[RateRow]
    fitted_slope: float
    fitted_C: float
    passed: bool
    grid_points: int = 0
    tol: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["eps", "sup_error", "lipschitz", "iterations"])
        for r in self.rows:
            writer.writerow([repr(float(r.eps)), repr(float(r.sup_error)), repr(float(r.lipschitz)), r.iterations])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "example": self.example,
            "order": self.order,
            "c": self.c,
            "target": self.target,
            "slope": self.fitted_slope,
            "C": self.fitted_C,
            "pass": self.passed,
            "grid_points": self.grid_points,
            "tol": self.tol,
            "rows": len(self.rows),
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2) + "\n"


def report_from_rows(example: str, order: str, c: float, target: float, rows, grid_points: int = 0,
                     tol: float = 0.0) -> RateReport:
    rows = sorted(rows, key=lambda r: -r.eps)
    if len(rows) < MIN_ROWS:
        raise RateError(f"a rate fit needs at least {MIN_ROWS} rows, got {len(rows)}")
    eps = [r.eps for r in rows]
    errs = [r.sup_error for r in rows]
    slope, C = fit_rate(eps, errs)
    return RateReport(example, order, c, target, rows, slope, C, rate_verdict(eps, errs, slope, C), grid_points, tol)


def _check_eps_list(eps_list) -> list[float]:
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < MIN_ROWS:
        raise RateError(f"eps_list needs at least {MIN_ROWS} entries, got {len(eps_list)}")
    for e in eps_list:
        m = inverse_eps(e)
        if m & (m - 1):
            raise RateError(f"eps = {e} is not of the form 1/2^k")
    return sorted(eps_list, reverse=True)


def _run_rows(fn, eps_values, workers: int | None):
    # rows are independent solves; map keeps the input order so assembly stays deterministic
    if workers is None:
        workers = min(len(eps_values), os.cpu_count() or 1)
    if workers <= 1:
        return [fn(e) for e in eps_values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, eps_values))


def rate_sweep(ham: HamiltonianSpec, order: str, c: float, target: float, eps_list, grid: PeriodicGrid,
               tol: float = 1e-6, interval: ThetaInterval | None = None, workers: int | None = None) -> RateReport:
    """Solve for each eps and fit ``sup |u_eps - target| ~ C eps^slope``."""

    def row(eps: float) -> RateRow:
        sol = solve_eps(EpsProblem(ham, eps, c, order, grid, interval), tol)
        return RateRow(eps, sol.sup_deviation(target), sol.lipschitz_estimate, sol.iterations)

    rows = _run_rows(row, _check_eps_list(eps_list), workers)
    return report_from_rows(ham.name, order, c, target, rows, grid.n, tol)


@dataclass(frozen=True)
class EnvelopeRow:
    eps: float
    contained: bool
    lower_deviation: float | None
    upper_deviation: float | None
    u_min: float
    u_max: float
    lipschitz: float


@dataclass(frozen=True)
class EnvelopeReport:
    example: str
    order: str
    c: float
    interval: ThetaInterval
    rows: list[EnvelopeRow]
    C_env: float
    minus_unbounded: bool
    plus_unbounded: bool
    all_contained: bool
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "example": self.example,
            "order": self.order,
            "c": self.c,
            "interval": self.interval.to_dict(),
            "C_env": self.C_env,
            "minus_unbounded": self.minus_unbounded,
            "plus_unbounded": self.plus_unbounded,
            "containment": self.all_contained,
            "rows": [
                {
                    "eps": r.eps,
                    "contained": r.contained,
                    "lower_deviation": r.lower_deviation,
                    "upper_deviation": r.upper_deviation,
                    "u_min": r.u_min,
                    "u_max": r.u_max,
                    "lipschitz": r.lipschitz,
                }
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["eps", "contained", "lower_deviation", "upper_deviation", "u_min", "u_max", "lipschitz"])
        for r in self.rows:
            writer.writerow([
                repr(r.eps),
                int(r.contained),
                "" if r.lower_deviation is None else repr(r.lower_deviation),
                "" if r.upper_deviation is None else repr(r.upper_deviation),
                repr(r.u_min),
                repr(r.u_max),
                repr(r.lipschitz),
            ])
        return buf.getvalue()


def envelope_sweep(ham: HamiltonianSpec, order: str, c: float, interval: ThetaInterval, eps_list,
                   grid: PeriodicGrid, tol: float = 1e-6, workers: int | None = None) -> EnvelopeReport:
    """Check ``lower <= u_eps <= upper`` per eps and fit the envelope deviation ``<= C_env * eps``."""
    if interval.minus_unbounded and interval.plus_unbounded:
        raise RateError("the interval must be finite on at least one side")
    eps_values = sorted((float(e) for e in eps_list), reverse=True)
    for eps in eps_values:
        inverse_eps(eps)

    def row(eps: float) -> EnvelopeRow:
        sol = solve_eps(EpsProblem(ham, eps, c, order, grid, interval), tol)
        env = build_envelope(ham, eps, c, interval, order, grid, tol)
        lo, hi = env.deviation()
        return EnvelopeRow(eps, env.contains(sol.u, 2 * tol), lo, hi, float(sol.u.values.min()),
                           float(sol.u.values.max()), sol.lipschitz_estimate)

    rows = _run_rows(row, eps_values, workers)
    ratios = [max(d for d in (r.lower_deviation, r.upper_deviation) if d is not None) / r.eps for r in rows]
    return EnvelopeReport(
        ham.name,
        order,
        c,
        interval,
        rows,
        float(max(ratios)),
        interval.minus_unbounded,
        interval.plus_unbounded,
        all(r.contained for r in rows),
    )
