import math

import numpy as np
import pytest

from hjhomog.core import PeriodicGrid
from hjhomog.effective import (
    CurveError,
    OutOfRangeError,
    ThetaInterval,
    level_set,
    sample_curve,
    singleton_certificate,
)
from hjhomog.hamiltonian import HamiltonianSpec, builtin


def f32(t):
    t = np.asarray(t, dtype=float)
    return np.where(t > 10, (t - 10) ** 2, np.where(t < -10, -((t + 10) ** 2), 0.0))


@pytest.fixture(scope="module")
def grid():
    return PeriodicGrid(1, 256)


@pytest.fixture(scope="module")
def ex32_curve(grid):
    return sample_curve(builtin("EX32"), "first", (-14.0, 14.0), 57, grid)


@pytest.fixture(scope="module")
def monotone_curve(grid):
    return sample_curve(builtin("MONOTONE"), "first", (-2.0, 2.0), 17, grid)


@pytest.fixture(scope="module")
def ex31n_curve(grid):
    return sample_curve(builtin("EX31N"), "first", (-5.0, 5.0), 21, grid)


def _monotone(curve):
    return bool(np.all(np.diff(curve.hbars) >= -2 * curve.tol))


def test_ex31n_curve_is_flat(ex31n_curve):
    assert np.max(np.abs(ex31n_curve.hbars)) <= 1e-3
    assert _monotone(ex31n_curve)


def test_ex32_curve_follows_f(ex32_curve):
    assert np.max(np.abs(ex32_curve.hbars - f32(ex32_curve.thetas))) <= 5e-3
    assert ex32_curve.solve_at(12.0) == pytest.approx(4.0, abs=5e-3)
    assert _monotone(ex32_curve)


def test_monotone_curve_is_identity(monotone_curve):
    assert np.max(np.abs(monotone_curve.hbars - monotone_curve.thetas)) <= 5e-3
    assert _monotone(monotone_curve)


def test_additive_split(ex32_curve):
    base = ex32_curve.solve_at(0.0)
    split = ex32_curve.hbars - base - (f32(ex32_curve.thetas) - f32(0.0))
    assert np.max(np.abs(split)) <= 2 * ex32_curve.tol


def test_ex32_level_set_is_the_plateau(ex32_curve):
    iv = level_set(ex32_curve, 0.0)
    assert abs(iv.theta_minus + 10) <= 0.05 and abs(iv.theta_plus - 10) <= 0.05
    assert not iv.singleton and not iv.minus_unbounded and not iv.plus_unbounded


@pytest.mark.parametrize("c", [-1.0, 0.0, 0.5])
def test_monotone_level_sets_are_points(monotone_curve, c):
    iv = level_set(monotone_curve, c)
    assert iv.singleton
    assert abs(iv.theta_minus - c) <= 0.05 and abs(iv.theta_plus - c) <= 0.05


def test_ex31n_level_set_unbounded(ex31n_curve):
    iv = level_set(ex31n_curve, 0.0)
    assert iv.minus_unbounded and iv.plus_unbounded and not iv.singleton
    assert iv.to_dict()["theta_minus"] is None


def test_out_of_range_level(monotone_curve):
    with pytest.raises(OutOfRangeError):
        level_set(monotone_curve, 5.0)


@pytest.mark.parametrize("k", [0, 5, 28, 40, 56])
def test_level_set_contains_its_samples(ex32_curve, k):
    iv = level_set(ex32_curve, float(ex32_curve.hbars[k]))
    theta = ex32_curve.thetas[k]
    lo = -math.inf if iv.minus_unbounded else iv.theta_minus
    hi = math.inf if iv.plus_unbounded else iv.theta_plus
    assert lo - 1e-9 <= theta <= hi + 1e-9


def test_second_order_level_set_against_eigenvalue(grid):
    # MONOTONE = PENDULUM + u, so I(0) = {-lambda} with lambda the viscous pendulum value
    n = 256
    h = 1.0 / n
    x = np.arange(n) * h
    A = np.diag(np.cos(2 * np.pi * x) - 1 - 4 / h**2)
    for i in range(n):
        A[i, (i + 1) % n] += 2 / h**2
        A[i, (i - 1) % n] += 2 / h**2
    lam = np.linalg.eigvalsh(A)[-1]
    curve = sample_curve(builtin("MONOTONE"), "second", (0.0, 2.0), 9, grid)
    assert _monotone(curve)
    iv = level_set(curve, 0.0)
    assert iv.singleton and abs(iv.midpoint + lam) <= 0.05


def test_curve_csv(monotone_curve):
    lines = monotone_curve.to_csv().splitlines()
    assert lines[0] == "theta,hbar,residual" and len(lines) == 18


def test_sample_curve_preconditions(grid):
    with pytest.raises(ValueError):
        sample_curve(builtin("MONOTONE"), "first", (1.0, 0.0), 9, grid)
    with pytest.raises(ValueError):
        sample_curve(builtin("MONOTONE"), "first", (0.0, 1.0), 5, grid)


def test_decreasing_curve_is_a_breakdown(grid):
    ham = HamiltonianSpec.from_expression("0.5*p1^2 + cos(2*pi*x1) - 1 - u", 1, monotone_u=False)
    with pytest.raises(CurveError):
        sample_curve(ham, "first", (-1.0, 1.0), 9, PeriodicGrid(1, 64))


def test_certificate_second_order(grid):
    cert = singleton_certificate(builtin("MONOTONE"), "second", 0.5, grid)
    assert cert.verdict == "certified-singleton" and cert.statistic == pytest.approx(1.0, abs=1e-6)
    assert singleton_certificate(builtin("EX32"), "second", 0.0, grid).verdict == "inconclusive"


def test_certificate_first_order(grid):
    assert singleton_certificate(builtin("EX31N"), "first", 0.0, grid).verdict == "inconclusive"
    iv = ThetaInterval(0.5, 0.49, 0.51, True)
    assert singleton_certificate(builtin("MONOTONE"), "first", iv, grid).verdict == "certified-singleton"


def test_interval_invariants():
    with pytest.raises(ValueError):
        ThetaInterval(0.0, 1.0, -1.0, False)
    assert ThetaInterval(0.0, -math.inf, 2.0, False, minus_unbounded=True).midpoint == 2.0
