import numpy as np
import pytest

from hjhomog.cellsolve import CellProblem, solve_cell
from hjhomog.core import PeriodicGrid
from hjhomog.effective import ThetaInterval
from hjhomog.epsolve import (
    EpsProblem,
    StagnationError,
    build_envelope,
    inverse_eps,
    solve_eps,
    uniqueness_probe,
)
from hjhomog.hamiltonian import builtin

EX32_PLATEAU = ThetaInterval(0.0, -10.0, 10.0, False)
EPS_LADDER = [1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64]


@pytest.fixture(scope="module")
def grid():
    return PeriodicGrid(1, 256)


@pytest.fixture(scope="module")
def w0_norm(grid):
    cell = solve_cell(CellProblem(builtin("MONOTONE"), theta=0.0, method="discounted"), grid)
    return float(np.max(np.abs(cell.corrector.values)))


def test_free_u_is_zero(grid):
    for eps in (1 / 4, 1 / 32):
        sol = solve_eps(EpsProblem(builtin("FREE_U"), eps, 0.0, "first", grid))
        assert sol.sup_deviation(0.0) <= 1e-6 and sol.settled


def test_monotone_error_within_corrector_bound(grid, w0_norm):
    eps = 1 / 16
    sol = solve_eps(EpsProblem(builtin("MONOTONE"), eps, 0.0, "first", grid))
    assert sol.settled and sol.residual_sup <= 1e-6
    assert sol.sup_deviation(0.0) <= (2 * w0_norm + 0.05) * eps


def test_monotone_trace_decreases(grid):
    for order in ("first", "second"):
        sol = solve_eps(EpsProblem(builtin("MONOTONE"), 1 / 8, 0.0, order, grid))
        changes = [ch for _, ch in sol.lambda_trace[1:]]
        assert all(b <= a * (1 + 1e-9) for a, b in zip(changes, changes[1:]))


def test_ex32_inside_envelope(grid):
    sol = solve_eps(EpsProblem(builtin("EX32"), 1 / 16, 0.0, "first", grid, EX32_PLATEAU))
    env = build_envelope(builtin("EX32"), 1 / 16, 0.0, EX32_PLATEAU, "first", grid)
    assert env.contains(sol.u, 2e-6)
    assert -10 <= sol.u.values.min() and sol.u.values.max() <= 10


def test_ex32_plateau_sweep_is_flagged(grid):
    with pytest.raises(StagnationError) as info:
        solve_eps(EpsProblem(builtin("EX32"), 1 / 16, 0.0, "first", grid, EX32_PLATEAU), strict=True)
    assert len(info.value.trace) == 4


def test_monotone_envelope_near_zero(grid, w0_norm):
    eps = 1 / 8
    env = build_envelope(builtin("MONOTONE"), eps, 0.0, ThetaInterval(0.0, 0.0, 0.0, True), "first", grid)
    lo, hi = env.deviation()
    assert lo <= 3 * eps * w0_norm and hi <= 3 * eps * w0_norm
    assert np.all(env.lower.values <= env.upper.values)
    assert env.lower_residual <= 2e-3 and env.upper_residual >= -2e-3


def test_ex32_envelope_endpoints(grid):
    # at theta = +-10 the EX32 corrector is the pendulum one
    w = solve_cell(CellProblem(builtin("PENDULUM"), method="discounted"), grid).corrector.values
    bound = 2 * float(np.max(np.abs(w)))
    devs = []
    for eps in (1 / 8, 1 / 16):
        env = build_envelope(builtin("EX32"), eps, 0.0, EX32_PLATEAU, "first", grid)
        lo, hi = env.deviation()
        assert env.theta_minus == -10.0 and env.theta_plus == 10.0
        assert lo <= bound * eps + 1e-6 and hi <= bound * eps + 1e-6
        devs.append(hi)
    assert devs[1] == pytest.approx(devs[0] / 2, rel=1e-3)


def test_envelope_unbounded_side(grid):
    iv = ThetaInterval(0.0, -10.0, np.inf, False, plus_unbounded=True)
    env = build_envelope(builtin("EX32"), 1 / 8, 0.0, iv, "first", grid)
    assert env.plus_unbounded and env.upper is None and not env.minus_unbounded
    assert env.to_csv().splitlines()[0] == "x,lower"


@pytest.mark.parametrize("order", ["first", "second"])
def test_monotone_certified_unique(grid, order):
    sol = solve_eps(EpsProblem(builtin("MONOTONE"), 1 / 8, 0.0, order, grid))
    probe = uniqueness_probe(sol)
    assert probe.verdict == "certified-unique"
    if order == "second":
        assert probe.statistic == pytest.approx(1.0, abs=1e-6)
        assert probe.shift_residual <= 1e-5


def test_ex32_probe_inconclusive(grid):
    sol = solve_eps(EpsProblem(builtin("EX32"), 1 / 8, 0.0, "first", grid, EX32_PLATEAU))
    assert uniqueness_probe(sol).verdict == "inconclusive"


def test_free_u_certified(grid):
    sol = solve_eps(EpsProblem(builtin("FREE_U"), 1 / 8, 0.0, "first", grid))
    assert uniqueness_probe(sol).verdict == "certified-unique"


@pytest.mark.parametrize(
    "name,order,interval",
    [("MONOTONE", "first", None), ("MONOTONE", "second", None), ("EX32", "first", EX32_PLATEAU)],
)
def test_lipschitz_is_eps_uniform(grid, name, order, interval):
    lips = [solve_eps(EpsProblem(builtin(name), e, 0.0, order, grid, interval)).lipschitz_estimate
            for e in EPS_LADDER]
    assert np.all(np.isfinite(lips))
    assert max(lips) <= 1.2 * min(lips)


def test_containment_across_eps(grid):
    for eps in (1 / 4, 1 / 32):
        sol = solve_eps(EpsProblem(builtin("EX32"), eps, 0.0, "first", grid, EX32_PLATEAU))
        env = build_envelope(builtin("EX32"), eps, 0.0, EX32_PLATEAU, "first", grid)
        assert env.contains(sol.u, 2e-6)


def test_solution_csv_tiles_cells(grid):
    sol = solve_eps(EpsProblem(builtin("MONOTONE"), 1 / 4, 0.0, "first", PeriodicGrid(1, 32)))
    lines = sol.to_csv().splitlines()
    assert lines[0] == "x,u" and len(lines) == 1 + 4 * 32


def test_inverse_eps():
    assert inverse_eps(0.125) == 8
    for bad in (0.0, 1.5, 0.3, -0.25):
        with pytest.raises(ValueError):
            inverse_eps(bad)


def test_problem_preconditions(grid):
    with pytest.raises(ValueError):
        EpsProblem(builtin("MONOTONE"), 1 / 8, 0.0, "third", grid)
    with pytest.raises(ValueError):
        EpsProblem(builtin("MONOTONE"), 1 / 8, 0.0, "first", PeriodicGrid(1, 16))
    with pytest.raises(ValueError):
        EpsProblem(builtin("PENDULUM_2D"), 1 / 8, 0.0, "first", grid)
