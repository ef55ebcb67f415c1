import numpy as np
import pytest
from scipy.optimize import linprog

from hjhomog.cellsolve import CellProblem, hopf_cole_eigenvalue, solve_cell
from hjhomog.core import PeriodicGrid
from hjhomog.hamiltonian import builtin
from hjhomog.mather import (
    MeasureGrid,
    cost_table,
    du_table,
    holonomic_rows,
    mather_lp,
    measure_pushforward_density,
    ordinal_diagnostic,
)

MG = MeasureGrid.default(1)


def _constraints(res):
    mg = res.measure.grid
    A = holonomic_rows(mg, res.order, res.fourier_order)
    return A @ res.measure.weights.ravel()


def test_default_grid_shape():
    assert MG.x_grid.n == 32 and MG.mv == 33 and MG.v_max == 5.0
    assert MG.default_order("first") == 8
    with pytest.raises(ValueError):
        MeasureGrid(PeriodicGrid(1, 32), 5.0, 32)


def test_free_first_order():
    res = mather_lp(builtin("FREE"), 0.0, "first")
    assert res.c_value == pytest.approx(0.0, abs=1e-12)
    assert all(abs(v[0]) < 1e-12 for _, v, _ in res.support)


def test_pendulum_first_order_against_grid_minimum():
    res = mather_lp(builtin("PENDULUM"), 0.0, "first")
    x = MG.x_nodes()[:, 0]
    v = MG.v_axis()
    grid_min = np.min(0.5 * v[None, :] ** 2 + 1 - np.cos(2 * np.pi * x[:, None]))
    # a point mass at (0, 0) is holonomic, so the LP optimum is the grid minimum
    assert res.c_value == pytest.approx(-grid_min, abs=1e-2)
    support = res.support
    assert sum(w for _, _, w in support) == pytest.approx(1.0)
    for xs, vs, w in support:
        if w > 1e-3:
            assert min(xs[0], 1 - xs[0]) < 0.1 and abs(vs[0]) < 0.5


def test_viscous_pendulum_against_pde_and_eigenvalue():
    grid = PeriodicGrid(1, 256)
    res = mather_lp(builtin("PENDULUM1"), 0.0, "second")
    pde = solve_cell(CellProblem(builtin("PENDULUM1"), (0.0,), 0.0, "second", "discounted"), grid).hbar
    eig = hopf_cole_eigenvalue(builtin("PENDULUM1"), 0.0, grid)[0]
    assert abs(res.c_value - pde) <= 3e-2
    assert abs(res.c_value - eig) <= 3e-2


DUALITY = [("FREE", 0.0), ("FREE_U", 1.0), ("PENDULUM", 0.0), ("PENDULUM1", 0.0), ("MONOTONE", 0.0),
           ("MONOTONE", -0.5), ("EX31N", 0.0), ("EX32", 0.0), ("EX32", 12.0)]


@pytest.mark.parametrize("order", ["first", "second"])
@pytest.mark.parametrize("name, theta", DUALITY)
def test_lp_pde_duality(name, theta, order):
    ham = builtin(name)
    res = mather_lp(ham, theta, order)
    hbar = solve_cell(CellProblem(ham, (0.0,), theta, order, "discounted"), PeriodicGrid(1, 256)).hbar
    assert abs(res.c_value - hbar) <= 3e-2
    assert res.measure.mass == pytest.approx(1.0, abs=1e-9)
    assert np.max(np.abs(_constraints(res))) <= 1e-8
    # sign property of dL/du on the returned measure
    assert res.measure.integrate(du_table(ham, theta, MG, order)) <= 1e-6


@pytest.mark.parametrize("order", ["first", "second"])
def test_simplex_matches_reference_on_the_holonomic_lp(order):
    ham = builtin("EX31N")
    res = mather_lp(ham, 0.3, order)
    cost = cost_table(ham, 0.3, MG, order).ravel()
    A = np.vstack([np.ones((1, cost.size)), holonomic_rows(MG, order, res.fourier_order)])
    b = np.zeros(len(A))
    b[0] = 1.0
    ref = linprog(cost, A_eq=A, b_eq=b, bounds=(0, 1), method="highs")
    assert -ref.fun == pytest.approx(res.c_value, abs=1e-9)


@pytest.mark.parametrize("name, theta", [("PENDULUM", 0.0), ("MONOTONE", 0.0), ("EX32", 12.0), ("EX31N", 0.0)])
def test_doubling_vmax_barely_moves_the_value(name, theta):
    small = mather_lp(builtin(name), theta, "first", MeasureGrid(PeriodicGrid(1, 32), 2.5, 17))
    large = mather_lp(builtin(name), theta, "first", MeasureGrid(PeriodicGrid(1, 32), 5.0, 33))
    assert abs(small.c_value - large.c_value) <= 1e-3


def test_more_test_functions_only_tighten():
    ham = builtin("EX31N")
    values = [mather_lp(ham, 0.0, "first", MG, K).c_value for K in (1, 2, 4, 8)]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


def test_ordinal_monotone_is_empty():
    d = ordinal_diagnostic(builtin("MONOTONE"), 0.0)
    assert d.status == "empty-certified" and d.max_integral == pytest.approx(-1.0, abs=1e-6)


def test_ordinal_ex31n_found_at_the_well():
    d = ordinal_diagnostic(builtin("EX31N"), 0.0)
    assert d.status == "ordinal-found"
    # the witness sits where dH/du = (1 - cos 2 pi x) / (4 pi (1 + u^2)) vanishes
    for xs, vs, w in d.measure.support():
        if w > 1e-3:
            assert min(xs[0], 1 - xs[0]) < 0.1


def test_ordinal_ex32():
    assert ordinal_diagnostic(builtin("EX32"), 0.0).status == "ordinal-found"
    assert ordinal_diagnostic(builtin("EX32"), 11.0).status == "empty-certified"


def test_ordinal_is_first_order_only():
    with pytest.raises(ValueError):
        ordinal_diagnostic(builtin("EX32"), 0.0, order="second")


def test_free_second_order_marginal_is_uniform():
    table = measure_pushforward_density(mather_lp(builtin("FREE"), 0.0, "second"))
    assert np.max(np.abs(table.weight - 1 / 32)) <= 1e-3


def test_viscous_pendulum_marginal_is_positive():
    res = mather_lp(builtin("PENDULUM1"), 0.0, "second")
    table = measure_pushforward_density(res, threshold=1e-8)
    assert table.positivity_fraction == 1.0
    # compare the shape with the squared ground state of the Hopf-Cole operator
    lam, w, _ = hopf_cole_eigenvalue(builtin("PENDULUM1"), 0.0, PeriodicGrid(1, 32))
    density = w**2 / np.sum(w**2)
    assert np.corrcoef(density, table.weight)[0, 1] > 0.9


def test_density_rejects_first_order():
    with pytest.raises(ValueError):
        measure_pushforward_density(mather_lp(builtin("FREE"), 0.0, "first"))


def test_frozen_field_input():
    from hjhomog.core import ScalarField

    field = ScalarField.constant(PeriodicGrid(1, 64), 0.25)
    a = mather_lp(builtin("MONOTONE"), field, "first")
    b = mather_lp(builtin("MONOTONE"), 0.25, "first")
    assert a.c_value == pytest.approx(b.c_value, abs=1e-10)


def test_csv_header():
    res = mather_lp(builtin("PENDULUM"), 0.0, "first")
    assert res.measure.to_csv().splitlines()[0] == "x,v,weight"


@pytest.mark.slow
@pytest.mark.parametrize("order", ["first", "second"])
def test_two_dimensional_duality(order):
    ham = builtin("PENDULUM1", 2)
    res = mather_lp(ham, 0.0, order)
    hbar = solve_cell(CellProblem(ham, (0.0, 0.0), 0.0, order, "discounted"), PeriodicGrid(2, 64)).hbar
    assert abs(res.c_value - hbar) <= 3e-2
