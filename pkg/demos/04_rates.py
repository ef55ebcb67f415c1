"""Convergence rate O(eps) for MONOTONE and envelope shrinkage for EX32."""

from hjhomog.cellsolve import CellProblem, solve_cell
from hjhomog.core import PeriodicGrid
from hjhomog.effective import ThetaInterval
from hjhomog.hamiltonian import builtin
from hjhomog.harness import envelope_sweep, rate_sweep

grid = PeriodicGrid(1, 256)
eps_list = [1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64]

# second order: hbar(0, theta) = theta + hbar_pendulum, so the limit is the constant -hbar_pendulum
viscous = solve_cell(CellProblem(builtin("MONOTONE"), (0.0,), 0.0, "second", "discounted"), grid).hbar
for order, target in (("first", 0.0), ("second", -viscous)):
    rep = rate_sweep(builtin("MONOTONE"), order, 0.0, target, eps_list, grid)
    print(f"MONOTONE {order}: target {target:.5f}, slope {rep.fitted_slope:.3f}, C {rep.fitted_C:.4f}, "
          f"pass {rep.passed}")
    print(rep.to_csv())

rep = envelope_sweep(builtin("EX32"), "first", 0.0, ThetaInterval(0.0, -10.0, 10.0, False), eps_list, grid)
print(f"EX32 envelopes: contained at every eps: {rep.all_contained}, C_env = {rep.C_env:.4f}")
print(rep.to_csv())
