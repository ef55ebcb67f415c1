"""Mather measures from the occupation-measure LP and the ordinal diagnostic.

The LP value matches the PDE ergodic constant.  An ordinal measure (one
with zero integral of dL/du) exists exactly in the examples whose level
set is not a point.
"""

from hjhomog.cellsolve import CellProblem, solve_cell
from hjhomog.core import PeriodicGrid
from hjhomog.hamiltonian import builtin
from hjhomog.mather import mather_lp, measure_pushforward_density, ordinal_diagnostic

grid = PeriodicGrid(1, 256)

for name, order in (("FREE", "first"), ("PENDULUM", "first"), ("PENDULUM1", "second")):
    res = mather_lp(builtin(name), 0.0, order)
    pde = solve_cell(CellProblem(builtin(name), (0.0,), 0.0, order, "discounted"), grid).hbar
    heavy = max(res.support, key=lambda s: s[2])
    print(f"{name:9s} {order:6s} LP = {res.c_value: .5f}  PDE = {pde: .5f}  "
          f"heaviest atom x = {heavy[0][0]:.3f}, v = {heavy[1][0]:.3f}, weight {heavy[2]:.3f}")

table = measure_pushforward_density(mather_lp(builtin("PENDULUM1"), 0.0, "second"))
print(f"\nviscous pendulum: x-marginal positive on {100 * table.positivity_fraction:.0f}% of the nodes")

print()
for name in ("MONOTONE", "EX31N", "EX32"):
    diag = ordinal_diagnostic(builtin(name), 0.0)
    print(f"{name:9s} ordinal diagnostic: {diag.status:16s} max integral of dL/du = {diag.max_integral:.3e}")
