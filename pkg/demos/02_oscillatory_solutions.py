"""Solutions u_eps of the oscillatory problem, their envelopes and uniqueness probes.

For MONOTONE the solution is unique and tends to the constant 0 at rate eps.
For EX32 at c = 0 every constant in [-10, 10] solves the limit problem; the
vanishing-discount selection lands somewhere inside the envelope bracket.
"""

from hjhomog.core import PeriodicGrid
from hjhomog.effective import ThetaInterval
from hjhomog.epsolve import EpsProblem, build_envelope, solve_eps, uniqueness_probe
from hjhomog.hamiltonian import builtin

grid = PeriodicGrid(1, 256)

print("MONOTONE, c = 0")
for eps in (1 / 4, 1 / 16, 1 / 64):
    sol = solve_eps(EpsProblem(builtin("MONOTONE"), eps, 0.0, "first", grid))
    probe = uniqueness_probe(sol)
    print(f"  eps = 1/{round(1 / eps):<3d} sup|u_eps| = {sol.sup_deviation(0.0):.5f}  "
          f"Lip = {sol.lipschitz_estimate:.3f}  probe: {probe.verdict}")

plateau = ThetaInterval(0.0, -10.0, 10.0, False)
print("\nEX32, c = 0, I(0) = [-10, 10]")
for eps in (1 / 8, 1 / 32):
    sol = solve_eps(EpsProblem(builtin("EX32"), eps, 0.0, "first", grid, plateau))
    env = build_envelope(builtin("EX32"), eps, 0.0, plateau, "first", grid)
    lo, hi = env.deviation()
    print(f"  eps = 1/{round(1 / eps):<3d} u in [{sol.u.values.min():.4f}, {sol.u.values.max():.4f}]  "
          f"inside envelope: {env.contains(sol.u, 2e-6)}  envelope deviations {lo:.4f}, {hi:.4f}  "
          f"sweep settled: {sol.settled}")
    print(f"    probe: {uniqueness_probe(sol).verdict}")
