"""Effective curves theta -> hbar(0, theta) and the level sets I(c).

Three built-ins behave very differently:
  EX31N     the curve is flat, so I(0) is the whole line
  EX32      the curve is flat exactly on [-10, 10] and quadratic outside
  MONOTONE  strictly increasing in u, the curve is the identity
"""

from hjhomog.core import PeriodicGrid
from hjhomog.effective import level_set, sample_curve, singleton_certificate
from hjhomog.hamiltonian import builtin

grid = PeriodicGrid(1, 256)

for name, span, count in (("EX31N", (-5.0, 5.0), 11), ("EX32", (-14.0, 14.0), 29), ("MONOTONE", (-2.0, 2.0), 9)):
    curve = sample_curve(builtin(name), "first", span, count, grid)
    print(f"\n{name}: hbar(0, theta) on {span}")
    for t, h in zip(curve.thetas[::max(1, count // 7)], curve.hbars[::max(1, count // 7)]):
        print(f"  theta = {t:7.2f}   hbar = {h: .5f}")
    iv = level_set(curve, 0.0)
    print(f"  I(0): {iv.to_dict()}")

# viscous problem: the pendulum part shifts the MONOTONE curve by its viscous ergodic constant
curve = sample_curve(builtin("MONOTONE"), "second", (0.0, 2.0), 9, grid)
iv = level_set(curve, 0.0)
cert = singleton_certificate(builtin("MONOTONE"), "second", iv, grid)
print(f"\nMONOTONE, second order: I(0) ~ {iv.midpoint:.5f}, certificate: {cert.verdict}")
