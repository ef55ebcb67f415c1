"""Contact Hamiltonians ``H(x, p, u)`` and the built-in catalogue.

Every evaluator is vectorised: ``x`` and ``p`` carry a trailing axis of
length ``dim`` and ``u`` broadcasts against the remaining axes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable

import numpy as np

from . import hamdsl

Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

# finite-difference steps for derivatives of H
DP_STEP = 1e-6
DU_STEP = 1e-6


class HamiltonianError(ValueError):
    pass


@dataclass(frozen=True)
class HamiltonianSpec:
    name: str
    dim: int
    evaluator: Evaluator = field(repr=False, compare=False)
    kind: str = "builtin"
    growth_exponent: float = 2.0
    lambda0: float = 0.5
    m0: float = 1.0
    rho_star: float = math.inf
    convex_p: bool = True
    superlinear_p: bool = True
    monotone_u: bool = True
    strictly_monotone_u: bool = False
    convex_u: bool = False
    # H(x, p, u) - H(x, 0, u) == |p|^2 / 2; enables the Hopf-Cole oracle
    quadratic_separable: bool = False
    expression: str | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise HamiltonianError(f"dim must be 1 or 2, got {self.dim}")
        if not self.growth_exponent > 1:
            raise HamiltonianError("growth exponent must exceed 1")
        if not 0 < self.lambda0 <= 1 or self.m0 < 1:
            raise HamiltonianError("growth constants need 0 < lambda0 <= 1 and m0 >= 1")
        if not self.rho_star > 0:
            raise HamiltonianError("rho_star must be positive")
        if self.monotone_u:
            self.check_monotone()

    def __call__(self, x, p, u):
        return self.evaluator(np.asarray(x, dtype=float), np.asarray(p, dtype=float), np.asarray(u, dtype=float))

    def check_monotone(self, samples: int = 1000, seed: int = 12345):
        rng = np.random.default_rng(seed)
        x = rng.random((samples, self.dim))
        p = rng.uniform(-5.0, 5.0, (samples, self.dim))
        u1 = rng.uniform(-20.0, 20.0, samples)
        u2 = u1 + rng.uniform(0.0, 5.0, samples)
        h1 = self(x, p, u1)
        h2 = self(x, p, u2)
        bad = h2 < h1 - 1e-12 * (1.0 + np.abs(h1))
        if np.any(bad):
            i = int(np.argmax(bad))
            raise HamiltonianError(
                f"{self.name}: declared non-decreasing in u but H(x,p,{u2[i]:.4g}) < H(x,p,{u1[i]:.4g})"
            )

    def dp(self, x, p, u, step: float = DP_STEP) -> np.ndarray:
        """Central-difference gradient in ``p``, stacked on a trailing axis."""
        p = np.asarray(p, dtype=float)
        cols = []
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = step
            cols.append((self(x, p + e, u) - self(x, p - e, u)) / (2 * step))
        return np.stack(np.broadcast_arrays(*cols), axis=-1)

    def du(self, x, p, u, step: float = DU_STEP) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return (self(x, p, u + step) - self(x, p, u - step)) / (2 * step)

    def potential(self, x, u) -> np.ndarray:
        """``H(x, 0, u)``."""
        x = np.asarray(x, dtype=float)
        return self(x, np.zeros_like(x), u)

    def shifted(self, amount: float) -> "HamiltonianSpec":
        base = self.evaluator
        return replace(
            self,
            name=f"{self.name}{amount:+g}",
            evaluator=lambda x, p, u: base(x, p, u) + amount,
            expression=None if self.expression is None else f"({self.expression}) + ({amount!r})",
        )

    @classmethod
    def from_expression(cls, expr: str, dim: int = 1, name: str = "expr", **metadata) -> "HamiltonianSpec":
        """Build from a DSL string; raises :class:`hamdsl.ParseError` on bad input."""
        ast = hamdsl.parse(expr, dim)
        return cls(name=name, dim=dim, evaluator=ast, kind="parsed-expression", expression=expr, **metadata)


def _kinetic(p):
    return 0.5 * np.sum(p * p, axis=-1)


def _well(x):
    # sum_k (cos 2 pi x_k - 1): maximum 0 at the origin
    return np.sum(np.cos(2 * np.pi * x) - 1.0, axis=-1)


def ex32_f(theta):
    """``0`` on ``[-10, 10]``, ``sgn(t)(t - 10 sgn(t))^2`` outside; C^1 at +-10."""
    theta = np.asarray(theta, dtype=float)
    return np.maximum(theta - 10.0, 0.0) ** 2 - np.maximum(-theta - 10.0, 0.0) ** 2


def ex32_fprime(theta):
    theta = np.asarray(theta, dtype=float)
    return 2.0 * np.maximum(theta - 10.0, 0.0) + 2.0 * np.maximum(-theta - 10.0, 0.0)


def _ex31_factor(u):
    return 1.0 - np.arctan(u) / (4 * np.pi)


def _builtin_table(dim: int) -> dict[str, dict]:
    m0 = max(1.0, 2.0 * dim)
    return {
        "EX31": dict(
            evaluator=lambda x, p, u: _kinetic(p) + np.sum(np.cos(x) - 1.0, axis=-1) * _ex31_factor(u),
            m0=max(1.0, 3.0 * dim),
            rho_star=2.0 * dim / (4 * np.pi),
        ),
        "EX31N": dict(
            evaluator=lambda x, p, u: _kinetic(p) + _well(x) * _ex31_factor(u),
            m0=max(1.0, 3.0 * dim),
            rho_star=2.0 * dim / (4 * np.pi),
        ),
        "EX32": dict(
            evaluator=lambda x, p, u: _kinetic(p) + _well(x) + ex32_f(u),
            m0=m0,
            quadratic_separable=True,
        ),
        "PENDULUM": dict(
            evaluator=lambda x, p, u: _kinetic(p) + _well(x) + 0.0 * np.asarray(u),
            m0=m0,
            rho_star=1.0,
            convex_u=True,
            quadratic_separable=True,
        ),
        "PENDULUM1": dict(
            evaluator=lambda x, p, u: _kinetic(p) + _well(x) + dim + 0.0 * np.asarray(u),
            m0=max(1.0, float(dim)),
            rho_star=1.0,
            convex_u=True,
            quadratic_separable=True,
        ),
        "MONOTONE": dict(
            evaluator=lambda x, p, u: _kinetic(p) + _well(x) + u,
            m0=m0,
            rho_star=1.0,
            strictly_monotone_u=True,
            convex_u=True,
            quadratic_separable=True,
        ),
        "FREE": dict(
            evaluator=lambda x, p, u: _kinetic(p) + 0.0 * np.sum(x, axis=-1) + 0.0 * np.asarray(u),
            rho_star=1.0,
            convex_u=True,
            quadratic_separable=True,
        ),
        "FREE_U": dict(
            evaluator=lambda x, p, u: _kinetic(p) + 0.0 * np.sum(x, axis=-1) + u,
            rho_star=1.0,
            strictly_monotone_u=True,
            convex_u=True,
            quadratic_separable=True,
        ),
    }


BUILTIN_DESCRIPTIONS = {
    "EX31": "|p|^2/2 + (cos x - 1)(1 - atan(u)/(4 pi)), printed 2 pi-periodic form",
    "EX31N": "|p|^2/2 + (cos 2 pi x - 1)(1 - atan(u)/(4 pi)); flat effective curve",
    "EX32": "|p|^2/2 + cos 2 pi x - 1 + f(u), f flat on [-10, 10]",
    "PENDULUM": "|p|^2/2 + cos 2 pi x - 1",
    "PENDULUM1": "|p|^2/2 + cos 2 pi x",
    "MONOTONE": "|p|^2/2 + cos 2 pi x - 1 + u",
    "FREE": "|p|^2/2",
    "FREE_U": "|p|^2/2 + u",
}

BUILTINS = tuple(BUILTIN_DESCRIPTIONS)


def builtin(name: str, dim: int = 1) -> HamiltonianSpec:
    table = _builtin_table(dim)
    key = name.upper()
    if key not in table:
        raise HamiltonianError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")
    return HamiltonianSpec(name=key, dim=dim, kind="builtin", **table[key])


def bundled_expressions() -> dict[str, dict]:
    """Expression-file versions of the 1D built-ins shipped with the package."""
    out = {}
    folder = resources.files("hjhomog") / "data" / "hamiltonians"
    for entry in sorted(folder.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = json.loads(entry.read_text(encoding="utf-8"))
    return out


def from_config(block: dict) -> HamiltonianSpec:
    """Build from the ``hamiltonian`` block of a run config."""
    dim = int(block.get("dim", 1))
    if "builtin" in block:
        return builtin(block["builtin"], dim)
    if "expr" not in block:
        raise HamiltonianError("hamiltonian block needs 'builtin' or 'expr'")
    meta = {k: block[k] for k in _METADATA_KEYS if k in block}
    return HamiltonianSpec.from_expression(block["expr"], dim=dim, name=block.get("name", "expr"), **meta)


_METADATA_KEYS = (
    "growth_exponent",
    "lambda0",
    "m0",
    "rho_star",
    "convex_p",
    "superlinear_p",
    "monotone_u",
    "strictly_monotone_u",
    "convex_u",
    "quadratic_separable",
)
