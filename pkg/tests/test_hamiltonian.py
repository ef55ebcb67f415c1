import numpy as np
import pytest

from hjhomog.hamdsl import ParseError
from hjhomog.hamiltonian import BUILTINS, HamiltonianError, HamiltonianSpec, builtin, ex32_f, ex32_fprime, from_config


def test_ex32_f_flat_and_quadratic():
    t = np.linspace(-10, 10, 101)
    assert np.all(ex32_f(t) == 0)
    assert ex32_f(12.0) == pytest.approx(4.0)
    assert ex32_f(-13.0) == pytest.approx(-9.0)


def test_ex32_f_is_c1_at_the_corners():
    for corner in (-10.0, 10.0):
        for d in (1e-3, 1e-5):
            left = (ex32_f(corner) - ex32_f(corner - d)) / d
            right = (ex32_f(corner + d) - ex32_f(corner)) / d
            assert abs(left) < 3 * d and abs(right) < 3 * d
        assert ex32_fprime(corner) == 0.0


def test_ex32_fprime_matches_difference_quotient():
    t = np.array([-14.0, -11.0, 0.0, 10.5, 13.0])
    fd = (ex32_f(t + 1e-6) - ex32_f(t - 1e-6)) / 2e-6
    assert np.allclose(ex32_fprime(t), fd, atol=1e-6)


def test_every_builtin_is_monotone_in_u():
    for name in BUILTINS:
        for dim in (1, 2):
            h = builtin(name, dim)
            h.check_monotone(seed=99)


def test_declared_monotone_but_decreasing_is_rejected():
    with pytest.raises(HamiltonianError):
        HamiltonianSpec.from_expression("0.5*p1^2 - u", 1)
    h = HamiltonianSpec.from_expression("0.5*p1^2 - u", 1, monotone_u=False)
    assert h(np.array([0.0]), np.array([0.0]), 1.0) == -1.0


def test_unknown_builtin():
    with pytest.raises(HamiltonianError):
        builtin("NOPE")


def test_metadata_validation():
    with pytest.raises(HamiltonianError):
        HamiltonianSpec.from_expression("0.5*p1^2", 1, growth_exponent=1.0)
    with pytest.raises(HamiltonianError):
        HamiltonianSpec.from_expression("0.5*p1^2", 1, lambda0=0.0)
    with pytest.raises(HamiltonianError):
        HamiltonianSpec.from_expression("0.5*p1^2", 1, m0=0.5)


def test_from_config_builtin_and_expression():
    h = from_config({"builtin": "monotone", "dim": 2})
    assert h.name == "MONOTONE" and h.dim == 2
    e = from_config({"expr": "0.5*p1^2 + u", "name": "free-u", "strictly_monotone_u": True})
    assert e.kind == "parsed-expression" and e.strictly_monotone_u
    with pytest.raises(ParseError):
        from_config({"expr": "0.5*p1^^2"})
    with pytest.raises(HamiltonianError):
        from_config({"dim": 1})


def test_shifted_adds_a_constant():
    h = builtin("PENDULUM")
    s = h.shifted(1.0)
    x, p = np.array([[0.3]]), np.array([[0.7]])
    assert s(x, p, 0.0) == pytest.approx(h(x, p, 0.0) + 1.0)


def test_derivatives_by_differences():
    h = builtin("MONOTONE")
    x = np.array([[0.1], [0.6]])
    p = np.array([[1.5], [-2.0]])
    assert np.allclose(h.dp(x, p, 0.0)[..., 0], p[:, 0], atol=1e-8)
    assert np.allclose(h.du(x, p, 0.0), 1.0, atol=1e-8)
    assert np.allclose(h.potential(x, 0.0), np.cos(2 * np.pi * x[:, 0]) - 1)


def test_evaluator_is_pure():
    h = builtin("EX31N")
    rng = np.random.default_rng(3)
    x, p, u = rng.random((50, 1)), rng.normal(size=(50, 1)), rng.normal(size=50)
    assert np.array_equal(h(x, p, u), h(x, p, u))
