"""Tests for potentials, barrier data and the Hamiltonian field."""

import math

import numpy as np
import pytest

from barriertop.core.errors import ConfigError, PoleProximity, SectorViolation
from barriertop.models.potential import PhasePoint
from barriertop.services.potential_service import (
    analyticity,
    barrier_data,
    build_potential,
    eval_potential,
    field_function,
    field_jacobian,
    hamiltonian,
    hamiltonian_field,
    potential_values,
    taylor_field,
)


def test_sech2_barrier_data(sech2_data):
    """Ensure the sech^2 apex has E0 = 1 and lambda = 2."""
    assert sech2_data.E0 == pytest.approx(1.0)
    assert sech2_data.lambdas == pytest.approx([2.0], rel=1e-10)
    assert sech2_data.apex == pytest.approx([0.0])


def test_quadratic_model_lambdas():
    pot = build_potential("quadratic_model", [1.5, 2.0, 3.0], dimension=2)
    data = barrier_data(pot)
    assert data.E0 == pytest.approx(1.5)
    assert data.lambdas == pytest.approx([2.0, 3.0])


def test_build_potential_rejects_bad_input():
    with pytest.raises(ConfigError):
        build_potential("morse", [1.0])
    with pytest.raises(ConfigError):
        build_potential("quadratic_model", [1.0, 2.0, 3.0])
    with pytest.raises(ConfigError):
        build_potential("sech2_barrier", [-1.0])
    with pytest.raises(ConfigError):
        build_potential("user_table", [], table=([0.0, 1.0], [1.0, 0.0]))


def test_user_table_apex():
    """A tabulated 1 - x^2 gives back the inverted oscillator data."""
    x = np.linspace(-2.0, 2.0, 81)
    pot = build_potential("user_table", [], table=(x.tolist(), (1.0 - x**2).tolist()))
    data = barrier_data(pot)
    assert data.E0 == pytest.approx(1.0, abs=1e-6)
    assert data.apex[0] == pytest.approx(0.0, abs=1e-5)
    assert data.lambdas[0] == pytest.approx(2.0, rel=1e-3)


def test_sech2_continuation_guards(sech2):
    with pytest.raises(PoleProximity):
        eval_potential(sech2, np.array([0.5j * math.pi]))
    with pytest.raises(SectorViolation):
        potential_values(sech2, np.array([1.0 + 2.0j]))
    delta, strip = analyticity(sech2)
    assert 0 < delta < math.pi / 4
    assert strip == pytest.approx(math.pi / 4)


def test_sech2_values_on_rotated_line(sech2):
    x = np.linspace(-3, 3, 7) * np.exp(0.3j)
    assert potential_values(sech2, x) == pytest.approx(1.0 / np.cosh(x) ** 2)


def test_taylor_field_of_sech2(sech2):
    """-V'(x) = 2x - 8x^3/3 + ..., so G_2 vanishes and G_3 carries -8/3."""
    fields = taylor_field(sech2, 4)
    assert [G.degree for G in fields] == [2, 3, 4]
    assert fields[0].is_zero
    assert fields[1].coefficient((3,)) == pytest.approx([0.0, -8.0 / 3.0])
    assert fields[2].is_zero


def test_hamiltonian_field_of_quadratic_model(quadratic):
    p = PhasePoint(x=[0.5], xi=[0.2])
    assert hamiltonian(quadratic, p) == pytest.approx(0.04 + 1.0 - 0.25)
    assert hamiltonian_field(quadratic, p) == pytest.approx([0.4, 1.0])


def test_taylor_field_requires_degree_two(sech2):
    with pytest.raises(ValueError):
        taylor_field(sech2, 1)


def test_gaussian_sector():
    pot = build_potential("gaussian_barrier", [1.0])
    delta, strip = analyticity(pot)
    assert delta < math.pi / 4
    assert strip == pytest.approx(1.0)
    with pytest.raises(SectorViolation):
        potential_values(pot, np.array([1.0 + 2.0j]))
    x = np.linspace(-3, 3, 7) * np.exp(0.3j)
    assert potential_values(pot, x) == pytest.approx(np.exp(-(x**2)))


def test_hamiltonian_field_is_divergence_free():
    """H_p, its linearization and the Taylor parts G_k all have zero divergence."""
    pot = build_potential("anisotropic_gaussian", [1.0, 1.0, 2.0], dimension=2)
    rhs = field_function(pot)
    rng = np.random.default_rng(7)
    step = 1e-5
    for u in rng.uniform(-1.0, 1.0, size=(5, 4)):
        assert np.trace(field_jacobian(pot, u)) == pytest.approx(0.0, abs=1e-12)
        div = sum((rhs(0.0, u + step * e)[k] - rhs(0.0, u - step * e)[k]) / (2 * step) for k, e in enumerate(np.eye(4)))
        assert div == pytest.approx(0.0, abs=1e-8)

    fields = taylor_field(pot, 5)
    assert any(not G.is_zero for G in fields)
    for G in fields:
        for monomial, coeff in G.terms:
            assert len(monomial) == 2
            # degree >= 2 parts live in the xi slots and depend on x only
            assert coeff[:2] == pytest.approx([0.0, 0.0])
