"""Tests for the pseudo-resonance lattice and the mu sequence."""

import math

import pytest

from barriertop.core.errors import ForbiddenRadius
from barriertop.models.lattice import MultiIndex
from barriertop.services.lattice_service import (
    check_radius,
    convergence_rates,
    decay_sums,
    expansion_degrees,
    is_simple,
    mu_sequence,
    pseudo_resonances,
)


def test_pseudo_resonances_of_sech2(sech2_data):
    """Ensure z_alpha^0 = 1 - 0.1 i (2 alpha + 1) for lambda = 2, h = 0.1."""
    points = pseudo_resonances(sech2_data, 0.1, 6.0)
    assert [p.alpha for p in points] == [MultiIndex((0,)), MultiIndex((1,)), MultiIndex((2,))]
    assert [p.z0 for p in points] == pytest.approx([1 - 0.1j, 1 - 0.3j, 1 - 0.5j])
    assert all(p.simple for p in points)


def test_forbidden_radius_names_the_decay_sum():
    with pytest.raises(ForbiddenRadius) as info:
        check_radius([2.0], 3.0)
    assert "3" in str(info.value)
    assert info.value.context["alpha"] == "(1)"
    check_radius([2.0], 4.0)
    with pytest.raises(ForbiddenRadius):
        check_radius([2.0], -1.0)


def test_simplicity():
    assert is_simple((0, 0), [1.0, 1.0])
    assert not is_simple((1, 0), [1.0, 1.0])
    assert is_simple((1, 0), [1.0, math.sqrt(2.0)])
    # (2,0) and (0,1) share the decay sum 3.5
    assert not is_simple((2, 0), [1.0, 2.0])


def test_mu_sequence_and_degrees():
    mu = mu_sequence([1.0, 2.0], 4.0)
    assert mu.values == pytest.approx((1.0, 2.0, 3.0, 4.0))
    assert expansion_degrees(mu, [1.0, 2.0]) == (0, 1, 1, 2)

    nonresonant = mu_sequence([1.0, math.sqrt(2.0)], 2.5)
    assert expansion_degrees(nonresonant, [1.0, math.sqrt(2.0)]) == tuple([0] * len(nonresonant))
    assert mu_sequence([1.0, 2.0], 3.0).is_prefix_of(mu)


def test_decay_sums():
    assert decay_sums([2.0], 6.0) == pytest.approx([1.0, 3.0, 5.0])
    assert decay_sums([1.0, 1.0], 2.0) == pytest.approx([1.0, 2.0])


def test_convergence_rates():
    rates = convergence_rates({0.2: 0.4, 0.1: 0.1, 0.05: 0.025})
    assert rates["h"] == [0.2, 0.1, 0.05]
    assert rates["ratios"] == pytest.approx([0.25, 0.25])
    assert rates["monotone"]
    assert rates["slope"] == pytest.approx(2.0)


def test_multi_index():
    alpha = MultiIndex((2, 1))
    assert alpha.order == 3
    assert alpha.factorial == 2
    assert str(alpha) == "(2,1)"
    with pytest.raises(ValueError):
        MultiIndex((-1,))
