"""Tests for the formal stable curve and its Picard refinement."""

import numpy as np
import pytest

from barriertop.core.errors import PrescriptionNotInKernel, TruncationTooLow
from barriertop.models.geometry import Direction
from barriertop.services.curves_service import (
    formal_curve,
    kernel_prescription,
    linearize,
    picard_refine,
    refined_trajectory,
    time_reverse,
    verify_prescription,
)
from barriertop.services.potential_service import barrier_data, build_potential, taylor_field


@pytest.fixture
def sech2_formal(sech2, sech2_data):
    lin = linearize(sech2_data)
    formal = formal_curve(lin, taylor_field(sech2, 4), kernel_prescription(lin, {2.0: [1.0]}), 8.0)
    return lin, formal


def test_linearization_of_sech2(sech2_data):
    lin = linearize(sech2_data)
    assert lin.Fp == pytest.approx(np.array([[0.0, 2.0], [2.0, 0.0]]))
    assert list(lin.projectors) == [2.0]
    kernel = kernel_prescription(lin, {2.0: [1.0]})[2.0]
    assert kernel == pytest.approx([1.0, -1.0])
    assert lin.Fp @ kernel == pytest.approx(-2.0 * kernel)


def test_prescription_must_lie_in_the_kernel(sech2, sech2_data):
    lin = linearize(sech2_data)
    fields = taylor_field(sech2, 4)
    with pytest.raises(PrescriptionNotInKernel):
        formal_curve(lin, fields, {2.0: np.array([1.0, 1.0])}, 8.0)
    with pytest.raises(PrescriptionNotInKernel):
        formal_curve(lin, fields, {3.0: np.array([1.0, -1.5])}, 8.0)


def test_truncation_must_exceed_lambda(sech2, sech2_data):
    lin = linearize(sech2_data)
    with pytest.raises(TruncationTooLow):
        formal_curve(lin, taylor_field(sech2, 4), {}, 1.5)


def test_formal_sech2_curve(sech2_formal):
    """Pure lambda levels carry degree 0 and the recursion closes."""
    _, formal = sech2_formal
    # asinh(e^{-2t}) = e^{-2t} - e^{-6t} / 6 + ...
    assert formal.expansion.mu_values == pytest.approx((2.0, 6.0))
    assert formal.expansion.term(6.0).coefficients[0] == pytest.approx([-1.0 / 6.0, 0.5])
    assert set(formal.expansion.degrees.values()) == {0}
    assert formal.resonant_levels == ()
    assert formal.recursion_defect <= 1e-12
    assert formal.expansion.g[2.0] == pytest.approx([1.0])


def test_refined_sech2_curve(sech2, sech2_formal):
    """The stable curve with g = 1 is sinh x = e^{-2t}, xi = -tanh x."""
    lin, formal = sech2_formal
    refined = picard_refine(formal, sech2, lin, span=10.0)
    assert refined.residual <= 1e-8
    assert all(r <= 0.55 for r in refined.ratios)
    assert refined.weighted_sup <= 1.0

    t = refined.times[refined.window][::50]
    x = np.arcsinh(np.exp(-2.0 * t))
    states = refined(t)
    assert states[:, 0] == pytest.approx(x, abs=1e-9)
    assert states[:, 1] == pytest.approx(-np.tanh(x), abs=1e-9)

    report = verify_prescription(refined, lin)
    assert report.passed
    assert report.mismatch <= 1e-6


def test_unpinned_curve_is_trivial(sech2, sech2_data):
    """Nothing prescribed gives the zero curve at the apex."""
    lin = linearize(sech2_data)
    formal = formal_curve(lin, taylor_field(sech2, 4), {}, 8.0)
    assert formal(np.array([0.0, 1.0])) == pytest.approx(np.zeros((2, 2)))


def test_time_reversal(sech2, sech2_formal):
    lin, formal = sech2_formal
    reversed_curve = time_reverse(formal)
    t = np.linspace(1.0, 3.0, 5)
    J = np.array([1.0, -1.0])
    assert reversed_curve(-t) == pytest.approx(formal(t) * J, abs=1e-14)
    assert time_reverse(reversed_curve)(t) == pytest.approx(formal(t), abs=1e-14)

    traj = refined_trajectory(picard_refine(formal, sech2, lin))
    back = time_reverse(traj)
    assert back.direction == Direction.unstable
    assert back.at(-traj.times[:3]) == pytest.approx(traj.states[:3] * J)


def test_resonant_ladder_raises_the_degree():
    """lambda = (1, 2) with a cubic coupling: the level mu = 2 gets a t-term."""
    pot = build_potential("perturbed_quadratic", [1.0, 1.0, 2.0, 0.1, 0.01], dimension=2)
    data = barrier_data(pot)
    lin = linearize(data)
    formal = formal_curve(lin, taylor_field(pot, 8), kernel_prescription(lin, {1.0: [1.0, 0.0]}), 8.0)
    assert 2.0 in formal.resonant_levels
    assert formal.expansion.degrees[2.0] == 1
    assert formal.recursion_defect <= 1e-10

    refined = picard_refine(formal, pot, lin, span=10.0)
    assert refined.residual <= 1e-8
    assert all(r <= 0.55 for r in refined.ratios)
