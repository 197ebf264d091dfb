"""Tests for eikonal phases, Hamiltonian flows and the apex connections."""

import math

import numpy as np
import pytest

from barriertop.core.errors import DimensionUnsupported, LongRangeUnsupported
from barriertop.models.geometry import Direction, Side
from barriertop.models.potential import PhasePoint
from barriertop.services.geometry_service import (
    closed_form_g,
    connection_pair,
    eikonal_phase,
    fit_expansion,
    flow,
    scattering_geometry,
)
from barriertop.services.lattice_service import mu_sequence
from barriertop.services.potential_service import barrier_data, build_potential
from barriertop.services.scattering_service import poschl_teller_actions


def test_eikonal_phase_of_quadratic_model(quadratic, quadratic_data):
    """phi_+ = lambda x^2 / 4 = x^2 / 2 for V = 1 - x^2."""
    phi = eikonal_phase(quadratic_data, quadratic, sign=1)
    assert phi(np.array([-1.0, 0.5, 1.0])) == pytest.approx([0.5, 0.125, 0.5], rel=1e-10)
    assert phi.derivative(np.array([0.5])) == pytest.approx([0.5])
    assert phi.eikonal_residual <= 1e-12


def test_eikonal_phase_of_sech2(sech2, sech2_data):
    """phi_+ = ln cosh x and phi_- = -phi_+."""
    plus = eikonal_phase(sech2_data, sech2, sign=1)
    minus = eikonal_phase(sech2_data, sech2, sign=-1)
    x = np.array([-2.0, 0.3, 1.0])
    assert plus(x) == pytest.approx(np.log(np.cosh(x)), rel=1e-9)
    assert minus(x) == pytest.approx(-np.log(np.cosh(x)), rel=1e-9)


def test_eikonal_phase_is_one_dimensional():
    pot = build_potential("quadratic_model", [1.0, 2.0, 3.0], dimension=2)
    data = barrier_data(pot)
    with pytest.raises(DimensionUnsupported):
        eikonal_phase(data, pot)
    local = eikonal_phase(data, pot, allow_local=True)
    assert local.local
    assert local(np.array([[1.0, 1.0]])) == pytest.approx([(2.0 + 3.0) / 4.0])


def test_flow_conserves_energy(sech2):
    start = PhasePoint(x=[0.5], xi=[0.4])
    traj = flow(sech2, start, (0.0, 5.0), tol=1e-10)
    assert traj.max_drift <= 1e-10
    assert traj.energy == pytest.approx(0.16 + 1.0 / math.cosh(0.5) ** 2)
    assert traj.at([0.0])[0] == pytest.approx([0.5, 0.4])


def test_sech2_connections_match_closed_forms(sech2, sech2_data):
    """S_- = S_+ = -ln 2 and |g_-| = |g_+| = 1/2 for the pinned sech^2 connections."""
    stable, unstable = connection_pair(sech2, sech2_data)
    assert stable.direction == Direction.stable
    assert unstable.direction == Direction.unstable
    assert stable.pinned and unstable.pinned

    geom = scattering_geometry(stable, unstable, sech2, sech2_data)
    S = poschl_teller_actions(1.0)
    assert S == pytest.approx(-math.log(2.0))
    assert geom.S_minus == pytest.approx(S, abs=1e-6)
    assert geom.S_plus == pytest.approx(S, abs=1e-6)
    assert abs(geom.g_minus) == pytest.approx(0.5, rel=1e-4)
    assert abs(geom.g_plus) == pytest.approx(0.5, rel=1e-4)
    assert geom.nu_minus == 0 and geom.nu_plus == 0
    assert geom.lambda_star == pytest.approx(2.0)


def test_time_shift_rescales_g_and_keeps_the_actions(sech2, sech2_data):
    """Moving both clocks by tau maps g_- to g_- e^{lambda tau} and g_+ to g_+ e^{-lambda tau}."""
    stable, unstable = connection_pair(sech2, sech2_data)
    base = scattering_geometry(stable, unstable, sech2, sech2_data)
    tau = 0.3
    shifted = scattering_geometry(stable.reanchored(tau), unstable.reanchored(tau), sech2, sech2_data)
    lam = sech2_data.lambda_min
    assert shifted.S_minus == pytest.approx(base.S_minus, abs=1e-10)
    assert shifted.S_plus == pytest.approx(base.S_plus, abs=1e-10)
    assert shifted.g_minus == pytest.approx(base.g_minus * math.exp(lam * tau), rel=1e-5)
    assert shifted.g_plus == pytest.approx(base.g_plus * math.exp(-lam * tau), rel=1e-5)


def test_closed_form_g_of_sech2(sech2, sech2_data):
    assert abs(closed_form_g(sech2, sech2_data, 1)) == pytest.approx(0.5, rel=1e-8)
    assert closed_form_g(sech2, sech2_data, -1) == pytest.approx(-closed_form_g(sech2, sech2_data, 1))


def test_connections_need_short_range(quadratic, quadratic_data):
    with pytest.raises(LongRangeUnsupported):
        closed_form_g(quadratic, quadratic_data, 1)


def test_expansion_fit_of_the_stable_connection(sech2, sech2_data):
    """x(t) = g e^{-2t} + O(e^{-6t}) with |g| = 1/2 on the pinned stable side."""
    stable, _ = connection_pair(sech2, sech2_data)
    fit = fit_expansion(stable, mu_sequence(sech2_data.lambdas, 8.0), sech2_data.lambdas)
    assert fit.side == Side.future
    assert fit.lambda_star == pytest.approx(2.0)
    assert abs(fit.g[2.0][0]) == pytest.approx(0.5, rel=1e-4)
    assert fit.residual <= 1e-5
