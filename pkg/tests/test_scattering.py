"""Tests for Jost scattering at complex energy and the amplitude residues."""

import math

import numpy as np
import pytest

from barriertop.core.errors import LongRangeUnsupported, MatchingRadiusTooSmall, StiffnessFailure
from barriertop.models.lattice import MultiIndex
from barriertop.models.operator import Grid1D
from barriertop.models.scattering import ResidueMethod, amplitude_constant
from barriertop.services.geometry_service import connection_pair, scattering_geometry
from barriertop.services.lattice_service import pseudo_resonances
from barriertop.services.operator_service import assemble_scaled, find_resonances, hits_by_alpha
from barriertop.services.scattering_service import (
    amplitude_residue,
    amplitude_scan,
    fit_phase_increments,
    fit_power_law,
    poschl_teller_actions,
    poschl_teller_residue,
    poschl_teller_resonances,
    poschl_teller_transmission,
    predicted_residue,
    residue_records,
    transmission,
)


H = 0.1


@pytest.mark.parametrize("z", [0.9, 1.1, complex(1.0, -0.05), complex(1.05, -0.2)])
def test_transmission_matches_poschl_teller(sech2, z):
    data = transmission(sech2, z, H)
    assert data.T == pytest.approx(poschl_teller_transmission(z, H, 1.0), rel=1e-6)
    assert data.wronskian_T == pytest.approx(data.T, rel=1e-6)


def test_flux_is_conserved_on_the_real_axis(sech2):
    for z in (0.8, 1.0, 1.3):
        data = transmission(sech2, z, H)
        assert data.flux_defect <= 1e-8
        assert data.path_angle == 0.0


def test_amplitude_directions(sech2):
    data = transmission(sech2, 1.1, H)
    assert data.amplitude(1, 1) == pytest.approx(data.T - 1.0)
    assert data.amplitude(-1, -1) == pytest.approx(data.T - 1.0)
    assert data.amplitude(-1, 1) == pytest.approx(data.R_left)
    # even potential: both reflections agree
    assert data.amplitude(1, -1) == pytest.approx(data.R_left, rel=1e-6)
    with pytest.raises(ValueError):
        data.amplitude(0, 1)
    with pytest.raises(ValueError):
        transmission(sech2, 1.1, H, both_sides=False).amplitude(1, -1)


def test_amplitude_is_the_normalized_t_kernel(sech2):
    """S = Id - 2 i pi T and A = c(z, h) T with c = -2 pi i on the line."""
    for z, h in ((1.0, 0.1), (complex(1.1, -0.2), 0.05), (0.5, 0.0125)):
        assert amplitude_constant(z, h) == pytest.approx(-2j * math.pi)
    assert amplitude_constant(4.0, 0.1, n=3) == pytest.approx(-4.0 * math.pi**2 * 0.1 / 2.0)

    data = transmission(sech2, complex(1.05, -0.05), H)
    for omega, omega_prime in ((1, 1), (-1, 1), (1, -1)):
        kernel = data.t_kernel(omega, omega_prime)
        assert data.amplitude(omega, omega_prime) == pytest.approx(amplitude_constant(data.z, H) * kernel)
        delta = 1.0 if omega == omega_prime else 0.0
        assert data.s_matrix(omega, omega_prime) == pytest.approx(delta - 2j * math.pi * kernel)
    assert data.s_matrix(1, 1) == data.T
    assert data.s_matrix(-1, 1) == data.R_left


def test_transmission_guards(sech2, quadratic):
    with pytest.raises(StiffnessFailure):
        transmission(sech2, complex(1.0, -0.6), H)
    with pytest.raises(MatchingRadiusTooSmall):
        transmission(sech2, 1.0, H, radius=3.0)
    with pytest.raises(LongRangeUnsupported):
        transmission(quadratic, 1.0, H)
    with pytest.raises(ValueError):
        transmission(sech2, -1.0, H)


def test_poschl_teller_closed_forms():
    """Poles sit at 1 - i h (2m + 1) + O(h^2) and |Res T| ~ sqrt(h / pi)."""
    poles = poschl_teller_resonances(H, 1.0, count=2)
    assert poles[0] == pytest.approx(complex(1.0, -0.1), abs=0.01)
    assert poles[1] == pytest.approx(complex(1.0, -0.3), abs=0.03)
    for h in (0.1, 0.05):
        assert abs(poschl_teller_residue(0, h, 1.0)) == pytest.approx(math.sqrt(h / math.pi), rel=0.02)
    assert poschl_teller_actions(1.0) == pytest.approx(-math.log(2.0))


def test_residue_matches_poschl_teller(sech2):
    z0 = poschl_teller_resonances(H, 1.0, count=1)[0]
    record = amplitude_residue(sech2, H, z0, (0,), nodes=32, radius=0.01)
    assert record.method == ResidueMethod.contour_quadrature
    assert record.residue == pytest.approx(poschl_teller_residue(0, H, 1.0), rel=1e-4)
    assert record.agreement <= 1e-2
    assert record.z_pole == pytest.approx(z0, abs=1e-6)
    assert record.pole_fit_location == pytest.approx(z0, abs=1e-4)
    assert record.pole_offset <= 1e-3
    assert record.amplitude_constant == pytest.approx(-2j * math.pi)

    rows = residue_records([record], slope=0.5)
    assert rows[0]["alpha"] == [0]
    assert rows[0]["predicted_re"] is None
    assert rows[0]["slope_fit"] == 0.5


def test_amplitude_scan(sech2):
    rows = amplitude_scan(sech2, H, [0.9, complex(1.1, -0.05)])
    assert len(rows) == 2
    assert rows[1]["im_z"] == pytest.approx(-0.05)
    assert rows[0]["abs_a"] == pytest.approx(abs(poschl_teller_transmission(0.9, H, 1.0) - 1.0), rel=1e-6)


def test_fit_power_law():
    hs = [0.1, 0.05, 0.025]
    fit = fit_power_law(hs, [3.0 * h**0.5 * 1j for h in hs])
    assert fit["slope"] == pytest.approx(0.5)
    assert fit["intercept"] == pytest.approx(math.log(3.0))
    assert fit["residual"] <= 1e-12


def test_fit_phase_increments():
    hs = np.array([0.1, 0.05, 0.025])
    S = -2.0 * math.log(2.0)
    fit = fit_phase_increments(hs, 2.0 * np.exp(1j * (S / hs + 0.3)), S)
    assert fit["global_phase"] == pytest.approx(0.3)
    assert fit["residual"] <= 1e-12


@pytest.mark.slow
def test_predicted_residue_of_sech2(sech2, sech2_data):
    """|Res| / |predicted| within [0.85, 1.15] at h = 0.0125 and slope 1/2 in h."""
    stable, unstable = connection_pair(sech2, sech2_data)
    geom = scattering_geometry(stable, unstable, sech2, sech2_data)
    hs = [0.1, 0.05, 0.025, 0.0125]
    residues = []
    for h in hs:
        z0 = poschl_teller_resonances(h, 1.0, count=1)[0]
        residues.append(amplitude_residue(sech2, h, z0, (0,), nodes=32, radius=0.1 * h).residue)
    assert fit_power_law(hs, residues)["slope"] == pytest.approx(0.5, abs=0.1)

    predicted = predicted_residue((0,), geom, sech2_data.lambdas, sech2_data.E0, hs[-1], sech2)
    assert not predicted.leading_zero
    assert 0.85 <= abs(residues[-1]) / abs(predicted.value) <= 1.15


@pytest.mark.slow
def test_residues_at_computed_resonances(sech2, sech2_data):
    """Poles of A within 1e-3 h of the scaled-operator z_alpha, slopes 1/2 and -1/2, phase tracking e^{i S/h}."""
    stable, unstable = connection_pair(sech2, sech2_data)
    geom = scattering_geometry(stable, unstable, sech2, sech2_data)
    grids = {0.1: (6.0, 961), 0.05: (6.0, 1921), 0.025: (4.0, 2561), 0.0125: (3.0, 3841)}
    hs = list(grids)
    series = {0: [], 1: []}
    for h, (half_length, points) in grids.items():
        op = assemble_scaled(sech2, Grid1D(half_length=half_length, points=points), h, 0.3)
        hits = hits_by_alpha(find_resonances(op, pseudo_resonances(sech2_data, h, 4.0)))
        for order in series:
            record = amplitude_residue(sech2, h, hits[MultiIndex((order,))].z, (order,))
            assert record.pole_offset <= 1e-3
            series[order].append(record.residue)

    assert fit_power_law(hs, series[0])["slope"] == pytest.approx(0.5, abs=0.1)
    assert fit_power_law(hs, series[1])["slope"] == pytest.approx(-0.5, abs=0.15)
    assert fit_phase_increments(hs, series[0], geom.S_minus + geom.S_plus)["residual"] <= 0.1
