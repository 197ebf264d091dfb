"""Tests for the scaled operator, the resonance solvers and the Riesz projector."""

import numpy as np
import pytest

from barriertop.core.errors import ContourTooClose, InvalidScaling, ResolutionWarning, SectorUncovered
from barriertop.models.operator import BumpSpec, Discretization, Grid1D, Scaling, ScalingType
from barriertop.services.lattice_service import pseudo_resonances
from barriertop.services.operator_service import (
    assemble_scaled,
    assemble_selfadjoint,
    bump,
    dense_resonances,
    distortion,
    find_resonances,
    fit_resolvent_exponent,
    functional_calculus,
    hits_by_alpha,
    inverted_oscillator_resonances,
    riesz_projector,
    scan_resolvent,
    spectral_decomposition,
    stray_eigenvalues,
)

H = 0.1


def _resonances(pot, data, grid, scaling, theta=0.3, C=6.0):
    op = assemble_scaled(pot, grid, H, theta, scaling)
    return op, find_resonances(op, pseudo_resonances(data, H, C))


def test_inverted_oscillator_calibration(quadratic, quadratic_data):
    """Ensure resonances of 1 - x^2 match 1 - i h lambda (k + 1/2) for both scalings."""
    grid = Grid1D(half_length=4.0, points=1601)
    exact = inverted_oscillator_resonances(1.0, 2.0, H, 2)

    _, uniform = _resonances(quadratic, quadratic_data, grid, Scaling())
    _, exterior = _resonances(
        quadratic, quadratic_data, grid, Scaling(type=ScalingType.exterior, R0=1.5, smoothing_width=1.0)
    )
    for hits in (uniform, exterior):
        z = sorted((hit.z for hit in hits), key=lambda v: -v.imag)
        assert len(z) == 3
        for computed, target in zip(z, exact):
            assert abs(computed - target) / abs(target) <= 1e-4
    for a, b in zip(sorted(uniform, key=lambda h: h.alpha), sorted(exterior, key=lambda h: h.alpha)):
        assert abs(a.z - b.z) <= 1e-4


def test_shift_invert_agrees_with_dense_solver(quadratic, quadratic_data, small_grid):
    op, hits = _resonances(quadratic, quadratic_data, small_grid, Scaling())
    dense = dense_resonances(op, complex(1.0, -0.3), 0.4)
    for hit in hits:
        assert np.min(np.abs(dense - hit.z)) <= 1e-8
        assert hit.residual <= 1e-8
        assert not hit.flagged


def test_sector_must_uncover_every_shift(quadratic, quadratic_data, small_grid):
    op = assemble_scaled(quadratic, small_grid, H, 0.05)
    with pytest.raises(SectorUncovered):
        find_resonances(op, pseudo_resonances(quadratic_data, H, 6.0))


def test_exterior_scaling_needs_room(quadratic, small_grid):
    with pytest.raises(InvalidScaling):
        assemble_scaled(quadratic, small_grid, H, 0.3, Scaling(type=ScalingType.exterior, R0=3.5, smoothing_width=1.0))


def test_exterior_distortion_is_real_inside_R0():
    y = np.linspace(-5, 5, 101)
    x, jac = distortion(y, 0.3, Scaling(type=ScalingType.exterior, R0=2.0, smoothing_width=1.0))
    inside = np.abs(y) <= 2.0
    assert np.all(x[inside].imag == 0)
    assert jac[inside] == pytest.approx(np.ones(np.count_nonzero(inside)))
    outside = np.abs(y) >= 3.0
    assert x[outside] == pytest.approx(y[outside] * (1 + 0.3j))


def test_coarse_grid_warns(quadratic):
    with pytest.warns(ResolutionWarning):
        assemble_selfadjoint(quadratic, Grid1D(half_length=4.0, points=101), H, Discretization.fd2)


def test_weighted_operator_is_symmetric(quadratic, small_grid):
    op = assemble_scaled(quadratic, small_grid, H, 0.3)
    WP = np.diag(op.weights) @ op.dense()
    assert np.max(np.abs(WP - WP.T)) <= 1e-10 * np.max(np.abs(WP))


def test_riesz_projector_is_rank_one(quadratic, quadratic_data, small_grid):
    op, hits = _resonances(quadratic, quadratic_data, small_grid, Scaling(), C=2.0)
    proj = riesz_projector(op, hits[0].z, 0.5 * H)
    assert proj.enclosed == 1
    assert proj.rank_gap <= 1e-6
    assert proj.idempotency_defect <= 1e-6
    assert proj.quadrature_change <= 1e-6


def test_contour_through_an_eigenvalue_is_refused(quadratic, quadratic_data, small_grid):
    op, hits = _resonances(quadratic, quadratic_data, small_grid, Scaling(), C=2.0)
    radius = 0.5 * H
    with pytest.raises(ContourTooClose):
        riesz_projector(op, hits[0].z + 1.0005 * radius, radius)


def test_margin_is_checked_between_coarse_nodes(quadratic, quadratic_data, small_grid):
    """An eigenvalue 1.05 radii out, facing a node of the doubled rule only, is refused."""
    op, hits = _resonances(quadratic, quadratic_data, small_grid, Scaling(), C=2.0)
    radius = 0.5 * H
    odd_node = np.exp(2j * np.pi / 64)
    with pytest.raises(ContourTooClose):
        riesz_projector(op, hits[0].z - 1.05 * radius * odd_node, radius)

    proj = riesz_projector(op, hits[0].z - 1.6 * radius, radius)
    assert proj.enclosed == 0


def test_resonances_do_not_depend_on_the_distortion(sech2, sech2_data):
    """z_alpha agrees for two uniform angles and an exterior distortion."""
    grid = Grid1D(half_length=8.0, points=1281)
    lattice = pseudo_resonances(sech2_data, H, 4.0)
    distortions = (
        (0.3, Scaling()),
        (0.5, Scaling()),
        (0.4, Scaling(type=ScalingType.exterior, R0=3.0, smoothing_width=1.0)),
    )
    found = [
        hits_by_alpha(find_resonances(assemble_scaled(sech2, grid, H, theta, scaling), lattice))
        for theta, scaling in distortions
    ]
    assert len(found[0]) == 2
    for other in found[1:]:
        assert set(other) == set(found[0])
        for alpha, hit in found[0].items():
            assert other[alpha].z == pytest.approx(hit.z, abs=2e-5)


def test_empty_contour_gives_zero_projector(quadratic, small_grid):
    op = assemble_scaled(quadratic, small_grid, H, 0.3)
    proj = riesz_projector(op, complex(1.0, -0.2), 0.02)
    assert proj.enclosed == 0
    assert proj.norm <= 1e-6


def test_bump_and_functional_calculus(quadratic, small_grid):
    spec = BumpSpec(center=1.0, plateau=0.1, support=0.2)
    values = bump(spec, np.array([1.0, 1.1, 1.15, 1.2, 1.3]))
    assert values[:2] == pytest.approx([1.0, 1.0])
    assert 0 < values[2] < 1
    assert values[3:] == pytest.approx([0.0, 0.0])

    decomp = spectral_decomposition(assemble_selfadjoint(quadratic, small_grid, H), H, small_grid)
    psi = functional_calculus(decomp, spec)
    assert np.max(np.abs(psi - psi.conj().T)) <= 1e-12
    assert np.linalg.eigvalsh(psi).max() <= 1.0 + 1e-12


def test_resolvent_scan(quadratic, quadratic_data):
    scans = {}
    for h in (0.1, 0.05):
        grid = Grid1D(half_length=3.0, points=241 if h == 0.1 else 481)
        op = assemble_scaled(quadratic, grid, h, 0.3)
        hits = find_resonances(op, pseudo_resonances(quadratic_data, h, 2.0))
        rows = scan_resolvent(op, [hit.z for hit in hits], (0.9, 1.1), (-2 * h, -0.1 * h), (4, 3))
        assert len(rows) == 12
        assert all(r["norm"] > 0 for r in rows)
        scans[h] = rows
    fit = fit_resolvent_exponent(scans)
    assert set(fit["K"]) == {0.1, 0.05}
    assert all(np.isfinite(k) for k in fit["K"].values())


@pytest.mark.slow
def test_resonance_free_zone_of_sech2(sech2, sech2_data):
    """No eigenvalue in ([0.8, 1.2] + i[-3h, 0]) outside the disc of radius 6h."""
    for h, points in ((0.1, 961), (0.05, 1921)):
        op = assemble_scaled(sech2, Grid1D(half_length=6.0, points=points), h, 0.3)
        assert len(stray_eigenvalues(op, 1.0, 0.2, 3.0, 6.0)) == 0


@pytest.mark.slow
def test_sech2_lattice_convergence(sech2, sech2_data):
    """|z_alpha - z_alpha^0| / h decreases with h and is at most 0.15 at h = 0.05."""
    distances = {}
    for h, points in ((0.2, 481), (0.1, 961), (0.05, 1921)):
        op = assemble_scaled(sech2, Grid1D(half_length=6.0, points=points), h, 0.5)
        hits = hits_by_alpha(find_resonances(op, pseudo_resonances(sech2_data, h, 6.0)))
        distances[h] = {str(alpha): hit.match_distance for alpha, hit in hits.items()}
    for alpha in ("(0)", "(1)", "(2)"):
        series = [distances[h][alpha] for h in (0.2, 0.1, 0.05)]
        assert series[0] > series[1] > series[2]
        assert series[2] <= 0.15
        assert series[2] / series[1] <= 0.6


@pytest.mark.slow
def test_resolvent_bound_of_sech2(sech2, sech2_data):
    """K_fit on a 40 x 20 grid varies by under 25% from h = 0.1 to 0.05 and is at least |alpha_max| + 1/2 - 0.3."""
    scans = {}
    orders = set()
    for h in (0.1, 0.05):
        op = assemble_scaled(sech2, Grid1D(half_length=10.0, points=1601), h, 0.3)
        hits = find_resonances(op, pseudo_resonances(sech2_data, h, 4.0))
        orders.update(hit.alpha.order for hit in hits)
        scans[h] = scan_resolvent(op, [hit.z for hit in hits], (0.8, 1.2), (-3.0 * h, 0.0), (40, 20))
        assert len(scans[h]) == 800
    assert orders == {0, 1}

    fit = fit_resolvent_exponent(scans)
    assert fit["relative_spread"] < 0.25
    assert min(fit["K"].values()) >= max(orders) + 0.5 - 0.3
