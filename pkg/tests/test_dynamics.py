"""Tests for the cut-off propagator and its resonance expansion."""

import math

import numpy as np
import pytest

from barriertop.core.errors import ForbiddenRadius
from barriertop.models.dynamics import PropagatorRun
from barriertop.models.operator import BumpSpec, Grid1D, Scaling, ScalingType
from barriertop.services.dynamics_service import (
    compare_expansion,
    comparison_records,
    cutoff,
    default_test_states,
    evolve,
    expansion_sum,
    first_excluded_rate,
    included_hits,
    term_norms,
)
from barriertop.services.lattice_service import pseudo_resonances
from barriertop.services.operator_service import (
    assemble_scaled,
    assemble_selfadjoint,
    find_resonances,
    riesz_projector,
    scaled_decomposition,
    spectral_decomposition,
)

H = 0.1
CHI = BumpSpec(center=0.0, plateau=1.5, support=2.7)
PSI = BumpSpec(center=1.0, plateau=0.075, support=0.15)


@pytest.fixture
def sech2_setup(sech2, sech2_data):
    """sech^2 at h = 0.1 with exterior scaling beyond R0 = 3 and the alpha = 0 projector."""
    grid = Grid1D(half_length=5.0, points=401)
    decomp = spectral_decomposition(assemble_selfadjoint(sech2, grid, H), H, grid)
    op = assemble_scaled(sech2, grid, H, 0.3, Scaling(type=ScalingType.exterior, R0=3.0, smoothing_width=1.0))
    hits = find_resonances(op, pseudo_resonances(sech2_data, H, 2.0))
    projectors = [riesz_projector(op, hit.z, 0.5 * H) for hit in hits]
    return grid, decomp, scaled_decomposition(op), hits, projectors


def _run(grid, h=H, mu=2.0, **overrides):
    params = dict(
        h=h,
        times=np.linspace(0.2, 8.0, 60) * abs(math.log(h)),
        chi_spec=CHI,
        psi_spec=PSI,
        test_states=default_test_states(grid, h, 4),
        mu=mu,
    )
    params.update(overrides)
    return PropagatorRun(**params)


def test_hermitian_evolution_is_unitary(quadratic, small_grid):
    decomp = spectral_decomposition(assemble_selfadjoint(quadratic, small_grid, H), H, small_grid)
    u0 = default_test_states(small_grid, H, 1)[0]
    assert evolve(decomp, u0, 0.0) == pytest.approx(u0, abs=1e-12)
    for t in (0.5, 3.0):
        assert np.linalg.norm(evolve(decomp, u0, t)) == pytest.approx(1.0, abs=1e-12)

    v = decomp.eigenvectors[:, 10]
    E = decomp.eigenvalues[10]
    assert evolve(decomp, v, 2.0) == pytest.approx(np.exp(-2.0j * E / H) * v, abs=1e-10)


def test_scaled_evolution_decays(sech2_setup):
    """The dual basis reconstructs the state and outgoing mass is absorbed."""
    grid, _, scaled, _, _ = sech2_setup
    u0 = default_test_states(grid, H, 1)[0] * cutoff(CHI, grid)
    assert evolve(scaled, u0, 0.0) == pytest.approx(u0, abs=1e-8)
    assert np.linalg.norm(evolve(scaled, u0, 2.0)) < np.linalg.norm(u0)


def test_default_test_states_are_normalized(small_grid):
    states = default_test_states(small_grid, H, 4)
    assert len(states) == 4
    assert [np.linalg.norm(u) for u in states] == pytest.approx([1.0] * 4)


def test_cutoff_is_a_spatial_bump(small_grid):
    chi = cutoff(CHI, small_grid)
    x = small_grid.nodes
    assert chi[np.abs(x) <= 1.5] == pytest.approx(np.ones(np.count_nonzero(np.abs(x) <= 1.5)))
    assert np.all(chi[np.abs(x) >= 2.7] == 0)


def test_first_excluded_rate_and_inclusion(sech2_setup):
    _, _, _, hits, projectors = sech2_setup
    assert first_excluded_rate([2.0], 2.0) == pytest.approx(3.0)
    assert first_excluded_rate([2.0], 4.0) == pytest.approx(5.0)

    kept, kept_projectors = included_hits(hits, projectors, [2.0], 2.0)
    assert [str(hit.alpha) for hit in kept] == ["(0)"]
    assert len(kept_projectors) == 1
    with pytest.raises(ForbiddenRadius):
        included_hits(hits, projectors, [2.0], 3.0)


def test_propagator_run_validation(small_grid):
    with pytest.raises(ValueError):
        _run(small_grid, times=np.array([1.0, 0.5]))
    with pytest.raises(ValueError):
        _run(small_grid, test_states=())


def test_expansion_terms(sech2_setup):
    """A single term decays like e^{t Im z / h}; no resonances give zero."""
    grid, _, _, hits, projectors = sech2_setup
    chi = cutoff(CHI, grid)
    w = chi * default_test_states(grid, H, 1)[0]
    assert np.all(expansion_sum([], [], chi, w, 1.0, H, [2.0]) == 0)

    z = hits[0].z
    early = term_norms(hits, projectors, chi, w, 1.0, H)["(0)"]
    late = term_norms(hits, projectors, chi, w, 2.0, H)["(0)"]
    assert late / early == pytest.approx(math.exp(z.imag / H), rel=1e-10)


def test_expansion_matches_the_propagator(sech2_setup):
    grid, decomp, scaled, hits, projectors = sech2_setup
    run = _run(grid)
    comparison = compare_expansion(run, decomp, scaled, hits, projectors, [2.0])
    log_h = abs(math.log(H))
    window = (comparison.times >= 3 * log_h) & (comparison.times <= 8 * log_h)
    assert np.all(comparison.relative_error[window] <= 0.05)
    assert comparison.onset_time is not None
    assert comparison.fitted_mu == pytest.approx(first_excluded_rate([2.0], 2.0), rel=0.2)
    assert comparison.included == [hits[0].z]
    assert np.all(comparison.error_curve >= 0)

    rows = comparison_records(comparison)
    assert len(rows) == len(run.times)
    assert set(rows[0]) == {"t", "error", "relative_error", "bound"}


def test_scaled_decomposition_is_required(sech2_setup):
    grid, decomp, _, hits, projectors = sech2_setup
    with pytest.raises(ValueError):
        compare_expansion(_run(grid), decomp, decomp, hits, projectors, [2.0])


@pytest.mark.slow
def test_sech2_expansion_at_small_h(sech2, sech2_data):
    """Relative error <= 0.05 on [3|ln h|, 8|ln h|] and the decay rate of the first excluded term."""
    h = 0.05
    grid = Grid1D(half_length=8.0, points=3201)
    decomp = spectral_decomposition(assemble_selfadjoint(sech2, grid, h), h, grid)
    op = assemble_scaled(sech2, grid, h, 0.3, Scaling(type=ScalingType.exterior, R0=4.5, smoothing_width=1.0))
    hits = find_resonances(op, pseudo_resonances(sech2_data, h, 2.0))
    projectors = [riesz_projector(op, hit.z, 0.5 * h) for hit in hits]
    run = _run(grid, h=h, chi_spec=BumpSpec(center=0.0, plateau=2.25, support=4.05))
    comparison = compare_expansion(run, decomp, scaled_decomposition(op), hits, projectors, sech2_data.lambdas)

    log_h = abs(math.log(h))
    window = (comparison.times >= 3 * log_h) & (comparison.times <= 8 * log_h)
    assert np.all(comparison.relative_error[window] <= 0.05)
    assert comparison.fitted_mu == pytest.approx(3.0, rel=0.2)
    assert comparison.relative_error[0] > 0.5
