"""Cut-off propagator chi e^{-itP/h} chi psi(P) against its resonance expansion."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from barriertop.core.config import settings
from barriertop.core.errors import NoExponentialRegime, NonSimpleResonance
from barriertop.models.dynamics import ExpansionComparison, PropagatorRun
from barriertop.models.operator import BumpSpec, Grid1D, ResonanceHit, RieszProjector, SpectralDecomposition
from barriertop.services.lattice_service import check_radius, decay_sum, decay_sums, is_simple
from barriertop.services.operator_service import bump, functional_calculus

logger = logging.getLogger(__name__)

ONSET_LEVEL = 0.05
LINEARITY_R2 = 0.9
ERROR_FLOOR = 1e-13
# fit points must clear the rounding level of the modal sum by this factor
NOISE_MARGIN = 100.0


def modal_coefficients(decomp: SpectralDecomposition, u0: np.ndarray) -> np.ndarray:
    U = decomp.eigenvectors
    return U.conj().T @ u0 if decomp.dual is None else decomp.dual @ u0


def evolve(
    decomp: SpectralDecomposition, u0: np.ndarray, t: float, coefficients: Optional[np.ndarray] = None
) -> np.ndarray:
    """e^{-itP/h} u0 through the eigendecomposition.

    A decomposition of P_theta evolves with the cut-off propagator as long as u0
    and the observation region stay where the contour is real.
    """
    if coefficients is None:
        coefficients = modal_coefficients(decomp, u0)
    phases = np.exp(-1j * t * decomp.eigenvalues / decomp.h)
    return decomp.eigenvectors @ (phases * coefficients)


def cutoff(spec: BumpSpec, grid: Grid1D) -> np.ndarray:
    """Spatial bump chi sampled on the grid nodes."""
    return bump(spec, grid.nodes)


def expansion_sum(
    hits: Sequence[ResonanceHit],
    projectors: Sequence[RieszProjector],
    chi: np.ndarray,
    w: np.ndarray,
    t: float,
    h: float,
    lambdas: Sequence[float],
) -> np.ndarray:
    """sum_alpha e^{-itz_alpha/h} chi Pi_alpha w for w = chi psi(P) u0 and simple z_alpha."""
    out = np.zeros(len(chi), dtype=complex)
    for hit, proj in zip(hits, projectors):
        if not is_simple(hit.alpha.alpha, lambdas):
            raise NonSimpleResonance("expansion needs simple resonances", {"alpha": str(hit.alpha)})
        out += np.exp(-1j * t * hit.z / h) * (chi * (proj.matrix @ w))
    return out


def term_norms(
    hits: Sequence[ResonanceHit],
    projectors: Sequence[RieszProjector],
    chi: np.ndarray,
    w: np.ndarray,
    t: float,
    h: float,
) -> Dict[str, float]:
    """Norm of each resonance term at time t, keyed by alpha."""
    return {
        str(hit.alpha): float(np.linalg.norm(np.exp(-1j * t * hit.z / h) * (chi * (proj.matrix @ w))))
        for hit, proj in zip(hits, projectors)
    }


def included_hits(
    hits: Sequence[ResonanceHit],
    projectors: Sequence[RieszProjector],
    lambdas: Sequence[float],
    mu: float,
) -> Tuple[List[ResonanceHit], List[RieszProjector]]:
    """Resonances whose lattice decay sum lies below the strip depth mu."""
    check_radius(lambdas, mu)
    keep = [(hit, proj) for hit, proj in zip(hits, projectors) if decay_sum(hit.alpha.alpha, lambdas) < mu]
    return [k[0] for k in keep], [k[1] for k in keep]


def default_test_states(grid: Grid1D, h: float, count: int = 4) -> Tuple[np.ndarray, ...]:
    """Gaussian packets of width sqrt(h) spread over the apex region."""
    x = grid.nodes
    centers = np.linspace(-0.5, 0.5, count)
    momenta = np.linspace(-0.5, 0.5, count)[::-1]
    states = []
    for x0, p0 in zip(centers, momenta):
        u = np.exp(-((x - x0) ** 2) / (2 * h) + 1j * p0 * x / h)
        states.append(u / np.linalg.norm(u))
    return tuple(states)


def _fit_exponential(times: np.ndarray, errors: np.ndarray, h: float) -> Tuple[float, float, float]:
    """log error = -mu t + K |ln h|, returning (mu, K, r^2)."""
    logs = np.log(errors)
    slope, intercept = np.polyfit(times, logs, 1)
    predicted = slope * times + intercept
    spread = np.sum((logs - logs.mean()) ** 2)
    r2 = 1.0 - np.sum((logs - predicted) ** 2) / spread if spread > 0 else 0.0
    return float(-slope), float(intercept / abs(math.log(h))), float(r2)


def compare_expansion(
    run: PropagatorRun,
    decomp: SpectralDecomposition,
    scaled: SpectralDecomposition,
    hits: Sequence[ResonanceHit],
    projectors: Sequence[RieszProjector],
    lambdas: Sequence[float],
    fit_range: Optional[Tuple[float, float]] = None,
) -> ExpansionComparison:
    """Error curve of the truncated resonance expansion with a log-linear fit of its decay.

    decomp is the Hermitian decomposition used for psi(P); scaled is the
    decomposition of P_theta on the same grid, which evolves the cut-off states.
    """
    if decomp.grid is None:
        raise ValueError("spectral decomposition needs its grid")
    if scaled.dual is None or scaled.eigenvectors.shape != decomp.eigenvectors.shape:
        raise ValueError("scaled decomposition must come from P_theta on the same grid")
    lambdas = np.asarray(lambdas, dtype=float)
    hits, projectors = included_hits(hits, projectors, lambdas, run.mu)
    h = run.h
    chi = cutoff(run.chi_spec, decomp.grid)
    psiP = functional_calculus(decomp, run.psi_spec)
    filtered = [chi * (psiP @ u) for u in run.test_states]
    coefficients = [modal_coefficients(scaled, w) for w in filtered]
    norms = [float(np.linalg.norm(u)) for u in run.test_states]

    eps = np.finfo(float).eps

    def sample(t: float) -> Tuple[float, float, float, float, float]:
        worst_abs, worst_rel, lhs_max, sum_max, noise = 0.0, 0.0, 0.0, 0.0, 0.0
        decay = np.exp(t * scaled.eigenvalues.imag / h)
        for w, c, norm in zip(filtered, coefficients, norms):
            lhs = chi * evolve(scaled, w, t, c)
            rhs = expansion_sum(hits, projectors, chi, w, t, h, lambdas)
            diff = float(np.linalg.norm(lhs - rhs))
            lhs_norm = float(np.linalg.norm(lhs))
            worst_abs = max(worst_abs, diff / norm)
            worst_rel = max(worst_rel, diff / lhs_norm if lhs_norm > 0 else math.inf)
            lhs_max = max(lhs_max, lhs_norm / norm)
            sum_max = max(sum_max, float(np.linalg.norm(rhs)) / norm)
            noise = max(noise, eps * float(np.sum(np.abs(c) * decay)) / norm)
        return worst_abs, worst_rel, lhs_max, sum_max, noise

    with ThreadPoolExecutor(max_workers=max(1, settings.THREADS)) as pool:
        rows = np.array(list(pool.map(sample, run.times)))
    error, relative, lhs_norm, sum_norm, noise = rows.T

    below = np.flatnonzero(relative <= ONSET_LEVEL)
    onset = float(run.times[below[0]]) if len(below) else None

    fit_start = 2.0 * abs(math.log(h)) / float(lambdas.min())
    lo, hi = fit_range if fit_range is not None else (fit_start, float(run.times[-1]))
    usable = (run.times >= max(lo, fit_start)) & (run.times <= hi)
    usable &= (error > ERROR_FLOOR) & (error > NOISE_MARGIN * noise)

    fitted_mu = fitted_K = None
    if np.count_nonzero(usable) >= 3:
        fitted_mu, fitted_K, r2 = _fit_exponential(run.times[usable], error[usable], h)
        if r2 < LINEARITY_R2 or fitted_mu <= 0:
            fitted_mu = fitted_K = None

    comparison = ExpansionComparison(
        times=np.asarray(run.times, dtype=float),
        error_curve=error,
        relative_error=relative,
        lhs_norm=lhs_norm,
        sum_norm=sum_norm,
        noise_floor=noise,
        fitted_mu=fitted_mu,
        fitted_K=fitted_K,
        onset_time=onset,
        fit_start=fit_start,
        included=[hit.z for hit in hits],
        log_inverse_h=abs(math.log(h)),
    )
    if fitted_mu is None:
        failure = NoExponentialRegime(
            "log error curve has no linear stretch after 2|ln h|/lambda_1",
            {"fit_start": fit_start, "points": int(np.count_nonzero(usable))},
        )
        # the command still writes the curve
        failure.comparison = comparison
        raise failure
    logger.debug(
        "expansion with %d resonances at h=%g: mu_fit=%.3f K_fit=%.3f onset=%s",
        len(hits), h, fitted_mu, fitted_K, onset,
    )
    return comparison


def first_excluded_rate(lambdas: Sequence[float], mu: float) -> float:
    """Smallest lattice decay sum above mu."""
    lambdas = np.asarray(lambdas, dtype=float)
    bound = mu + float(lambdas.max()) + 0.5 * float(np.sum(lambdas))
    rates = [value for value in decay_sums(lambdas, bound) if value > mu]
    return float(min(rates))


def comparison_records(comparison: ExpansionComparison) -> List[dict]:
    bound = comparison.bound()
    return [
        {"t": float(t), "error": float(e), "relative_error": float(r), "bound": float(b)}
        for t, e, r, b in zip(comparison.times, comparison.error_curve, comparison.relative_error, bound)
    ]
