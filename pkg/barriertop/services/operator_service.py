"""Discretized P and its complex-scaled distortion P_theta on 1-D grids.

Assembly goes through the bilinear form

    a(u, v) = h^2 int u' v' / J dy + int V(x(y)) u v J dy,   m(u, v) = int u v J dy,

on the contour x(y) with J = dx/dy, so that W P_theta is symmetric for the
diagonal weight matrix W = diag(J) dy.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.fft
import scipy.linalg as la
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from barriertop.core.config import settings
from barriertop.core.errors import (
    ContourTooClose,
    InvalidScaling,
    NoConvergence,
    QuadratureDivergence,
    ResolutionWarning,
    SectorUncovered,
    SingularResolventWarning,
)
from barriertop.models.lattice import MultiIndex, PseudoResonance
from barriertop.models.operator import (
    BumpSpec,
    Discretization,
    Grid1D,
    ResonanceHit,
    RieszProjector,
    ScaledOperator,
    Scaling,
    ScalingType,
    SpectralDecomposition,
)
from barriertop.models.potential import Potential
from barriertop.services.potential_service import potential_values

logger = logging.getLogger(__name__)

# staggered first-derivative stencils: offsets relative to the left node
_STENCILS = {
    Discretization.fd2: ((0, -1.0), (1, 1.0)),
    Discretization.fd4: ((-1, 1.0 / 24), (0, -27.0 / 24), (1, 27.0 / 24), (2, -1.0 / 24)),
}

# eigenvalues must stay this fraction of the radius away from a Riesz contour
MARGIN_FRACTION = 0.1


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step from 0 (t <= 0) to 1 (t >= 1) built from exp(-1/t)."""
    t = np.asarray(t, dtype=float)

    def f(s):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)

    a, b = f(t), f(1.0 - t)
    return a / (a + b)


def smooth_step_derivative(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    out = np.zeros_like(t)
    s = t[inside]
    a, b = np.exp(-1.0 / s), np.exp(-1.0 / (1.0 - s))
    da, db = a / s**2, -b / (1.0 - s) ** 2
    out[inside] = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return out


def distortion(grid_points: np.ndarray, theta: float, scaling: Scaling) -> Tuple[np.ndarray, np.ndarray]:
    """Contour x(y) and its Jacobian J(y) = x'(y)."""
    y = np.asarray(grid_points, dtype=float)
    if theta == 0:
        return y.astype(complex), np.ones_like(y, dtype=complex)
    if scaling.type == ScalingType.uniform:
        rot = np.exp(1j * theta)
        return rot * y, np.full_like(y, rot, dtype=complex)
    # exterior: F = 0 on |y| <= R0, F = y on |y| >= R0 + width
    s = (np.abs(y) - scaling.R0) / scaling.smoothing_width
    step = smooth_step(s)
    F = y * step
    dF = step + np.abs(y) * smooth_step_derivative(s) / scaling.smoothing_width
    return y + 1j * theta * F, 1.0 + 1j * theta * dF


def _derivative_matrix(grid: Grid1D, discretization: Discretization) -> sparse.csr_matrix:
    """Staggered derivative from nodes to the N + 1 midpoints, zero ghosts."""
    n = grid.points
    stencil = _STENCILS[discretization]
    rows, cols, vals = [], [], []
    # midpoint m sits between nodes m - 1 and m
    for m in range(n + 1):
        left = m - 1
        for offset, weight in stencil:
            j = left + offset
            if 0 <= j < n:
                rows.append(m)
                cols.append(j)
                vals.append(weight / grid.spacing)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n + 1, n))


def _sine_laplacian(grid: Grid1D) -> np.ndarray:
    """-d^2/dy^2 in the Dirichlet sine basis."""
    n = grid.points
    S = scipy.fft.dst(np.eye(n), type=1, norm="ortho", axis=0)
    k = np.arange(1, n + 1)
    kappa = np.pi * k / ((n + 1) * grid.spacing)
    return (S * kappa**2) @ S


def _check_resolution(pot: Potential, grid: Grid1D, h: float) -> None:
    limit = h / (4.0 * math.sqrt(max(pot.height, 1e-300)))
    if grid.spacing > limit:
        warnings.warn(
            f"grid spacing {grid.spacing:.3g} exceeds h/(4 sqrt(E0)) = {limit:.3g}",
            ResolutionWarning,
            stacklevel=3,
        )


def _assemble(
    pot: Potential,
    grid: Grid1D,
    h: float,
    contour: np.ndarray,
    jac: np.ndarray,
    mid_jac: np.ndarray,
    discretization: Discretization,
):
    values = potential_values(pot, contour)
    if discretization == Discretization.fourier:
        if not np.allclose(jac, jac[0]):
            raise InvalidScaling("fourier discretization only supports constant Jacobians")
        kinetic = (h**2 / jac[0] ** 2) * _sine_laplacian(grid)
        return kinetic + np.diag(values)

    G = _derivative_matrix(grid, discretization)
    if np.all(np.imag(jac) == 0) and np.all(np.real(jac) == 1):
        stiffness = (h**2) * (G.T @ G)
        return (stiffness + sparse.diags(values)).tocsr()
    stiffness = (h**2) * (G.T @ sparse.diags(1.0 / mid_jac) @ G)
    return (sparse.diags(1.0 / jac) @ stiffness + sparse.diags(values)).tocsr()


def assemble_selfadjoint(
    pot: Potential,
    grid: Grid1D,
    h: float,
    discretization: Discretization = Discretization.fd4,
):
    """Real symmetric matrix of P = -h^2 d^2/dx^2 + V with Dirichlet boundary."""
    if h <= 0:
        raise ValueError("h must be positive")
    _check_resolution(pot, grid, h)
    y = grid.nodes
    return _assemble(pot, grid, h, y, np.ones_like(y), np.ones(grid.points + 1), Discretization(discretization))


def assemble_scaled(
    pot: Potential,
    grid: Grid1D,
    h: float,
    theta: float,
    scaling: Scaling = Scaling(),
    discretization: Discretization = Discretization.fd4,
) -> ScaledOperator:
    """P_theta on the distorted contour x(y)."""
    discretization = Discretization(discretization)
    if scaling.type == ScalingType.exterior and scaling.R0 + scaling.smoothing_width >= grid.half_length:
        raise InvalidScaling(
            "exterior scaling needs R0 + smoothing width < L",
            {"R0": scaling.R0, "L": grid.half_length},
        )
    y = grid.nodes
    if theta == 0:
        matrix = assemble_selfadjoint(pot, grid, h, discretization)
        matrix = matrix.astype(complex)
        contour, jac = y.astype(complex), np.ones_like(y, dtype=complex)
    else:
        _check_resolution(pot, grid, h)
        contour, jac = distortion(y, theta, scaling)
        _, mid_jac = distortion(grid.midpoints, theta, scaling)
        matrix = _assemble(pot, grid, h, contour, jac, mid_jac, discretization)
    return ScaledOperator(
        theta=theta,
        scaling=scaling,
        matrix=matrix,
        h=h,
        discretization=discretization,
        grid=grid,
        contour=contour,
        weights=jac * grid.spacing,
    )


class _Shifted:
    """LU factorization of P_theta - z, sparse or dense."""

    def __init__(self, op: ScaledOperator, z: complex):
        self.n = op.size
        if sparse.issparse(op.matrix):
            A = (op.matrix - z * sparse.identity(self.n, dtype=complex, format="csr")).tocsc()
            self._lu = spla.splu(A)
            self.solve = self._lu.solve
            self.solve_h = lambda b: self._lu.solve(b, trans="H")
        else:
            A = op.dense() - z * np.eye(self.n)
            self._lu = la.lu_factor(A)
            self.solve = lambda b: la.lu_solve(self._lu, b)
            self.solve_h = lambda b: la.lu_solve(self._lu, b, trans=2)


def _bilinear(op: ScaledOperator, u: np.ndarray, v: np.ndarray) -> complex:
    return complex(np.sum(op.weights * u * v))


def _rayleigh(op: ScaledOperator, v: np.ndarray) -> complex:
    # W P_theta is symmetric, so the bilinear Rayleigh quotient is stationary
    return _bilinear(op, v, op.matrix @ v) / _bilinear(op, v, v)


def _start_vector(op: ScaledOperator) -> np.ndarray:
    rng = np.random.default_rng(20240917)
    return rng.standard_normal(op.size) + 1j * rng.standard_normal(op.size)


def check_sector(op: ScaledOperator, shifts: Sequence[PseudoResonance]) -> None:
    slope = math.tan(2 * op.rotation)
    for p in shifts:
        if not abs(p.z0.imag) < p.z0.real * slope:
            raise SectorUncovered(
                "shift not uncovered by the rotated essential spectrum",
                {"alpha": str(p.alpha), "z0": p.z0, "theta": op.theta},
            )


def _inverse_iteration(op: ScaledOperator, shift: PseudoResonance, tol: float, match_limit: float) -> ResonanceHit:
    lu = _Shifted(op, shift.z0)
    v = _start_vector(op)
    v /= np.linalg.norm(v)
    z = shift.z0
    for it in range(1, settings.MAX_INVERSE_ITERATIONS + 1):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
        z = _rayleigh(op, v)
        residual = np.linalg.norm(op.matrix @ v - z * v)
        if residual <= tol * max(1.0, abs(z)):
            distance = abs(z - shift.z0) / op.h
            logger.debug("shift %s converged in %d steps: z=%s residual=%.2e", shift.alpha, it, z, residual)
            return ResonanceHit(
                z=complex(z),
                alpha=shift.alpha,
                right_vector=v,
                residual=float(residual),
                match_distance=float(distance),
                shift=shift.z0,
                iterations=it,
                flagged=distance > match_limit or z.imag > 0,
            )
    raise NoConvergence(
        "inverse iteration did not converge",
        {"alpha": str(shift.alpha), "shift": shift.z0, "residual": float(residual)},
    )


def find_resonances(
    op: ScaledOperator,
    shifts: Sequence[PseudoResonance],
    tol: Optional[float] = None,
    match_limit: float = 1.0,
) -> List[ResonanceHit]:
    """Shift-invert iteration at every lattice shift, deduplicated."""
    tol = settings.SOLVER_TOL if tol is None else tol
    check_sector(op, shifts)

    with ThreadPoolExecutor(max_workers=max(1, settings.THREADS)) as pool:
        hits = list(pool.map(lambda s: _inverse_iteration(op, s, tol, match_limit), shifts))

    unique: List[ResonanceHit] = []
    for hit in sorted(hits, key=lambda hh: hh.match_distance):
        if any(abs(hit.z - other.z) <= 1e-8 * max(1.0, abs(hit.z)) for other in unique):
            logger.debug("dropping duplicate hit for shift %s", hit.alpha)
            continue
        unique.append(hit)
    unique.sort(key=lambda hh: -hh.z.imag)
    return unique


def dense_resonances(
    op: ScaledOperator,
    center: complex,
    radius: float,
    residual_tol: float = 1e-6,
) -> np.ndarray:
    """Eigenvalues of the dense matrix inside a disc, residual filtered."""
    A = op.dense()
    values, vectors = la.eig(A)
    keep = np.abs(values - center) <= radius
    out = []
    for z, v in zip(values[keep], vectors[:, keep].T):
        res = np.linalg.norm(A @ v - z * v) / np.linalg.norm(v)
        if res <= residual_tol * max(1.0, abs(z)):
            out.append(z)
    return np.array(sorted(out, key=lambda z: -z.imag))


def resolvent_norm(op: ScaledOperator, z: complex) -> float:
    """1 / sigma_min(P_theta - z), capped at RESOLVENT_CAP."""
    cap = settings.RESOLVENT_CAP
    try:
        lu = _Shifted(op, z)
    except (RuntimeError, la.LinAlgError):
        warnings.warn(f"P_theta - z singular at z={z}", SingularResolventWarning, stacklevel=2)
        return cap
    n = op.size
    if n <= 256:
        sigma = la.svdvals(op.dense() - z * np.eye(n))[-1]
        norm = 1.0 / sigma if sigma > 0 else math.inf
    else:
        inverse = spla.LinearOperator((n, n), matvec=lu.solve, rmatvec=lu.solve_h, dtype=complex)
        norm = float(spla.svds(inverse, k=1, return_singular_vectors=False, random_state=0)[0])
    if not np.isfinite(norm) or norm >= cap:
        warnings.warn(f"resolvent norm capped at z={z}", SingularResolventWarning, stacklevel=2)
        return cap
    return float(norm)


def scan_resolvent(
    op: ScaledOperator,
    resonances: Sequence[complex],
    re_range: Tuple[float, float],
    im_range: Tuple[float, float],
    shape: Tuple[int, int] = (40, 20),
) -> List[Dict[str, float]]:
    """Resolvent norms on a z-grid with the product prod |z - z_alpha|."""
    res = np.asarray(resonances, dtype=complex)
    zs = [complex(a, b) for b in np.linspace(*im_range, shape[1]) for a in np.linspace(*re_range, shape[0])]

    def sample(z):
        norm = resolvent_norm(op, z)
        product = float(np.prod(np.abs(z - res))) if len(res) else 1.0
        return {"re_z": z.real, "im_z": z.imag, "norm": norm, "bound_product": norm * product}

    with ThreadPoolExecutor(max_workers=max(1, settings.THREADS)) as pool:
        return list(pool.map(sample, zs))


def fit_resolvent_exponent(scans: Dict[float, List[Dict[str, float]]]) -> Dict[str, object]:
    """K(h) with sup_z ||R(z)|| prod |z - z_alpha| = h^{-K}."""
    exponents = {}
    for h, rows in scans.items():
        sup = max(r["bound_product"] for r in rows if r["norm"] < settings.RESOLVENT_CAP)
        exponents[h] = -math.log(sup) / math.log(h)
    values = list(exponents.values())
    spread = (max(values) - min(values)) / max(abs(v) for v in values) if len(values) > 1 else 0.0
    return {"K": exponents, "relative_spread": spread}


def _eigenvalues_near(op: ScaledOperator, center: complex, reach: float) -> np.ndarray:
    """Eigenvalues of P_theta within ``reach`` of ``center``, by shift-invert Arnoldi."""
    n = op.size
    if n <= 256:
        values = la.eigvals(op.dense())
        return values[np.abs(values - center) <= reach]
    try:
        lu = _Shifted(op, center)
    except (RuntimeError, la.LinAlgError):
        center = center + 1e-3 * reach
        lu = _Shifted(op, center)
    inverse = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
    k = 6
    while True:
        k = min(k, n - 2)
        mu = spla.eigs(inverse, k=k, which="LM", return_eigenvectors=False, v0=_start_vector(op))
        values = center + 1.0 / mu
        # the k nearest eigenvalues are known; stop once one of them lies beyond reach
        if np.max(np.abs(values - center)) > reach or k == n - 2:
            return values[np.abs(values - center) <= reach]
        k *= 2


def riesz_projector(
    op: ScaledOperator,
    center: complex,
    radius: float,
    n_quad: int = 32,
    check_margin: bool = True,
) -> RieszProjector:
    """-(2 pi i)^{-1} contour integral of the resolvent, trapezoidal rule.

    The rule with 2 n_quad nodes is evaluated as well; the returned matrix is
    the finer one and the change between the two is the divergence check.
    """
    n = op.size
    phis = 2 * np.pi * np.arange(2 * n_quad) / (2 * n_quad)
    nodes = center + radius * np.exp(1j * phis)

    if check_margin:
        margin = MARGIN_FRACTION * radius
        values = _eigenvalues_near(op, complex(center), radius + margin)
        gaps = np.abs(np.abs(values - center) - radius)
        if len(gaps) and gaps.min() < margin:
            worst = int(np.argmin(gaps))
            raise ContourTooClose(
                "contour passes within radius/10 of an eigenvalue",
                {"eigenvalue": complex(values[worst]), "gap": float(gaps[worst]), "radius": float(radius)},
            )

    coarse = np.zeros((n, n), dtype=complex)
    fine = np.zeros((n, n), dtype=complex)
    eye = np.eye(n, dtype=complex)
    for k, zeta in enumerate(nodes):
        lu = _Shifted(op, zeta)
        term = radius * np.exp(1j * phis[k]) * lu.solve(eye)
        fine -= term / (2 * n_quad)
        if k % 2 == 0:
            coarse -= term / n_quad

    norm = float(np.linalg.norm(fine))
    change = float(np.linalg.norm(fine - coarse))
    if norm > 1e-8 and change > 1e-6 * norm:
        raise QuadratureDivergence(
            "doubling the quadrature changed the projector",
            {"relative_change": change / norm, "n_quad": n_quad},
        )

    if norm > 1e-8:
        sigma = _leading_singular_values(fine)
        rank_gap = float(sigma[1] / sigma[0])
        trial = _start_vector(op)
        image = fine @ trial
        defect = float(np.linalg.norm(fine @ image - image) / np.linalg.norm(image))
        enclosed = int(round(np.trace(fine).real))
    else:
        rank_gap, defect, enclosed = 0.0, 0.0, 0

    logger.debug("projector at %s: norm=%.3e rank_gap=%.2e defect=%.2e", center, norm, rank_gap, defect)
    return RieszProjector(
        center=complex(center),
        radius=float(radius),
        n_quad=n_quad,
        matrix=fine,
        rank_gap=rank_gap,
        norm=norm,
        idempotency_defect=defect,
        quadrature_change=change / norm if norm > 1e-8 else change,
        enclosed=enclosed,
    )


def _leading_singular_values(M: np.ndarray) -> np.ndarray:
    if M.shape[0] <= 512:
        return la.svdvals(M)[:2]
    return np.sort(spla.svds(M, k=2, return_singular_vectors=False, random_state=0))[::-1]


def bump(spec: BumpSpec, energies: np.ndarray) -> np.ndarray:
    """Smooth cutoff equal to 1 on the plateau and 0 outside the support."""
    d = np.abs(np.asarray(energies, dtype=float) - spec.center)
    t = (spec.support - d) / (spec.support - spec.plateau)
    return smooth_step(t)


def spectral_decomposition(P, h: float = 0.0, grid: Optional[Grid1D] = None) -> SpectralDecomposition:
    """Full Hermitian eigendecomposition of a self-adjoint assembly."""
    A = P.toarray() if sparse.issparse(P) else np.asarray(P)
    values, vectors = la.eigh(A)
    return SpectralDecomposition(eigenvalues=values, eigenvectors=vectors, h=h, grid=grid)


def scaled_decomposition(op: ScaledOperator) -> SpectralDecomposition:
    """Right eigenvectors of P_theta with the dual rows from the left eigenvectors."""
    values, left, right = la.eig(op.dense(), left=True, right=True)
    pairing = np.einsum("ij,ij->j", left.conj(), right)
    tiny = np.abs(pairing) <= 1e-12 * np.linalg.norm(left, axis=0) * np.linalg.norm(right, axis=0)
    if np.any(tiny):
        logger.warning("%d nearly defective eigenvalues in the scaled decomposition", int(np.count_nonzero(tiny)))
    dual = left.conj().T / pairing[:, None]
    return SpectralDecomposition(eigenvalues=values, eigenvectors=right, h=op.h, grid=op.grid, dual=dual)


def functional_calculus(Pherm, psi_spec: BumpSpec) -> np.ndarray:
    """psi(P) for a smooth bump psi."""
    decomp = Pherm if isinstance(Pherm, SpectralDecomposition) else spectral_decomposition(Pherm)
    weights = bump(psi_spec, decomp.eigenvalues)
    U = decomp.eigenvectors
    return (U * weights) @ U.T.conj()


def inverted_oscillator_resonances(E0: float, lam: float, h: float, kmax: int) -> List[complex]:
    """Exact resonances E0 - i h lam (k + 1/2) of the inverted oscillator."""
    return [complex(E0, -h * lam * (k + 0.5)) for k in range(kmax + 1)]


def certify_box(
    pot: Potential,
    grid: Grid1D,
    h: float,
    theta: float,
    shifts: Sequence[PseudoResonance],
    scaling: Scaling = Scaling(),
    discretization: Discretization = Discretization.fd4,
    tol: Optional[float] = None,
) -> Dict[str, object]:
    """Resonance drift when the box half-length is doubled at fixed spacing."""
    base = find_resonances(assemble_scaled(pot, grid, h, theta, scaling, discretization), shifts, tol)
    wide = find_resonances(assemble_scaled(pot, grid.doubled(), h, theta, scaling, discretization), shifts, tol)
    drift = {}
    for hit in base:
        nearest = min(wide, key=lambda w: abs(w.z - hit.z))
        drift[str(hit.alpha)] = abs(nearest.z - hit.z)
    worst = max(drift.values()) if drift else 0.0
    return {"drift": drift, "max_drift": worst, "stable": worst <= 1e-6}


def hits_by_alpha(hits: Sequence[ResonanceHit]) -> Dict[MultiIndex, ResonanceHit]:
    return {hit.alpha: hit for hit in hits}


def stray_eigenvalues(
    op: ScaledOperator,
    E0: float,
    width: float,
    depth: float,
    disc: float,
    residual_tol: float = 1e-6,
) -> np.ndarray:
    """Eigenvalues in ([E0 - width, E0 + width] + i[-depth h, 0]) outside the disc D(E0, disc h)."""
    h = op.h
    center = complex(E0, -0.5 * depth * h)
    radius = math.hypot(width, 0.5 * depth * h)
    values = dense_resonances(op, center, radius, residual_tol)
    inside = (
        (np.abs(values.real - E0) <= width)
        & (values.imag <= 0)
        & (values.imag >= -depth * h)
        & (np.abs(values - E0) > disc * h)
    )
    found = values[inside]
    if len(found):
        logger.debug("stray eigenvalues in the resonance-free zone: %s", found)
    return found
