"""Resonant states and the constant c in Pi = c (., conj f) f.

The pairing (u, conj v) is the bilinear form sum W u v with the contour
weights W = J dy, so the kernel of Pi against it is K = Pi W^{-1} and equals
c f(x) f(y).
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np

from barriertop.core.errors import (
    InconsistentFactorization,
    InvalidScaling,
    NormalizationDegenerate,
    RankDeficiency,
    WindowInClassicallyForbiddenRegion,
)
from barriertop.models.geometry import GeneratingFunction
from barriertop.models.lattice import MultiIndex
from barriertop.models.operator import RieszProjector, ScaledOperator, Scaling, ScalingType
from barriertop.models.potential import BarrierData, Potential
from barriertop.models.projection import OutgoingReport, ProjectionConstant, ResonantState
from barriertop.services.lattice_service import is_simple
from barriertop.services.potential_service import barrier_deficit

logger = logging.getLogger(__name__)

RANK_GAP_TOL = 1e-6
DEGENERATE_RATIO = 1e-6
CONSISTENCY_TOL = 1e-4
PROBES = 8
REAL_TOL = 1e-14


def _undistorted(op: ScaledOperator) -> np.ndarray:
    return np.abs(op.contour.imag) <= REAL_TOL


def _taylor_coefficient(
    samples: np.ndarray,
    x: np.ndarray,
    phi_plus: GeneratingFunction,
    alpha: MultiIndex,
    h: float,
) -> tuple:
    """Fit f e^{-i phi_+/h} on |x| <= h^{1/3} by a polynomial of degree |alpha| + 2."""
    width = h ** (1.0 / 3.0)
    inside = np.abs(x) <= width
    order = alpha.order
    if np.count_nonzero(inside) < 2 * (order + 3):
        raise NormalizationDegenerate("too few grid points in the Taylor window", {"width": width})
    xs = x[inside]
    d = samples[inside] * np.exp(-1j * phi_plus(xs) / h)
    # fit in s = x / width for conditioning
    coeffs = np.polynomial.polynomial.polyfit(xs / width, d, order + 2)
    a = coeffs[order] / width**order
    return a, d, xs, width


def extract_state(
    proj: RieszProjector,
    op: ScaledOperator,
    phi_plus: GeneratingFunction,
    alpha: Sequence[int],
    lambdas: Sequence[float],
) -> ResonantState:
    """Rank-one factor f of Pi, scaled so the alpha-th Taylor coefficient of f e^{-i phi_+/h} is 1."""
    alpha = alpha if isinstance(alpha, MultiIndex) else MultiIndex(tuple(alpha))
    h = op.h
    if not is_simple(alpha.alpha, lambdas):
        raise RankDeficiency("lattice point is not simple", {"alpha": str(alpha)})
    if proj.norm <= 1e-8 or proj.rank_gap > RANK_GAP_TOL:
        raise RankDeficiency(
            "projector is not rank one",
            {"rank_gap": proj.rank_gap, "norm": proj.norm, "center": proj.center},
        )

    real = _undistorted(op)
    if not np.all(real[np.abs(op.contour.real) <= h ** (1.0 / 3.0)]):
        raise InvalidScaling("the Taylor window must lie in the undistorted region", {"theta": op.theta})

    column = int(np.argmax(np.linalg.norm(proj.matrix, axis=0)))
    f = proj.matrix[:, column].copy()
    x = op.contour.real

    a, d, xs, width = _taylor_coefficient(f, x, phi_plus, alpha, h)
    window_norm = float(np.max(np.abs(d)))
    if abs(a) * width ** alpha.order < DEGENERATE_RATIO * window_norm:
        raise NormalizationDegenerate(
            "alpha-th Taylor coefficient vanishes; wrong alpha or wrong resonance",
            {"alpha": str(alpha), "coefficient": abs(a)},
        )
    f = f / a
    d = d / a
    defect = float(np.max(np.abs(d - xs**alpha.order)))

    W = op.weights
    Pf = op.matrix @ f
    z = complex(np.sum(W * f * Pf) / np.sum(W * f * f))
    residual = float(np.linalg.norm(Pf - z * f) / np.linalg.norm(f))
    if residual > 1e-6:
        logger.warning("resonant state residual %.2e at alpha=%s", residual, alpha)
    logger.debug("state alpha=%s h=%g: z=%s residual=%.2e taylor defect=%.2e", alpha, h, z, residual, defect)
    return ResonantState(
        samples=f,
        contour=op.contour,
        h=h,
        alpha=alpha,
        z=z,
        normalization={"coefficient_re": float(a.real), "coefficient_im": float(a.imag), "window": width, "taylor_defect": defect},
        residual=residual,
    )


def renormalize(state: ResonantState, phi_plus: GeneratingFunction) -> ResonantState:
    """Apply the Taylor condition again; a normalized state is returned unchanged up to rounding."""
    x = state.contour.real
    a, *_ = _taylor_coefficient(state.samples, x, phi_plus, state.alpha, state.h)
    return ResonantState(
        samples=state.samples / a,
        contour=state.contour,
        h=state.h,
        alpha=state.alpha,
        z=state.z,
        normalization=dict(state.normalization),
        residual=state.residual,
    )


def predicted_constant(alpha: Sequence[int], lambdas: Sequence[float], h: float) -> complex:
    """h^{-|alpha|-n/2} (alpha!)^{-1} (2 pi)^{-n/2} prod lambda_j^{alpha_j+1/2} e^{-i pi (|alpha| + n/2)/2}."""
    alpha = alpha if isinstance(alpha, MultiIndex) else MultiIndex(tuple(alpha))
    lambdas = np.asarray(lambdas, dtype=float)
    n = len(lambdas)
    order = alpha.order
    modulus = (
        h ** (-order - n / 2.0)
        / alpha.factorial
        * (2 * math.pi) ** (-n / 2.0)
        * float(np.prod(lambdas ** (np.asarray(alpha.alpha) + 0.5)))
    )
    return modulus * complex(np.exp(-0.5j * math.pi * (order + n / 2.0)))


def kernel(proj: RieszProjector, op: ScaledOperator) -> np.ndarray:
    return proj.matrix / op.weights[None, :]


def kernel_symmetry(proj: RieszProjector, op: ScaledOperator) -> float:
    """max |K - K^T| / max |K| for the weighted kernel."""
    K = kernel(proj, op)
    return float(np.max(np.abs(K - K.T)) / np.max(np.abs(K)))


def extract_constant(
    proj: RieszProjector,
    state: ResonantState,
    op: ScaledOperator,
    lambdas: Sequence[float],
    seed: int = 0,
) -> ProjectionConstant:
    """c = K(x0, x0) / f(x0)^2 averaged where |f| is in its top decile."""
    f = state.samples
    K = kernel(proj, op)
    magnitude = np.abs(f)
    top = np.flatnonzero(magnitude >= np.quantile(magnitude, 0.9))
    c = complex(np.mean(np.diag(K)[top] / f[top] ** 2))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(PROBES):
        v = rng.standard_normal(len(f)) + 1j * rng.standard_normal(len(f))
        image = proj.matrix @ v
        model = c * np.sum(op.weights * v * f) * f
        worst = max(worst, float(np.linalg.norm(image - model) / np.linalg.norm(image)))
    if worst > CONSISTENCY_TOL:
        raise InconsistentFactorization(
            "Pi v differs from c (v, conj f) f",
            {"relative_defect": worst, "alpha": str(state.alpha)},
        )

    predicted = predicted_constant(state.alpha, lambdas, state.h)
    ratio = abs(c) / abs(predicted)
    gap = float(np.angle(c / predicted))
    logger.debug("constant alpha=%s h=%g: c=%s ratio=%.4f phase gap=%.4f", state.alpha, state.h, c, ratio, gap)
    return ProjectionConstant(
        c_num=c,
        h=state.h,
        alpha=state.alpha,
        predicted=predicted,
        modulus_ratio=float(ratio),
        phase_gap=gap,
        consistency=worst,
    )


def verify_outgoing(
    samples: np.ndarray,
    x: np.ndarray,
    h: float,
    pot: Potential,
    barrier: BarrierData,
    phi_plus: GeneratingFunction,
    R: float,
    half_width: float = 0.5,
    scaling: Optional[Scaling] = None,
) -> OutgoingReport:
    """Split f near x = -R and x = +R into the branches e^{+- i phi_+/h}.

    With a ``scaling`` the windows must lie in the undistorted region
    |x| <= R0; without one the samples are taken to be on the real line.

    On both sides e^{i phi_+/h} carries momentum pointing away from the apex.
    Each branch gets a linear amplitude correction on top of the WKB factor
    (E0 - V)^{-1/4}; the incoming share is its fitted energy fraction.
    """
    if pot.dimension != 1:
        raise ValueError("verify_outgoing is one-dimensional")
    if scaling is not None:
        reach = R + half_width
        if scaling.type != ScalingType.exterior or reach > scaling.R0:
            raise InvalidScaling(
                "outgoing windows must lie inside the undistorted region",
                {"scaling": scaling.type.value, "R0": scaling.R0, "window_edge": reach},
            )
    x = np.asarray(x, dtype=float)
    samples = np.asarray(samples, dtype=complex)
    fractions = {}
    worst_residual = 0.0
    for label, center in (("minus", -R), ("plus", R)):
        inside = np.abs(x - center) <= half_width
        if np.count_nonzero(inside) < 8:
            raise ValueError(f"window around x={center} has too few grid points")
        xs = x[inside]
        deficit = barrier_deficit(pot, barrier, xs)
        if np.any(deficit <= 0):
            raise WindowInClassicallyForbiddenRegion(
                "WKB window reaches V >= E0",
                {"center": center, "min_deficit": float(np.min(deficit))},
            )
        amplitude = deficit ** -0.25
        phase = np.exp(1j * phi_plus(xs) / h)
        s = (xs - center) / half_width
        out_cols = [amplitude * phase, amplitude * phase * s]
        in_cols = [amplitude / phase, amplitude / phase * s]
        A = np.column_stack(out_cols + in_cols)
        coef, *_ = np.linalg.lstsq(A, samples[inside], rcond=None)
        outgoing = np.linalg.norm(A[:, :2] @ coef[:2]) ** 2
        incoming = np.linalg.norm(A[:, 2:] @ coef[2:]) ** 2
        total = outgoing + incoming
        fractions[label] = float(incoming / total) if total > 0 else 0.0
        scale = max(float(np.linalg.norm(samples[inside])), 1e-300)
        worst_residual = max(worst_residual, float(np.linalg.norm(A @ coef - samples[inside]) / scale))
    logger.debug("outgoing check at R=%g: incoming %s, residual %.2e", R, fractions, worst_residual)
    return OutgoingReport(R=float(R), h=float(h), incoming_fraction=fractions, fit_residual=worst_residual)


def state_records(state: ResonantState, phi_plus: GeneratingFunction) -> list:
    """Rows (x, Re f, Im f, |f e^{-i phi_+/h}|) on the undistorted part of the contour."""
    real = np.abs(state.contour.imag) <= REAL_TOL
    x = state.contour.real[real]
    f = state.samples[real]
    envelope = np.abs(f * np.exp(-1j * phi_plus(x) / state.h))
    return [
        {"x": float(a), "re_f": float(b.real), "im_f": float(b.imag), "envelope": float(e)}
        for a, b, e in zip(x, f, envelope)
    ]
