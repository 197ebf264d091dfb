"""One-dimensional scattering at complex energy and residues of the amplitude.

The Jost solutions are integrated on the line x = s e^{i phi}, s in [-L, L],
with phi = -arg k, so that both free exponentials e^{+-ikx} keep unit modulus
along the path and neither swamps the other. For potentials with no analytic
continuation the real line is used.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from barriertop.core.config import settings
from barriertop.core.errors import (
    DimensionUnsupported,
    LongRangeUnsupported,
    MatchingRadiusTooSmall,
    MethodDisagreement,
    PoleMissed,
    StiffnessFailure,
)
from barriertop.models.geometry import ScatteringGeometry
from barriertop.models.lattice import MultiIndex
from barriertop.models.potential import Potential
from barriertop.models.scattering import (
    PredictedResidue,
    ResidueMethod,
    ResidueRecord,
    ScatteringData1D,
    amplitude_constant,
)
from barriertop.services.potential_service import analyticity, potential_values

logger = logging.getLogger(__name__)

FREE_LEVEL = 1e-10
IM_Z_LIMIT = 5.0
# largest log-amplification tolerated on a real-line path
REAL_PATH_GROWTH = 25.0
MAX_PATH_ANGLE = 0.3
RESIDUE_AGREEMENT = 1e-2


def _check_short_range(pot: Potential) -> None:
    if pot.dimension != 1:
        raise DimensionUnsupported("scattering amplitudes are one-dimensional", {"dimension": pot.dimension})
    if not pot.short_range:
        raise LongRangeUnsupported("scattering needs a short-range potential", {"family": pot.family.value})


def _path_angle(pot: Potential, k: complex) -> float:
    delta, _ = analyticity(pot)
    if delta <= 0:
        return 0.0
    return float(np.clip(-np.angle(k), 0.0, min(MAX_PATH_ANGLE, 0.5 * delta)))


def _free_level(pot: Potential, x) -> float:
    return float(np.max(np.abs(potential_values(pot, np.atleast_1d(x)))))


def matching_radius(pot: Potential, z: complex, rotation: complex = 1.0, start: float = 1.0) -> float:
    """Smallest radius, on a 0.5 grid, beyond which |V| <= 1e-10 |z| on both half lines."""
    target = FREE_LEVEL * abs(z)
    r = start
    while r < 1e4:
        points = rotation * np.concatenate([np.linspace(r, 2 * r, 16), -np.linspace(r, 2 * r, 16)])
        if _free_level(pot, points) <= target:
            return r
        r += 0.5
    raise LongRangeUnsupported("potential is not free within |x| < 1e4")


def _jost(pot: Potential, z: complex, h: float, k: complex, rotation: complex, L: float, from_right: bool):
    """Jost solution along x = s rotation, launched as e^{+-ikx} at s = +-L."""
    scale = rotation**2 / h**2

    def rhs(s, y):
        x = s * rotation
        v = potential_values(pot, np.array([x]))[0]
        return np.array([y[1], scale * (v - z) * y[0]])

    sign = 1.0 if from_right else -1.0
    s0 = sign * L
    x0 = s0 * rotation
    k_local = np.sqrt(z - potential_values(pot, np.array([x0]))[0] + 0j) / h
    u0 = np.exp(1j * sign * k * x0)
    # d/ds = rotation d/dx
    y0 = np.array([u0, rotation * 1j * sign * k_local * u0], dtype=complex)
    sol = integrate.solve_ivp(
        rhs,
        (s0, -s0),
        y0,
        method="DOP853",
        rtol=min(settings.INTEGRATOR_RTOL, 1e-11),
        atol=min(settings.INTEGRATOR_ATOL, 1e-13),
        dense_output=True,
    )
    if sol.status != 0:
        raise StiffnessFailure("Jost integration failed", {"z": z, "message": sol.message})
    return sol


def _decompose(u: complex, u_x: complex, k: complex, x: complex) -> Tuple[complex, complex]:
    """Coefficients (a, b) of u = a e^{ikx} + b e^{-ikx}."""
    a = (u_x + 1j * k * u) / (2j * k) * np.exp(-1j * k * x)
    b = (1j * k * u - u_x) / (2j * k) * np.exp(1j * k * x)
    return complex(a), complex(b)


def transmission(
    pot: Potential,
    z: complex,
    h: float,
    radius: Optional[float] = None,
    both_sides: bool = True,
) -> ScatteringData1D:
    """T and R from Jost solutions matched to free waves at the matching radius."""
    _check_short_range(pot)
    z = complex(z)
    if h <= 0:
        raise ValueError("h must be positive")
    if z.real <= 0:
        raise ValueError("scattering energies need Re z > 0")
    if abs(z.imag) > IM_Z_LIMIT * h:
        raise StiffnessFailure("|Im z| exceeds the integrable strip 5h", {"z": z, "h": h})

    k = np.sqrt(z) / h
    phi = _path_angle(pot, k)
    rotation = complex(np.exp(1j * phi))
    needed = matching_radius(pot, z, rotation)
    if radius is None:
        radius = needed
    elif radius < needed:
        raise MatchingRadiusTooSmall(
            "|V| at the matching radius exceeds 1e-10 |z|",
            {"radius": radius, "required": needed, "V": _free_level(pot, [radius, -radius])},
        )
    growth = 2.0 * abs((k * rotation).imag) * radius * 2.0
    if growth > REAL_PATH_GROWTH:
        raise StiffnessFailure("incoming and outgoing branches separate too strongly on the path", {"log_growth": growth})

    L = float(radius)
    right = _jost(pot, z, h, k, rotation, L, from_right=True)
    u, u_s = right.y[:, -1]
    a, b = _decompose(u, u_s / rotation, k, -L * rotation)
    T = 1.0 / a
    R_left = b / a

    R_right = None
    wronskian_T = None
    if both_sides:
        left = _jost(pot, z, h, k, rotation, L, from_right=False)
        u, u_s = left.y[:, -1]
        # left Jost solution ~ e^{-ikx}: roles of the coefficients swap
        c_plus, c_minus = _decompose(u, u_s / rotation, k, L * rotation)
        R_right = c_plus / c_minus
        fp = right.sol(0.0)
        fm = left.sol(0.0)
        wronskian = (fm[0] * fp[1] - fm[1] * fp[0]) / rotation
        wronskian_T = complex(2j * k / wronskian)

    logger.debug("transmission z=%s h=%g: T=%s path angle %.4f radius %.2f", z, h, T, phi, L)
    return ScatteringData1D(
        z=z,
        h=float(h),
        T=complex(T),
        R_left=complex(R_left),
        R_right=None if R_right is None else complex(R_right),
        matching_radius=L,
        path_angle=phi,
        wronskian_T=wronskian_T,
    )


def amplitude_scan(pot: Potential, h: float, zs: Sequence[complex], omega: int = 1, omega_prime: int = 1) -> List[Dict]:
    """Amplitude on a list of complex energies."""

    def sample(z):
        data = transmission(pot, z, h, both_sides=omega != omega_prime and omega_prime == -1)
        value = data.amplitude(omega, omega_prime)
        return {"re_z": z.real, "im_z": z.imag, "re_a": value.real, "im_a": value.imag, "abs_a": abs(value)}

    with ThreadPoolExecutor(max_workers=max(1, settings.THREADS)) as pool:
        return list(pool.map(sample, [complex(z) for z in zs]))


def _amplitudes(pot, h, nodes, omega, omega_prime) -> np.ndarray:
    needs_right = omega != omega_prime and omega_prime == -1

    def value(z):
        return transmission(pot, z, h, both_sides=needs_right).amplitude(omega, omega_prime)

    with ThreadPoolExecutor(max_workers=max(1, settings.THREADS)) as pool:
        return np.array(list(pool.map(value, nodes)), dtype=complex)


def _pole_fit(w: np.ndarray, values: np.ndarray) -> Tuple[complex, complex]:
    """Fit A (w - p) = a0 + a1 w + a2 w^2 and return (p, residue)."""
    M = np.column_stack([np.ones_like(w), w, w**2, values])
    coef, *_ = np.linalg.lstsq(M, values * w, rcond=None)
    a0, a1, a2, p = coef
    return complex(p), complex(a0 + a1 * p + a2 * p**2)


def amplitude_residue(
    pot: Potential,
    h: float,
    z_alpha: complex,
    alpha: Sequence[int] = (0,),
    nodes: int = 32,
    radius: Optional[float] = None,
    omega: int = 1,
    omega_prime: int = 1,
) -> ResidueRecord:
    """Residue of the amplitude c(z, h) T(omega, omega_prime) at z_alpha.

    Circle quadrature, checked by a rational pole fit through the same nodes.
    """
    _check_short_range(pot)
    alpha = alpha if isinstance(alpha, MultiIndex) else MultiIndex(tuple(alpha))
    radius = h / 10.0 if radius is None else radius
    theta = 2 * np.pi * np.arange(nodes) / nodes
    w = radius * np.exp(1j * theta)
    inner = 0.5 * w[::2]
    values = _amplitudes(pot, h, z_alpha + np.concatenate([w, inner]), omega, omega_prime)
    outer_values, inner_values = values[:nodes], values[nodes:]

    # (2 pi i)^{-1} of the contour integral, trapezoidal in theta
    residue = complex(np.mean(outer_values * w))
    moment = complex(np.mean(outer_values * w**2))
    scale = float(np.median(np.abs(outer_values))) * radius
    if abs(residue) <= 1e-3 * scale:
        raise PoleMissed("amplitude shows no pole inside the circle", {"z_alpha": z_alpha, "radius": radius})
    offset = moment / residue
    if abs(offset) >= radius:
        raise PoleMissed("pole estimate lies outside the circle", {"offset": abs(offset), "radius": radius})

    p, fitted = _pole_fit(np.concatenate([w, inner]), np.concatenate([outer_values, inner_values]))
    record = ResidueRecord(
        z_pole=complex(z_alpha + offset),
        residue=residue,
        method=ResidueMethod.contour_quadrature,
        h=float(h),
        alpha=alpha,
        z_alpha=complex(z_alpha),
        pole_fit_residue=fitted,
        pole_fit_location=complex(z_alpha + p),
        radius=float(radius),
        amplitude_constant=amplitude_constant(z_alpha, h),
    )
    if record.agreement > RESIDUE_AGREEMENT:
        raise MethodDisagreement(
            "contour and pole-fit residues differ by more than 1%",
            {"contour": residue, "pole_fit": fitted, "relative": record.agreement},
        )
    logger.debug("residue alpha=%s h=%g: %s (pole fit %s), pole offset %.2e", alpha, h, residue, fitted, abs(offset))
    return record


def predicted_residue(
    alpha: Sequence[int],
    geom: ScatteringGeometry,
    lambdas: Sequence[float],
    E0: float,
    h: float,
    pot: Optional[Potential] = None,
) -> PredictedResidue:
    """Leading semiclassical residue b_-0 b_+0 h^{-|alpha|+1/2} e^{i(S_- + S_+)/h} in one dimension.

    The amplitude is normalized as A = c(z, h) T with c = -2 pi i in one
    dimension, so no further power of h enters.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if len(lambdas) != 1:
        raise DimensionUnsupported("the residue formula is evaluated in one dimension", {"dimension": len(lambdas)})
    if pot is not None:
        _check_short_range(pot)
    alpha = alpha if isinstance(alpha, MultiIndex) else MultiIndex(tuple(alpha))
    order = alpha.order
    lam = float(lambdas[0])
    star = geom.lambda_star

    g_power = (geom.g_minus * geom.g_plus) ** order
    leading = (
        np.exp(-0.5j * math.pi * (order - 0.5))
        / (math.sqrt(2 * math.pi) * alpha.factorial)
        * E0 ** ((len(lambdas) - 1) / 4.0)
        * (star * star) ** 1.5
        * lam ** (order - 0.5)
        * np.exp(-0.5j * math.pi * (geom.nu_minus + geom.nu_plus))
        / math.sqrt(geom.D_minus * geom.D_plus)
        * g_power
        * abs(geom.g_minus)
        * abs(geom.g_plus)
    )
    value = leading * h ** (-order + 0.5) * np.exp(1j * (geom.S_minus + geom.S_plus) / h)
    return PredictedResidue(value=complex(value), leading=complex(leading), leading_zero=g_power == 0)


def poschl_teller_transmission(z: complex, h: float, E0: float, width: float = 1.0) -> complex:
    """Closed-form T for V = E0 sech^2(x / width)."""
    hbar = h / width
    U0 = E0 / hbar**2
    s = -0.5 + 1j * np.sqrt(U0 - 0.25 + 0j)
    k = np.sqrt(complex(z)) / hbar
    logT = (
        special.loggamma(-s - 1j * k)
        + special.loggamma(1 + s - 1j * k)
        - special.loggamma(-1j * k)
        - special.loggamma(1 - 1j * k)
    )
    return complex(np.exp(logT))


def poschl_teller_resonances(h: float, E0: float, width: float = 1.0, count: int = 3) -> List[complex]:
    """Poles z_m = (h/width)^2 (beta - i(m + 1/2))^2 of T, m = 0..count-1."""
    hbar = h / width
    beta = math.sqrt(E0 / hbar**2 - 0.25)
    return [complex(hbar**2 * (beta - 1j * (m + 0.5)) ** 2) for m in range(count)]


def poschl_teller_residue(m: int, h: float, E0: float, width: float = 1.0) -> complex:
    """Residue of T at the m-th pole, from Gamma(-m + eps) ~ (-1)^m / (m! eps)."""
    hbar = h / width
    beta = math.sqrt(E0 / hbar**2 - 0.25)
    s = -0.5 + 1j * beta
    k = beta - 1j * (m + 0.5)
    rest = np.exp(
        special.loggamma(-s - 1j * k) - special.loggamma(-1j * k) - special.loggamma(1 - 1j * k)
    )
    # 1 + s - ik = -m + eps with eps = -i (k - k_m), and dz = 2 hbar^2 k dk
    return complex((-1) ** m / math.factorial(m) * rest / (-1j) * 2 * hbar**2 * k)


def poschl_teller_actions(E0: float, width: float = 1.0) -> float:
    """S_- = S_+ = -width sqrt(E0) ln 2 for the sech^2 connections."""
    return -width * math.sqrt(E0) * math.log(2.0)


def fit_power_law(hs: Sequence[float], values: Sequence[complex]) -> Dict[str, float]:
    """Slope and intercept of log |value| against log h."""
    hs = np.asarray(hs, dtype=float)
    mags = np.abs(np.asarray(values, dtype=complex))
    slope, intercept = np.polyfit(np.log(hs), np.log(mags), 1)
    residual = float(np.max(np.abs(slope * np.log(hs) + intercept - np.log(mags))))
    return {"slope": float(slope), "intercept": float(intercept), "residual": residual}


def fit_phase_increments(hs: Sequence[float], residues: Sequence[complex], S_total: float) -> Dict[str, float]:
    """Phase of residue e^{-i S/h} across h: common offset and the largest deviation from it."""
    hs = np.asarray(hs, dtype=float)
    reduced = np.asarray(residues, dtype=complex) * np.exp(-1j * S_total / hs)
    unit = reduced / np.abs(reduced)
    offset = float(np.angle(np.mean(unit)))
    deviations = np.angle(unit * np.exp(-1j * offset))
    return {"global_phase": offset, "residual": float(np.max(np.abs(deviations)))}


def residue_records(records: Sequence[ResidueRecord], slope: Optional[float] = None) -> List[dict]:
    return [
        {
            "alpha": list(r.alpha.alpha),
            "h": r.h,
            "residue_re": r.residue.real,
            "residue_im": r.residue.imag,
            "predicted_re": None if r.predicted is None else r.predicted.real,
            "predicted_im": None if r.predicted is None else r.predicted.imag,
            "pole_fit_re": None if r.pole_fit_residue is None else r.pole_fit_residue.real,
            "pole_fit_im": None if r.pole_fit_residue is None else r.pole_fit_residue.imag,
            "slope_fit": slope,
        }
        for r in records
    ]
