"""Pseudo-resonance lattice, the mu_k combination sequence and simplicity tests."""

from __future__ import annotations

import itertools
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from barriertop.core.config import settings
from barriertop.core.errors import ForbiddenRadius
from barriertop.models.lattice import MultiIndex, MuSequence, PseudoResonance
from barriertop.models.potential import BarrierData

logger = logging.getLogger(__name__)


def _combinations(lambdas: np.ndarray, cutoff: float):
    """All beta in N^n with beta . lambda <= cutoff."""
    lambdas = np.asarray(lambdas, dtype=float)
    bounds = [int(math.ceil(cutoff / lam)) for lam in lambdas]
    for beta in itertools.product(*(range(b + 1) for b in bounds)):
        value = float(np.dot(beta, lambdas))
        if value <= cutoff * (1 + 1e-12) + 1e-12:
            yield beta, value


def mu_sequence(lambdas: Sequence[float], cutoff: float) -> MuSequence:
    """Distinct values sum(beta_j lambda_j) up to ``cutoff``, sorted."""
    lambdas = np.sort(np.asarray(lambdas, dtype=float))
    tol = 1e-10 * lambdas[0]
    found = sorted(_combinations(lambdas, cutoff), key=lambda item: (item[1], item[0]))

    values: List[float] = []
    combos: List[List[tuple]] = []
    for beta, value in found:
        if values and abs(value - values[-1]) <= tol:
            combos[-1].append(beta)
            continue
        values.append(value)
        combos.append([beta])

    return MuSequence(
        values=tuple(values),
        cutoff=float(cutoff),
        combinations=tuple(tuple(c) for c in combos),
    )


def expansion_degrees(mu: MuSequence, lambdas: Sequence[float]) -> Tuple[int, ...]:
    """Upper bounds on the t-polynomial degree at each mu_k.

    A pure lambda_j that is no combination of the others carries degree 0;
    every other level inherits the largest degree sum over splittings
    mu = mu_a + mu_b, raised by one when it coincides with some lambda_j.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    tol = 1e-9 * max(1.0, float(lambdas.max()))
    degrees: List[int] = []
    for k, value in enumerate(mu.values):
        best = -1
        for a in range(k):
            b = mu.index_of(value - mu.values[a], tol)
            if 0 <= b < k:
                best = max(best, degrees[a] + degrees[b])
        resonant = bool(np.any(np.abs(lambdas - value) <= tol))
        if best < 0:
            degrees.append(0)
        else:
            degrees.append(best + (1 if resonant else 0))
    return tuple(degrees)


def decay_sum(alpha: Sequence[int], lambdas: Sequence[float]) -> float:
    return float(np.dot(np.asarray(alpha, dtype=float) + 0.5, np.asarray(lambdas, dtype=float)))


def pseudo_resonance(alpha: Sequence[int], barrier: BarrierData, h: float) -> complex:
    """z_alpha^0 = E0 - i h sum (alpha_j + 1/2) lambda_j."""
    return complex(barrier.E0, -h * decay_sum(alpha, barrier.lambdas))


def _lattice_points(lambdas: np.ndarray, bound: float):
    """Multi-indices with decay sum at most ``bound``."""
    shifted = bound - 0.5 * float(np.sum(lambdas))
    if shifted < 0:
        return
    for beta, _ in _combinations(lambdas, shifted):
        yield MultiIndex(beta), decay_sum(beta, lambdas)


def decay_sums(lambdas: Sequence[float], bound: float) -> List[float]:
    """Sorted distinct decay sums sum (alpha_j + 1/2) lambda_j up to ``bound``."""
    lambdas = np.asarray(lambdas, dtype=float)
    return sorted({round(value, 12) for _, value in _lattice_points(lambdas, bound)})


def is_simple(alpha: Sequence[int], lambdas: Sequence[float], tol: Optional[float] = None) -> bool:
    """True when no other multi-index shares the decay sum of ``alpha``."""
    lambdas = np.asarray(lambdas, dtype=float)
    if tol is None:
        tol = settings.COLLISION_TOL * lambdas.min()
    alpha = tuple(int(a) for a in alpha)
    target = decay_sum(alpha, lambdas)
    for beta, value in _lattice_points(lambdas, target + tol):
        if beta.alpha != alpha and abs(value - target) < tol:
            return False
    return True


def check_radius(lambdas: Sequence[float], C: float, tol: Optional[float] = None) -> None:
    """Raise ForbiddenRadius when C equals some lattice decay sum."""
    lambdas = np.asarray(lambdas, dtype=float)
    if tol is None:
        tol = settings.COLLISION_TOL * lambdas.min()
    if C <= 0:
        raise ForbiddenRadius("Radius C must be positive", {"C": C})
    for beta, value in _lattice_points(lambdas, C + tol):
        if abs(value - C) <= tol:
            raise ForbiddenRadius(
                f"C={C} collides with sum (alpha_j + 1/2) lambda_j = {value:.12g}",
                {"alpha": str(beta), "decay_sum": value},
            )


def pseudo_resonances(barrier: BarrierData, h: float, C: float) -> List[PseudoResonance]:
    """Lattice points z_alpha^0 with decay sum below C, lowest first."""
    lambdas = np.asarray(barrier.lambdas, dtype=float)
    check_radius(lambdas, C)

    points = []
    for alpha, value in _lattice_points(lambdas, C):
        if value >= C:
            continue
        points.append(
            PseudoResonance(
                alpha=alpha,
                z0=pseudo_resonance(alpha.alpha, barrier, h),
                decay_sum=value,
                simple=is_simple(alpha.alpha, lambdas),
            )
        )
    points.sort(key=lambda p: (p.decay_sum, p.alpha.alpha))
    logger.debug("lattice: %d points below C=%g at h=%g", len(points), C, h)
    return points


def convergence_rates(distances: Dict[float, float]) -> Dict[str, object]:
    """Ratios between consecutive h levels and the log-log slope.

    ``distances`` maps h to |z_alpha(h) - z_alpha^0(h)| / h.
    """
    hs = sorted(distances, reverse=True)
    values = [distances[h] for h in hs]
    ratios = [b / a if a > 0 else math.inf for a, b in zip(values, values[1:])]
    monotone = all(b <= a for a, b in zip(values, values[1:]))
    slope = None
    if len(hs) >= 2 and all(v > 0 for v in values):
        slope = float(np.polyfit(np.log(hs), np.log(values), 1)[0])
    return {"h": hs, "distance": values, "ratios": ratios, "monotone": monotone, "slope": slope}


def lattice_records(points: List[PseudoResonance]) -> List[dict]:
    return [
        {
            "alpha": list(p.alpha.alpha),
            "re": p.z0.real,
            "im": p.z0.imag,
            "decay_sum": p.decay_sum,
            "simple": p.simple,
        }
        for p in points
    ]
