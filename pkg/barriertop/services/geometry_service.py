"""Eikonal phases, Hamiltonian flows and the asymptotics of the apex connections.

One-dimensional connections at energy E0 are branches of the level set
xi^2 + V(x) = E0. The stable branch on the side s = +-1 runs in from x = s*inf
and reaches the apex as t -> +inf; the unstable branch leaves the apex and runs
out to x = s*inf.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from barriertop.core.config import settings
from barriertop.core.errors import (
    DimensionUnsupported,
    IllConditioned,
    LongRangeUnsupported,
    StepFailure,
    TailDivergence,
    WindowTooShort,
)
from barriertop.models.geometry import (
    AsymptoticExpansion,
    Direction,
    GeneratingFunction,
    ScatteringGeometry,
    SeriesTerm,
    Side,
    Trajectory,
)
from barriertop.models.lattice import MuSequence
from barriertop.models.potential import BarrierData, PhasePoint, Potential
from barriertop.services.lattice_service import expansion_degrees, mu_sequence
from barriertop.services.potential_service import (
    barrier_deficit,
    eval_potential,
    field_function,
    field_values,
    potential_values,
)

logger = logging.getLogger(__name__)

WINDOW_OUTER = 1e-2
WINDOW_INNER = 1e-8
WINDOW_SAMPLES = 400
CONDITION_LIMIT = 1e12
ACTION_TAIL_TOL = 1e-8
START_RADIUS = 1e-9
FREE_RATIO = 1e-10


def _eikonal_slope(pot: Potential, barrier: BarrierData, x: np.ndarray, sign: int) -> np.ndarray:
    deficit = barrier_deficit(pot, barrier, x)
    if np.any(deficit < -1e-14):
        raise ValueError("point outside the region V < E0")
    return sign * np.sign(x - barrier.apex[0]) * np.sqrt(np.maximum(deficit, 0.0))


def eikonal_phase(
    barrier: BarrierData,
    pot: Potential,
    sign: int = 1,
    allow_local: bool = False,
    sample_radius: float = 2.0,
) -> GeneratingFunction:
    """phi_+- with phi_+-' = +-sgn(x) sqrt(E0 - V) and phi_+-(apex) = 0."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")

    if pot.dimension != 1:
        if not allow_local:
            raise DimensionUnsupported(
                "global eikonal phases are one-dimensional",
                {"dimension": pot.dimension},
            )
        lambdas = np.asarray(barrier.lambdas)

        def local_value(x):
            x = np.atleast_2d(x) - barrier.apex
            return sign * np.sum(lambdas * x**2, axis=-1) / 4.0

        def local_derivative(x):
            x = np.atleast_2d(x) - barrier.apex
            return sign * lambdas * x / 2.0

        return GeneratingFunction(sign=sign, value=local_value, derivative=local_derivative, local=True)

    apex = float(barrier.apex[0])

    def derivative(x):
        return _eikonal_slope(pot, barrier, np.asarray(x, dtype=float), sign)

    def value(x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        out = np.empty_like(flat)
        for i, xi in enumerate(flat):
            # sgn(s) sqrt(E0 - V(s)) is smooth through the apex
            out[i] = integrate.quad(
                lambda s: float(_eikonal_slope(pot, barrier, np.array([s]), sign)[0]),
                apex,
                xi,
                epsabs=1e-14,
                epsrel=1e-12,
                limit=200,
            )[0]
        return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])

    samples = apex + np.linspace(-sample_radius, sample_radius, 65)
    samples = samples[potential_values(pot, samples) <= barrier.E0]
    slope = derivative(samples)
    residual = float(np.max(np.abs(slope**2 + potential_values(pot, samples) - barrier.E0)))
    logger.debug("eikonal phase sign=%d residual=%.2e on %d samples", sign, residual, len(samples))
    return GeneratingFunction(sign=sign, value=value, derivative=derivative, eikonal_residual=residual)


def _energies(pot: Potential, states: np.ndarray) -> np.ndarray:
    n = pot.dimension
    xi2 = np.sum(states[:, n:] ** 2, axis=1)
    if n == 1:
        return xi2 + np.real(potential_values(pot, states[:, 0]))
    return xi2 + np.array([eval_potential(pot, row[:n]).real for row in states])


def flow(
    pot: Potential,
    start: PhasePoint,
    t_span: Tuple[float, float],
    tol: float = 1e-10,
    t_eval: Optional[np.ndarray] = None,
    direction: Direction = Direction.stable,
    events=None,
) -> Trajectory:
    """Integrate H_p from ``start`` with DOP853 and dense output."""
    t0, t1 = (float(t) for t in t_span)
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise ValueError("t_span must be finite")
    if tol <= 0:
        raise ValueError("tol must be positive")

    rtol = min(settings.INTEGRATOR_RTOL, 1e-2 * tol)
    atol = min(settings.INTEGRATOR_ATOL, 1e-4 * tol)
    u0 = start.as_vector()
    sol = integrate.solve_ivp(
        field_function(pot),
        (t0, t1),
        u0,
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        t_eval=t_eval,
        events=events,
    )
    if sol.status == -1:
        raise StepFailure("Hamiltonian flow integration failed", {"message": sol.message, "t": float(sol.t[-1])})

    times, states = sol.t, sol.y.T
    if times[0] > times[-1]:
        times, states = times[::-1], states[::-1]
    energy0 = _energies(pot, u0[None, :])[0]
    drift = float(np.max(np.abs(_energies(pot, states) - energy0)))
    if drift > tol:
        logger.warning("energy drift %.2e exceeds tolerance %.2e", drift, tol)
    logger.debug("flow over %s: %d steps, energy drift %.2e", (t0, t1), len(times), drift)
    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states),
        energy=float(energy0),
        direction=Direction(direction),
        max_drift=drift,
        solution=sol.sol,
    )


def _check_one_dimensional(pot: Potential) -> None:
    if pot.dimension != 1:
        raise DimensionUnsupported("apex connections are computed in one dimension", {"dimension": pot.dimension})


def _free_radius(pot: Potential, barrier: BarrierData, side: int) -> float:
    """Distance from the apex beyond which |V| <= FREE_RATIO * E0."""
    r = 1.0
    while r < 1e4:
        xs = barrier.apex[0] + side * np.linspace(r, 4 * r, 32)
        if np.all(np.abs(potential_values(pot, xs)) <= FREE_RATIO * barrier.E0):
            return r
        r *= 1.5
    raise LongRangeUnsupported("potential does not become free within |x| < 1e4", {"family": pot.family.value})


def _momentum(pot: Potential, barrier: BarrierData, side: int):
    apex = float(barrier.apex[0])

    def k(r: float) -> float:
        return math.sqrt(max(float(barrier_deficit(pot, barrier, np.array([apex + side * r]))[0]), 1e-300))

    return k


def _far_flight(pot: Potential, barrier: BarrierData, r0: float, side: int) -> float:
    """int_{r0}^inf (1/(2k) - 1/(2 sqrt(E0))) dr, k = sqrt(E0 - V), away from the apex."""
    c = 1.0 / (2.0 * math.sqrt(barrier.E0))
    k = _momentum(pot, barrier, side)
    value, err = integrate.quad(lambda r: 1.0 / (2.0 * k(r)) - c, r0, math.inf, epsabs=1e-13, epsrel=1e-11, limit=400)
    if err > ACTION_TAIL_TOL:
        raise TailDivergence("time-of-flight tail did not converge", {"error": err})
    return value


def _apex_flight(pot: Potential, barrier: BarrierData, r0: float, cut: float, side: int) -> float:
    """int_{r0}^{cut} (1/(2k) - 1/(lambda r)) dr, bounded at r = 0."""
    lam = barrier.lambda_min
    k = _momentum(pot, barrier, side)
    value, _ = integrate.quad(lambda r: 1.0 / (2.0 * k(r)) - 1.0 / (lam * r), r0, cut, epsabs=1e-13, limit=400)
    return value


def _flight_time(pot: Potential, barrier: BarrierData, r0: float, side: int, cut: float = 1.0) -> float:
    """int_{r0}^inf (1/(2k) - 1/(2 sqrt(E0))) dr with the 1/(lambda r) apex singularity split off."""
    if r0 >= cut:
        return _far_flight(pot, barrier, r0, side)
    lam = barrier.lambda_min
    c = 1.0 / (2.0 * math.sqrt(barrier.E0))
    return (
        _apex_flight(pot, barrier, r0, cut, side)
        + math.log(cut / r0) / lam
        - c * (cut - r0)
        + _far_flight(pot, barrier, cut, side)
    )


def pinned_time_shift(
    pot: Potential,
    barrier: BarrierData,
    x0: float,
    direction: Direction,
) -> float:
    """Pinned time at position x0 on the 1-D connection through x0.

    The pinning is x(t) - 2 sqrt(E0) omega t -> 0 at the free end, that is zero
    impact parameter in one dimension.
    """
    _check_one_dimensional(pot)
    if not pot.short_range:
        raise LongRangeUnsupported("free-asymptote pinning needs a short-range potential")
    s = x0 - float(barrier.apex[0])
    if s == 0:
        raise ValueError("the apex itself is reached only at infinite time")
    side = 1 if s > 0 else -1
    r0 = abs(s)
    c = 1.0 / (2.0 * math.sqrt(barrier.E0))
    flight = _flight_time(pot, barrier, r0, side)
    if Direction(direction) == Direction.stable:
        return -r0 * c + flight
    return r0 * c - flight


def closed_form_g(pot: Potential, barrier: BarrierData, side: int, cut: float = 1.0) -> float:
    """Leading coefficient g of either connection on ``side`` under the pinning.

    |g| = exp(lambda I) with I = lim_{r -> 0} (t_stable(r) + ln(r) / lambda);
    the stable and unstable branches on one side share the same |g|.
    """
    _check_one_dimensional(pot)
    if not pot.short_range:
        raise LongRangeUnsupported("free-asymptote pinning needs a short-range potential")
    lam = barrier.lambda_min
    c = 1.0 / (2.0 * math.sqrt(barrier.E0))
    I = (
        _apex_flight(pot, barrier, 0.0, cut, side)
        - cut * c
        + math.log(cut) / lam
        + _far_flight(pot, barrier, cut, side)
    )
    return side * math.exp(lam * I)


def connection_trajectory(
    pot: Potential,
    barrier: BarrierData,
    direction: Direction,
    side: int,
    tol: float = 1e-10,
    start_radius: float = START_RADIUS,
    pin: bool = True,
    outer_radius: Optional[float] = None,
) -> Trajectory:
    """Apex connection on ``side``, integrated in its numerically stable time direction.

    The start sits on the eikonal graph at distance ``start_radius`` from the
    apex; the stable branch is integrated backwards and the unstable one
    forwards until ``outer_radius`` (by default the edge of the free region).
    """
    _check_one_dimensional(pot)
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    direction = Direction(direction)
    apex = float(barrier.apex[0])
    x0 = apex + side * start_radius
    sign = -1 if direction == Direction.stable else 1
    xi0 = float(_eikonal_slope(pot, barrier, np.array([x0]), sign)[0])

    R = outer_radius if outer_radius is not None else _free_radius(pot, barrier, side)
    horizon = 2.0 * math.log(R / start_radius) / barrier.lambda_min + 4.0 * R / math.sqrt(barrier.E0)

    def reach(t, u):
        return abs(u[0] - apex) - R

    reach.terminal = True
    span = (0.0, -horizon) if direction == Direction.stable else (0.0, horizon)
    traj = flow(pot, PhasePoint(x=[x0], xi=[xi0]), span, tol=tol, direction=direction, events=reach)
    if pin:
        shift = pinned_time_shift(pot, barrier, x0, direction)
        traj = traj.reanchored(shift, pinned=True)
    logger.debug("%s connection side=%+d: %d samples, drift %.2e", direction.value, side, len(traj.times), traj.max_drift)
    return traj


def connection_pair(
    pot: Potential,
    barrier: BarrierData,
    omega_in: int = 1,
    omega_out: int = 1,
    tol: float = 1e-10,
) -> Tuple[Trajectory, Trajectory]:
    """Stable connection arriving with velocity sign omega_in and unstable one leaving with omega_out."""
    jobs = [(Direction.stable, -omega_in), (Direction.unstable, omega_out)]
    with ThreadPoolExecutor(max_workers=max(1, settings.THREADS)) as pool:
        stable, unstable = pool.map(lambda job: connection_trajectory(pot, barrier, job[0], job[1], tol), jobs)
    return stable, unstable


def _fit_window(traj: Trajectory) -> Tuple[float, float]:
    norms = np.linalg.norm(traj.states, axis=1)
    inside = (norms >= WINDOW_INNER) & (norms <= WINDOW_OUTER)
    if np.count_nonzero(inside) < 2:
        raise WindowTooShort(
            "trajectory does not cross the fit window",
            {"min_norm": float(norms.min()), "max_norm": float(norms.max())},
        )
    times = traj.times[inside]
    return float(times.min()), float(times.max())


def _basis(t: np.ndarray, mus: Sequence[float], degrees: Sequence[int], side: Side) -> np.ndarray:
    sign = -1.0 if side == Side.future else 1.0
    cols = []
    for mu, deg in zip(mus, degrees):
        e = np.exp(sign * mu * t)
        for m in range(deg + 1):
            cols.append(t**m * e)
    return np.column_stack(cols)


def fit_expansion(
    traj: Trajectory,
    mu: MuSequence,
    lambdas: Sequence[float],
    samples: int = WINDOW_SAMPLES,
) -> AsymptoticExpansion:
    """Least-squares fit of the truncated expandible model on the linear-regime window."""
    lambdas = np.asarray(lambdas, dtype=float)
    side = Side.future if traj.direction == Direction.stable else Side.past
    ta, tb = _fit_window(traj)
    if (tb - ta) * lambdas.min() < 2.0:
        raise WindowTooShort("fit window spans too little decay", {"t_start": ta, "t_end": tb})

    degrees = list(expansion_degrees(mu, lambdas))
    mus = list(mu.values)
    t = np.linspace(ta, tb, samples)
    states = traj.at(t)
    scale = np.max(np.abs(states))

    dropped = 0
    while True:
        A = _basis(t, mus, degrees, side)
        if A.shape[1] * 3 > samples:
            raise WindowTooShort("too few samples for the requested terms", {"columns": A.shape[1]})
        norms = np.linalg.norm(A, axis=0)
        An = A / norms
        cond = np.linalg.cond(An)
        if cond <= CONDITION_LIMIT:
            break
        if len(mus) == 1:
            raise IllConditioned("single-term fit is ill conditioned", {"condition": float(cond)})
        logger.warning("fit ill conditioned (cond=%.2e), dropping mu=%g", cond, mus[-1])
        mus.pop()
        degrees.pop()
        dropped += 1

    coef, *_ = np.linalg.lstsq(An, states / scale, rcond=None)
    coef = coef / norms[:, None] * scale
    residual = float(np.max(np.abs(A @ coef - states)))

    terms = []
    row = 0
    for value, deg in zip(mus, degrees):
        terms.append(SeriesTerm(mu=float(value), coefficients=coef[row : row + deg + 1].copy()))
        row += deg + 1

    n = len(lambdas)
    g: Dict[float, np.ndarray] = {}
    for lam in np.unique(lambdas):
        k = mu.index_of(lam)
        if 0 <= k < len(terms):
            g[float(lam)] = terms[k].coefficients[0, :n].copy()
    nonzero = [lam for lam, vec in g.items() if np.max(np.abs(vec)) > 1e-10]
    lambda_star = min(nonzero) if nonzero else None
    logger.debug("expansion fit on [%.3f, %.3f]: %d terms, residual %.2e", ta, tb, len(terms), residual)
    return AsymptoticExpansion(
        terms=tuple(terms),
        side=side,
        g=g,
        lambda_star=lambda_star,
        residual=residual,
        dropped_terms=dropped,
    )


def _caustics(traj: Trajectory) -> int:
    """Zeros of dx/dt = 2 xi along the orbit."""
    xi = traj.momenta[:, 0]
    signs = np.sign(xi[np.abs(xi) > 1e-14])
    return int(np.count_nonzero(np.diff(signs)))


def _action(pot: Potential, barrier: BarrierData, traj: Trajectory) -> float:
    """int x V'(x) ds along the whole connection, with analytic apex and tail pieces."""
    apex = float(barrier.apex[0])
    t = np.linspace(traj.times[0], traj.times[-1], 8001)
    states = traj.at(t)
    x = states[:, 0]
    force = field_values(pot, states)[:, 1]
    body = integrate.simpson(-(x - apex) * force, x=t)

    # near the apex V' = -lambda^2 s / 2 and |ds/dt| = lambda |s|
    r_apex = float(np.min(np.abs(x - apex)))
    lam = barrier.lambda_min
    apex_piece = -lam * r_apex**2 / 4.0

    r_far = float(np.max(np.abs(x - apex)))
    side = 1 if x[np.argmax(np.abs(x - apex))] > apex else -1
    c = math.sqrt(barrier.E0)

    def integrand(r):
        xs = np.array([apex + side * r])
        k = math.sqrt(max(float(barrier_deficit(pot, barrier, xs)[0]), 1e-300))
        dV = -field_values(pot, np.array([[xs[0], 0.0]]))[0, 1]
        return side * r * dV / (2.0 * k)

    tail, err = integrate.quad(integrand, r_far, math.inf, epsabs=1e-14, limit=400)
    if err > ACTION_TAIL_TOL or abs(tail) > ACTION_TAIL_TOL * max(1.0, c):
        raise TailDivergence("action tail beyond the integration window is not negligible", {"tail": tail, "error": err})
    return float(body + apex_piece + tail)


def _maslov_sequence(traj: Trajectory, lam: float) -> float:
    """|x'(t)| e^{+-lambda t} at the apex end of the orbit (one dimension)."""
    if traj.direction == Direction.stable:
        t = traj.times[-1]
        return float(abs(2.0 * traj.momenta[-1, 0]) * math.exp(lam * t))
    t = traj.times[0]
    return float(abs(2.0 * traj.momenta[0, 0]) * math.exp(-lam * t))


def scattering_geometry(
    stable: Trajectory,
    unstable: Trajectory,
    pot: Potential,
    barrier: BarrierData,
    mu_cutoff_factor: float = 4.0,
) -> ScatteringGeometry:
    """Actions, Maslov data and leading coefficients of the two apex connections."""
    _check_one_dimensional(pot)
    if not pot.short_range:
        raise LongRangeUnsupported("scattering geometry needs a short-range potential", {"family": pot.family.value})
    if not (stable.pinned and unstable.pinned):
        raise ValueError("trajectories must be pinned by the free asymptote first")

    lam = barrier.lambda_min
    mu = mu_sequence(barrier.lambdas, mu_cutoff_factor * lam)
    fits = [fit_expansion(traj, mu, barrier.lambdas) for traj in (stable, unstable)]
    g_minus = float(fits[0].g[lam][0])
    g_plus = float(fits[1].g[lam][0])
    lambda_star = fits[0].lambda_star or lam

    S_minus = _action(pot, barrier, stable)
    S_plus = _action(pot, barrier, unstable)
    omega_in = int(np.sign(stable.momenta[0, 0]))
    omega_out = int(np.sign(unstable.momenta[-1, 0]))
    geom = ScatteringGeometry(
        S_minus=S_minus,
        S_plus=S_plus,
        D_minus=lambda_star * abs(g_minus),
        D_plus=lambda_star * abs(g_plus),
        nu_minus=_caustics(stable),
        nu_plus=_caustics(unstable),
        g_minus=g_minus,
        g_plus=g_plus,
        lambda_star=float(lambda_star),
        z_impact=(),
        omega_in=omega_in,
        omega_out=omega_out,
        D_minus_sequence=_maslov_sequence(stable, lam),
        D_plus_sequence=_maslov_sequence(unstable, lam),
    )
    logger.debug("scattering geometry: %s", geom)
    return geom
