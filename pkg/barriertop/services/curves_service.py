"""Stable-manifold curves of the apex: linear data, formal series and Picard refinement.

A stable curve is sought as gamma(t) = sum_k sum_m gamma_{k,m} t^m e^{-mu_k t}
over the combination sequence mu_k <= N. Matching powers in
gamma' = Fp gamma + sum_l G_l(gamma) gives, level by level,

    (Fp + mu_k) gamma_{k,m} = (m + 1) gamma_{k,m+1} - R_{k,m},

with R_k collecting the nonlinear products of lower levels. The formal curve is
then corrected by r = gamma - rho, the fixed point of
r(t) = -int_t^inf (H_p(rho + r) - rho') ds.
"""

from __future__ import annotations

import logging
import math
from functools import singledispatch
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import qmc

from barriertop.core.errors import (
    ContractionViolated,
    PrescriptionDrift,
    PrescriptionNotInKernel,
    TailTruncationError,
    TruncationTooLow,
)
from barriertop.models.curves import FormalCurve, LinearizationData, PrescriptionReport, RefinedCurve
from barriertop.models.geometry import AsymptoticExpansion, Direction, SeriesTerm, Side, Trajectory
from barriertop.models.lattice import MuSequence
from barriertop.models.potential import BarrierData, HomogeneousField, PhasePoint, Potential
from barriertop.services.geometry_service import fit_expansion, flow
from barriertop.services.lattice_service import mu_sequence
from barriertop.services.potential_service import field_jacobians, field_values, taylor_field

logger = logging.getLogger(__name__)

KERNEL_TOL = 1e-10
LINEAR_TOL = 1e-12
CONTRACTION = 0.5
CONTRACTION_SLACK = 0.05
N_MARGIN = 0.5
TAIL_LENGTH = 30.0
REMAINDER_SWITCH = 0.1
REMAINDER_EXTRA = 10
DRIFT_TOL = 1e-6
STEP = 0.005


def linearize(barrier: BarrierData) -> LinearizationData:
    """Fp = dH_p(0, 0) with its spectral projectors and partial inverses."""
    n = barrier.dimension
    hess = 0.5 * (barrier.hessian + barrier.hessian.T)
    w, Q = np.linalg.eigh(hess)
    lambdas = np.sqrt(-2.0 * w)

    Fp = np.zeros((2 * n, 2 * n))
    Fp[:n, n:] = 2.0 * np.eye(n)
    Fp[n:, :n] = -hess

    stable = np.vstack([Q, -0.5 * lambdas * Q])
    unstable = np.vstack([Q, 0.5 * lambdas * Q])
    V = np.hstack([stable, unstable])
    spectrum = np.concatenate([-lambdas, lambdas])
    Vinv = np.linalg.inv(V)

    tol = 1e-9 * float(lambdas.max())
    projectors: Dict[float, np.ndarray] = {}
    partial_inverses: Dict[float, np.ndarray] = {}
    eye = np.eye(2 * n)
    for lam in np.unique(np.round(lambdas / tol) * tol):
        S = np.abs(spectrum + lam) <= tol
        Pi = V[:, S] @ Vinv[S, :]
        with np.errstate(divide="ignore"):
            inv = np.where(S, 0.0, 1.0 / (spectrum + lam))
        K = (V * inv) @ Vinv
        shifted = Fp + lam * eye

        defects = {
            "idempotent": np.max(np.abs(Pi @ Pi - Pi)),
            "partial_inverse": np.max(np.abs(shifted @ K - (eye - Pi))),
        }
        ranks = np.linalg.matrix_rank(Pi) + np.linalg.matrix_rank(shifted)
        if max(defects.values()) > LINEAR_TOL * max(1.0, lam) or ranks != 2 * n:
            logger.warning("linearization check at lambda=%g: %s, rank sum %d", lam, defects, ranks)
        key = float(lambdas[np.argmin(np.abs(lambdas - lam))])
        projectors[key] = Pi
        partial_inverses[key] = K

    return LinearizationData(
        Fp=Fp,
        lambdas=np.sort(lambdas),
        spectrum=spectrum,
        eigenvectors=V,
        eigenvectors_inv=Vinv,
        projectors=projectors,
        partial_inverses=partial_inverses,
    )


def kernel_prescription(lin: LinearizationData, g: Dict[float, Sequence[float]]) -> Dict[float, np.ndarray]:
    """Full kernel vectors (g, -lambda g / 2) from spatial coefficients g."""
    out = {}
    for lam, spatial in g.items():
        spatial = np.atleast_1d(np.asarray(spatial, dtype=float))
        out[float(lam)] = np.concatenate([spatial, -0.5 * lam * spatial])
    return out


class _SeriesAlgebra:
    """Products of expandible series indexed by position in a MuSequence."""

    def __init__(self, mu: MuSequence):
        self.mu = mu
        self._sums: Dict[Tuple[int, int], int] = {}

    def level_sum(self, a: int, b: int) -> int:
        key = (a, b) if a <= b else (b, a)
        if key not in self._sums:
            self._sums[key] = self.mu.index_of(self.mu.values[a] + self.mu.values[b])
        return self._sums[key]

    def multiply(self, p: Dict[int, np.ndarray], q: Dict[int, np.ndarray], limit: int) -> Dict[int, np.ndarray]:
        out: Dict[int, np.ndarray] = {}
        for a, pa in p.items():
            for b, qb in q.items():
                k = self.level_sum(a, b)
                if k < 0 or k > limit:
                    continue
                out[k] = _poly_add(out.get(k), np.polynomial.polynomial.polymul(pa, qb))
        return out


def _poly_add(a: Optional[np.ndarray], b: np.ndarray) -> np.ndarray:
    if a is None:
        return np.array(b, copy=True)
    if len(a) < len(b):
        a, b = b, a
    out = np.array(a, copy=True)
    out[: len(b)] += b
    return out


def _nonlinear_series(
    algebra: _SeriesAlgebra,
    fields: Sequence[HomogeneousField],
    gamma: Dict[int, np.ndarray],
    n: int,
    limit: int,
) -> Dict[int, np.ndarray]:
    """sum_l G_l(gamma) as a vector series, levels up to ``limit``."""
    components = [{k: c[:, j] for k, c in gamma.items()} for j in range(n)]
    powers: Dict[Tuple[int, int], Dict[int, np.ndarray]] = {}

    def power(j: int, p: int) -> Dict[int, np.ndarray]:
        if p == 0:
            return {}
        if (j, p) not in powers:
            powers[(j, p)] = components[j] if p == 1 else algebra.multiply(power(j, p - 1), components[j], limit)
        return powers[(j, p)]

    out: Dict[int, np.ndarray] = {}
    for G in fields:
        for monomial, coeff in G.terms:
            series: Optional[Dict[int, np.ndarray]] = None
            for j, p in enumerate(monomial):
                if p == 0:
                    continue
                factor = power(j, p)
                series = factor if series is None else algebra.multiply(series, factor, limit)
            if not series:
                continue
            coeff = np.asarray(coeff)
            for k, poly in series.items():
                out[k] = _poly_add(out.get(k), np.outer(poly, coeff))
    return out


def _to_terms(mu: MuSequence, gamma: Dict[int, np.ndarray], levels: int) -> Tuple[SeriesTerm, ...]:
    return tuple(SeriesTerm(mu=mu.values[k], coefficients=gamma[k]) for k in range(levels) if k in gamma)


def _spatial_g(terms: Sequence[SeriesTerm], lambdas: np.ndarray, n: int) -> Dict[float, np.ndarray]:
    g = {}
    for lam in np.unique(lambdas):
        for term in terms:
            if abs(term.mu - lam) <= 1e-9 * max(1.0, lam):
                g[float(lam)] = term.coefficients[0, :n].copy()
    return g


def formal_curve(
    lin: LinearizationData,
    fields: Sequence[HomogeneousField],
    prescribed: Dict[float, np.ndarray],
    N: float,
) -> FormalCurve:
    """Expandible series solution of gamma' = H_p(gamma) truncated at mu <= N."""
    n = lin.dimension
    lambdas = lin.lambdas
    if N <= lambdas.max():
        raise TruncationTooLow("truncation N must exceed the largest lambda", {"N": N, "lambda_n": float(lambdas.max())})
    order = max(2, int(math.floor(N / lambdas.min() + 1e-12)))
    if fields and max(G.degree for G in fields) < order:
        raise TruncationTooLow("Taylor field does not reach degree floor(N / lambda_1)", {"needed": order})

    keyed: Dict[float, np.ndarray] = {}
    for lam, vec in prescribed.items():
        key = lin.key(float(lam))
        if key is None:
            raise PrescriptionNotInKernel("prescription at a value that is no lambda_j", {"mu": lam})
        vec = np.asarray(vec, dtype=float)
        leak = lin.projectors[key] @ vec - vec
        if np.max(np.abs(leak)) > KERNEL_TOL * max(1.0, np.max(np.abs(vec))):
            raise PrescriptionNotInKernel(
                "prescribed coefficient is not in Ker(Fp + lambda)",
                {"lambda": key, "leak": float(np.max(np.abs(leak)))},
            )
        keyed[key] = vec

    mu = mu_sequence(lambdas, N)
    algebra = _SeriesAlgebra(mu)
    fields = [G for G in fields if G.degree <= order and not G.is_zero]
    gamma: Dict[int, np.ndarray] = {}
    resonant: List[float] = []

    for k, value in enumerate(mu.values):
        R = _nonlinear_series(algebra, fields, gamma, n, k).get(k) if gamma else None
        key = lin.key(value)
        if key is None:
            if R is None:
                continue
            inv = lin.shifted_inverse(value)
            M = R.shape[0] - 1
            coef = np.zeros((M + 1, 2 * n))
            coef[M] = -inv @ R[M]
            for m in range(M - 1, -1, -1):
                coef[m] = inv @ ((m + 1) * coef[m + 1] - R[m])
            gamma[k] = coef
            continue

        Pi, K = lin.projectors[key], lin.partial_inverses[key]
        start = keyed.get(key, np.zeros(2 * n))
        if R is None:
            # no lower-level forcing: a non-combination lambda_j keeps degree 0
            gamma[k] = start[None, :].copy()
            continue
        resonant.append(value)
        M = R.shape[0]
        coef = np.zeros((M + 1, 2 * n))
        coef[M] = Pi @ R[M - 1] / M
        for m in range(M - 1, 0, -1):
            coef[m] = Pi @ R[m - 1] / m + K @ ((m + 1) * coef[m + 1] - R[m])
        coef[0] = start + K @ (coef[1] - R[0])
        gamma[k] = coef

    # every coefficient equation at mu <= N, re-checked against the final forcing
    forcing = _nonlinear_series(algebra, fields, gamma, n, len(mu) - 1)
    defect = 0.0
    for k, coef in gamma.items():
        value = mu.values[k]
        R = forcing.get(k, np.zeros((1, 2 * n)))
        M = max(coef.shape[0], R.shape[0])
        c = np.zeros((M + 1, 2 * n))
        c[: coef.shape[0]] = coef
        r = np.zeros((M + 1, 2 * n))
        r[: R.shape[0]] = R
        for m in range(M + 1):
            nxt = (m + 1) * c[m + 1] if m + 1 <= M else 0.0
            eq = nxt - value * c[m] - lin.Fp @ c[m] - r[m]
            defect = max(defect, float(np.max(np.abs(eq))))

    terms = _to_terms(mu, gamma, len(mu))
    g = _spatial_g(terms, lambdas, n)
    nonzero = [lam for lam, vec in g.items() if np.max(np.abs(vec)) > 0]
    expansion = AsymptoticExpansion(
        terms=terms,
        side=Side.future,
        g=g,
        lambda_star=min(nonzero) if nonzero else None,
    )
    logger.debug(
        "formal curve: %d levels up to N=%g, degrees %s, defect %.2e",
        len(terms), N, expansion.degrees, defect,
    )
    return FormalCurve(
        expansion=expansion,
        prescribed=keyed,
        truncation_N=float(N),
        taylor_order=order,
        recursion_defect=defect,
        resonant_levels=tuple(resonant),
        fields=tuple(fields),
    )


def lipschitz_constant(pot: Potential, radius: float = 2.0, samples_log2: int = 12) -> float:
    """C1 = sup_{|u| <= radius} |dH_p(u)| over a Sobol point set."""
    n = pot.dimension
    sampler = qmc.Sobol(d=2 * n, scramble=False)
    points = qmc.scale(sampler.random_base2(samples_log2), -radius, radius)
    points = points[np.linalg.norm(points, axis=1) <= radius]
    points = np.vstack([np.zeros(2 * n), points])
    jac = field_jacobians(pot, points)
    return float(np.max(np.linalg.norm(jac, ord=2, axis=(1, 2))))


def _evaluate_fields(fields: Sequence[HomogeneousField], X: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((len(X), width))
    for G in fields:
        for monomial, coeff in G.terms:
            out += np.prod(X ** np.asarray(monomial), axis=1)[:, None] * np.asarray(coeff)[None, :]
    return out


class _FormalResidual:
    """rho' - H_p(rho) without cancellation between the two sides.

    The levels mu <= N cancel by construction, so the residual is the overflow
    of the nonlinear products above N plus the Taylor remainder beyond the
    recursion order; near the apex the remainder is summed term by term.
    """

    def __init__(self, formal: FormalCurve, pot: Potential, lin: LinearizationData):
        n = lin.dimension
        self.n = n
        self.pot = pot
        self.lin = lin
        self.formal = formal
        N = formal.truncation_N
        fields = list(formal.fields)
        top = max((G.degree for G in fields), default=1)
        cutoff = max(top, 1) * N
        mu = mu_sequence(lin.lambdas, cutoff)
        algebra = _SeriesAlgebra(mu)
        gamma = {mu.index_of(term.mu): term.coefficients for term in formal.expansion.terms}
        series = _nonlinear_series(algebra, fields, gamma, n, len(mu) - 1)
        self.overflow = [
            SeriesTerm(mu=mu.values[k], coefficients=c)
            for k, c in sorted(series.items())
            if mu.values[k] > N * (1 + 1e-12)
        ]
        extended = taylor_field(pot, formal.taylor_order + REMAINDER_EXTRA)
        self.low = [G for G in extended if G.degree <= formal.taylor_order]
        self.high = [G for G in extended if G.degree > formal.taylor_order]

    def remainder(self, U: np.ndarray) -> np.ndarray:
        n = self.n
        X = U[:, :n]
        near = np.max(np.abs(X), axis=1) < REMAINDER_SWITCH
        out = np.zeros_like(U)
        if np.any(near):
            out[near] = _evaluate_fields(self.high, X[near], 2 * n)
        far = ~near
        if np.any(far):
            direct = field_values(self.pot, U[far]) - U[far] @ self.lin.Fp.T
            out[far] = direct - _evaluate_fields(self.low, X[far], 2 * n)
        return out

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rho = self.formal(t)
        out = -self.remainder(rho)
        if self.overflow:
            out -= AsymptoticExpansion(terms=tuple(self.overflow), side=Side.future)(t)
        return out


def _choose_start(residual: _FormalResidual, formal: FormalCurve, N: float, horizon: float = 50.0) -> float:
    """Smallest T_N >= 0 with |R(t)| <= e^{-Nt} and |rho(t)| <= 1 for all later t."""
    t = np.arange(0.0, horizon, 0.05)
    R = np.linalg.norm(residual(t), axis=1)
    rho = np.linalg.norm(formal(t), axis=1)
    ok = (R <= np.exp(-N * t)) & (rho <= 1.0)
    if not ok[-1]:
        raise TailTruncationError("no start time found where the formal residual is below e^{-Nt}", {"N": N})
    bad = np.flatnonzero(~ok)
    return float(t[bad[-1] + 1]) if len(bad) else 0.0


def _integrate_from_right(t: np.ndarray, f: np.ndarray) -> Tuple[np.ndarray, CubicSpline]:
    """r(t) = -int_t^{t_end} f ds, accumulated from the right end."""
    s = t[-1] - t[::-1]
    spline = CubicSpline(s, f[::-1], axis=0)
    anti = spline.antiderivative()
    return -anti(s)[::-1], spline


def picard_refine(
    formal: FormalCurve,
    pot: Potential,
    lin: LinearizationData,
    N: Optional[float] = None,
    span: float = 10.0,
    j_max: int = 60,
    tol: float = 1e-10,
    step: float = STEP,
) -> RefinedCurve:
    """Fixed-point iteration for the correction r with the e^{Nt}-weighted contraction check."""
    N = formal.truncation_N if N is None else float(N)
    C1 = lipschitz_constant(pot)
    required = max(C1 + 1.0, 2.0 * C1, float(lin.lambdas.max()) + N_MARGIN)
    if N < required:
        raise TruncationTooLow("N too small for a contraction", {"N": N, "required": required, "C1": C1})

    residual = _FormalResidual(formal, pot, lin)
    T_N = _choose_start(residual, formal, N)
    window_end = T_N + span
    t_end = window_end + TAIL_LENGTH / N
    points = int(math.ceil((t_end - T_N) / step)) + 1
    t = np.linspace(T_N, t_end, points)
    window = t <= window_end + 1e-12
    weight = np.exp(N * t[window])[:, None]

    rho = formal(t)
    Rf = residual(t)
    r = np.zeros_like(rho)
    history: List[float] = []
    spline = None
    for j in range(1, j_max + 1):
        jac = field_jacobians(pot, rho + 0.5 * r)
        f = np.einsum("tij,tj->ti", jac, r) - Rf
        r_new, spline = _integrate_from_right(t, f)
        diff = float(np.max(np.abs(weight * (r_new - r)[window])))
        history.append(diff)
        r = r_new
        if len(history) >= 2 and diff > (CONTRACTION + CONTRACTION_SLACK) * history[-2] + tol:
            raise ContractionViolated(
                "Picard step did not contract by one half",
                {"iteration": j, "ratio": diff / history[-2], "N": N, "T_N": T_N},
            )
        if diff <= tol:
            break
    logger.debug("picard: %d iterations, history %s", len(history), ["%.2e" % h for h in history])

    tail = math.exp(N * window_end) * float(np.max(np.abs(f[-1]))) / N
    if tail > tol:
        raise TailTruncationError("truncated tail integral exceeds tolerance", {"tail_bound": tail})
    weighted_sup = float(np.max(np.abs(weight * r[window])))
    if weighted_sup > 1.0:
        raise ContractionViolated("correction exceeds e^{-Nt}", {"weighted_sup": weighted_sup})

    s_end = t[-1]

    def correction(times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        return -spline.antiderivative()(s_end - times)

    def correction_rate(times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        return spline(s_end - times)

    # residual of gamma' = H_p(gamma) off the quadrature nodes
    mid = 0.5 * (t[:-1] + t[1:])[window[:-1]]
    gamma = formal(mid) + correction(mid)
    rate = formal.derivative(mid) + correction_rate(mid)
    ode_residual = float(np.max(np.abs(rate - field_values(pot, gamma))))

    deviation, membership = _flow_membership(pot, formal, correction, lin, T_N, span, tol)
    logger.debug(
        "refined curve: T_N=%.3f residual=%.2e weighted_sup=%.2e membership=%.2e over %.2f",
        T_N, ode_residual, weighted_sup, deviation, membership,
    )
    return RefinedCurve(
        formal=formal,
        correction=correction,
        correction_rate=correction_rate,
        times=t,
        r=r,
        T_N=T_N,
        N=N,
        window_end=window_end,
        picard_history=history,
        residual=ode_residual,
        weighted_sup=weighted_sup,
        flow_deviation=deviation,
        flow_window=membership,
        C1=C1,
    )


def _flow_membership(pot, formal, correction, lin, T_N, span, tol) -> Tuple[float, float]:
    """Re-integrate from gamma(T_N) over the stretch where forward instability stays below tol."""
    start = formal(T_N)[0] + correction(T_N)[0]
    size = max(float(np.max(np.abs(start))), 1e-300)
    growth = math.log(max(10.0 * tol / (1e-12 * size), 1.0)) / float(lin.lambdas.max())
    length = min(span, growth)
    if length <= 0:
        return 0.0, 0.0
    times = np.linspace(T_N, T_N + length, 201)
    traj = flow(pot, PhasePoint.from_vector(start), (T_N, T_N + length), tol=tol, t_eval=times)
    curve = formal(traj.times) + correction(traj.times)
    return float(np.max(np.abs(traj.states - curve))), length


def refined_trajectory(refined: RefinedCurve) -> Trajectory:
    """The refined curve on its window as a stable-side trajectory."""
    window = refined.window
    times = refined.times[window]

    def solution(t):
        return refined(t).T

    return Trajectory(
        times=times,
        states=refined(times),
        energy=float("nan"),
        direction=Direction.stable,
        solution=solution,
    )


def verify_prescription(refined: RefinedCurve, lin: LinearizationData, tol: float = DRIFT_TOL) -> PrescriptionReport:
    """Refit the refined curve and compare Pi_lambda(gamma_{lambda,0}) with the prescription."""
    formal = refined.formal
    traj = refined_trajectory(refined)
    mu = mu_sequence(lin.lambdas, formal.truncation_N)
    fit = fit_expansion(traj, mu, lin.lambdas)

    recovered: Dict[float, np.ndarray] = {}
    mismatch = 0.0
    for lam in lin.projectors:
        term = fit.term(lam)
        coefficient = term.coefficients[0] if term is not None else np.zeros(2 * lin.dimension)
        recovered[lam] = lin.projectors[lam] @ coefficient
        target = formal.prescribed.get(lam, np.zeros(2 * lin.dimension))
        scale = max(1.0, float(np.max(np.abs(target))))
        mismatch = max(mismatch, float(np.max(np.abs(recovered[lam] - target))) / scale)

    window = refined.window
    t = refined.times[window]
    scaled = np.linalg.norm(refined.r[window], axis=1) * np.exp(float(lin.lambdas.max()) * t)
    tail = scaled[t >= t[0] + 0.8 * (t[-1] - t[0])]
    decay = float(np.max(tail) / max(float(np.max(scaled)), 1e-300)) if np.max(scaled) > 0 else 0.0

    report = PrescriptionReport(
        recovered=recovered,
        prescribed=dict(formal.prescribed),
        mismatch=mismatch,
        correction_decay=decay,
        passed=mismatch <= tol,
    )
    if not report.passed:
        raise PrescriptionDrift("refined curve drifted from the prescription", {"mismatch": mismatch})
    logger.debug("prescription recovered: mismatch %.2e, correction decay %.2e", mismatch, decay)
    return report


_REVERSAL_CACHE: Dict[int, np.ndarray] = {}


def _reversal(width: int) -> np.ndarray:
    if width not in _REVERSAL_CACHE:
        n = width // 2
        _REVERSAL_CACHE[width] = np.concatenate([np.ones(n), -np.ones(n)])
    return _REVERSAL_CACHE[width]


@singledispatch
def time_reverse(curve):
    """(x, xi, t) -> (x, -xi, -t): stable-side objects become unstable-side ones."""
    raise TypeError(f"cannot time-reverse {type(curve).__name__}")


@time_reverse.register
def _(curve: AsymptoticExpansion) -> AsymptoticExpansion:
    terms = []
    for term in curve.terms:
        J = _reversal(term.coefficients.shape[1])
        signs = (-1.0) ** np.arange(term.degree + 1)
        terms.append(SeriesTerm(mu=term.mu, coefficients=signs[:, None] * term.coefficients * J[None, :]))
    side = Side.past if curve.side == Side.future else Side.future
    return AsymptoticExpansion(
        terms=tuple(terms),
        side=side,
        g={lam: vec.copy() for lam, vec in curve.g.items()},
        lambda_star=curve.lambda_star,
        residual=curve.residual,
        dropped_terms=curve.dropped_terms,
    )


@time_reverse.register
def _(curve: FormalCurve) -> FormalCurve:
    return FormalCurve(
        expansion=time_reverse(curve.expansion),
        prescribed={lam: vec * _reversal(len(vec)) for lam, vec in curve.prescribed.items()},
        truncation_N=curve.truncation_N,
        taylor_order=curve.taylor_order,
        recursion_defect=curve.recursion_defect,
        resonant_levels=curve.resonant_levels,
        fields=curve.fields,
    )


@time_reverse.register
def _(curve: Trajectory) -> Trajectory:
    J = _reversal(curve.states.shape[1])
    old = curve

    def solution(t):
        return (old.at(-np.asarray(t)) * J).T

    direction = Direction.unstable if curve.direction == Direction.stable else Direction.stable
    return Trajectory(
        times=-curve.times[::-1],
        states=(curve.states * J)[::-1],
        energy=curve.energy,
        direction=direction,
        pinned=curve.pinned,
        max_drift=curve.max_drift,
        solution=solution if curve.solution is not None else None,
    )
