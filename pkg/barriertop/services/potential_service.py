"""Model potentials, the classical Hamiltonian and Taylor data at the apex."""

from __future__ import annotations

import logging
import math
from functools import lru_cache
from types import SimpleNamespace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from barriertop.core.errors import (
    ConfigError,
    DegenerateMaximum,
    PoleProximity,
    SectorViolation,
)
from barriertop.models.potential import (
    BarrierData,
    HomogeneousField,
    PhasePoint,
    Potential,
    PotentialFamily,
)

logger = logging.getLogger(__name__)

POLE_DISTANCE = 1e-6
SECTOR_SLACK = 1e-12
DEFICIT_TAYLOR_RADIUS = 1e-2
DEFICIT_TAYLOR_ORDER = 14
DEGENERACY_TOL = 1e-10


def build_potential(
    family: str,
    params: Sequence[float],
    dimension: int = 1,
    decay_exponent: Optional[float] = None,
    table: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
) -> Potential:
    """Validate a potential description and return the immutable model."""
    try:
        fam = PotentialFamily(family)
    except ValueError:
        raise ConfigError(f"Unknown potential family '{family}'")
    if dimension < 1:
        raise ConfigError("Potential dimension must be at least 1")

    params = tuple(float(p) for p in params)
    table_x: Tuple[float, ...] = ()
    table_v: Tuple[float, ...] = ()

    if fam == PotentialFamily.user_table:
        if table is None or dimension != 1:
            raise ConfigError("user_table potentials need a 1-D table of (x, V)")
        table_x = tuple(float(v) for v in table[0])
        table_v = tuple(float(v) for v in table[1])
        if len(table_x) != len(table_v) or len(table_x) < 8:
            raise ConfigError("user_table needs matching x and V columns with at least 8 rows")
        if np.any(np.diff(table_x) <= 0):
            raise ConfigError("user_table abscissae must be strictly increasing")
    elif not params or params[0] <= 0:
        raise ConfigError(f"{fam.value} needs a positive barrier height as first parameter")

    if fam in (PotentialFamily.quadratic_model, PotentialFamily.anisotropic_gaussian):
        if len(params) != dimension + 1:
            raise ConfigError(f"{fam.value} needs {dimension + 1} parameters, got {len(params)}")
    if fam == PotentialFamily.perturbed_quadratic and len(params) != dimension + 3:
        raise ConfigError(f"perturbed_quadratic needs {dimension + 3} parameters, got {len(params)}")
    if fam in (PotentialFamily.sech2_barrier,) and len(params) not in (1, 2, dimension + 1):
        raise ConfigError("sech2_barrier takes [E0], [E0, width] or one width per axis")
    if fam == PotentialFamily.gaussian_barrier and len(params) not in (1, 2):
        raise ConfigError("gaussian_barrier takes [E0] or [E0, width]")

    if decay_exponent is None:
        decay_exponent = -2.0 if fam in (
            PotentialFamily.quadratic_model,
            PotentialFamily.perturbed_quadratic,
        ) else math.inf

    return Potential(
        family=fam,
        params=params,
        dimension=dimension,
        decay_exponent=float(decay_exponent),
        table_x=table_x,
        table_v=table_v,
    )


def _widths(pot: Potential) -> List[float]:
    n = pot.dimension
    if len(pot.params) == 1:
        return [1.0] * n
    if len(pot.params) == 2:
        return [pot.params[1]] * n
    return list(pot.params[1 : n + 1])


@lru_cache(maxsize=64)
def symbolic_potential(pot: Potential) -> Tuple[sp.Expr, Tuple[sp.Symbol, ...]]:
    """Closed-form sympy expression of V for the built-in families."""
    n = pot.dimension
    xs = sp.symbols(f"x1:{n + 1}", real=True)
    E0 = sp.Float(pot.params[0]) if pot.params else sp.Integer(0)

    if pot.family == PotentialFamily.sech2_barrier:
        expr = E0
        for x, w in zip(xs, _widths(pot)):
            expr = expr / sp.cosh(x / sp.Float(w)) ** 2
    elif pot.family == PotentialFamily.gaussian_barrier:
        w = sp.Float(_widths(pot)[0])
        expr = E0 * sp.exp(-sum(x**2 for x in xs) / w**2)
    elif pot.family == PotentialFamily.anisotropic_gaussian:
        a = [sp.Float(v) for v in pot.params[1 : n + 1]]
        expr = E0 * sp.exp(-sum(aj * x**2 for aj, x in zip(a, xs)))
    elif pot.family == PotentialFamily.quadratic_model:
        lam = [sp.Float(v) for v in pot.params[1 : n + 1]]
        expr = E0 - sum(lj**2 * x**2 / 4 for lj, x in zip(lam, xs))
    elif pot.family == PotentialFamily.perturbed_quadratic:
        lam = [sp.Float(v) for v in pot.params[1 : n + 1]]
        kappa3, kappa4 = (sp.Float(v) for v in pot.params[n + 1 : n + 3])
        r2 = sum(x**2 for x in xs)
        expr = E0 - sum(lj**2 * x**2 / 4 for lj, x in zip(lam, xs)) + kappa3 * xs[0] ** 2 * xs[-1] + kappa4 * r2**2
    else:
        raise ConfigError(f"{pot.family.value} has no closed form")
    return expr, xs


def _broadcast(value, shape):
    return np.broadcast_to(np.asarray(value), shape)


@lru_cache(maxsize=64)
def _compiled(pot: Potential) -> SimpleNamespace:
    """Numerical evaluators: value, gradient and hessian."""
    if pot.family == PotentialFamily.user_table:
        return _compiled_table(pot)

    expr, xs = symbolic_potential(pot)
    grad = [sp.diff(expr, x) for x in xs]
    hess = [[sp.diff(g, x) for x in xs] for g in grad]
    value_fn = sp.lambdify(xs, expr, modules="numpy")
    grad_fns = [sp.lambdify(xs, g, modules="numpy") for g in grad]
    hess_fns = [[sp.lambdify(xs, h, modules="numpy") for h in row] for row in hess]

    def value(*args):
        with np.errstate(over="ignore"):
            return _broadcast(value_fn(*args), np.shape(args[0]))

    def gradient(*args):
        with np.errstate(over="ignore"):
            return [_broadcast(f(*args), np.shape(args[0])) for f in grad_fns]

    def hessian(*args):
        with np.errstate(over="ignore"):
            return [[_broadcast(f(*args), np.shape(args[0])) for f in row] for row in hess_fns]

    return SimpleNamespace(value=value, gradient=gradient, hessian=hessian)


def _compiled_table(pot: Potential) -> SimpleNamespace:
    tx = np.asarray(pot.table_x)
    spline = CubicSpline(tx, np.asarray(pot.table_v))
    step = 1e-4 * 0.5 * (tx[-1] - tx[0])

    def value(x):
        x = np.asarray(x)
        re = np.real(x)
        inside = (re >= tx[0]) & (re <= tx[-1])
        out = np.zeros(np.shape(x), dtype=float)
        out[inside] = spline(re[inside])
        return out

    def derivative(x, order):
        # 4th-order centered differences
        if order == 1:
            return (value(x - 2 * step) - 8 * value(x - step) + 8 * value(x + step) - value(x + 2 * step)) / (12 * step)
        return (
            -value(x - 2 * step) + 16 * value(x - step) - 30 * value(x) + 16 * value(x + step) - value(x + 2 * step)
        ) / (12 * step**2)

    return SimpleNamespace(
        value=value,
        gradient=lambda x: [derivative(x, 1)],
        hessian=lambda x: [[derivative(x, 2)]],
    )


def analyticity(pot: Potential) -> Tuple[float, float]:
    """Sector half-angle delta and the strip half-width around the real axis."""
    if pot.family == PotentialFamily.sech2_barrier:
        w = min(_widths(pot))
        return math.pi / 4 - 0.05, 0.25 * math.pi * w
    if pot.family == PotentialFamily.user_table:
        return 0.0, 0.0
    if pot.family == PotentialFamily.gaussian_barrier:
        return math.pi / 4 - 0.05, _widths(pot)[0]
    if pot.family == PotentialFamily.anisotropic_gaussian:
        # exp(-a x^2) keeps decaying only for |arg x| < pi/4
        return math.pi / 4 - 0.05, 1.0 / math.sqrt(max(pot.params[1 : pot.dimension + 1]))
    return math.pi / 2, math.inf


def _check_sector(pot: Potential, x: np.ndarray) -> None:
    x = np.asarray(x)
    im = np.abs(np.imag(x))
    if not np.any(im > 0):
        return

    if pot.family == PotentialFamily.sech2_barrier:
        for j, w in enumerate(_widths(pot)):
            xj = x if pot.dimension == 1 else x[..., j]
            k = np.round(np.imag(xj) / (math.pi * w) - 0.5)
            pole = 1j * math.pi * w * (k + 0.5)
            if np.any(np.abs(xj - pole) < POLE_DISTANCE):
                raise PoleProximity(
                    "Evaluation point within 1e-6 of a sech^2 pole",
                    {"family": pot.family.value},
                )

    if pot.family == PotentialFamily.user_table:
        re = np.real(x)
        inside = (re >= pot.table_x[0]) & (re <= pot.table_x[-1])
        if np.any(inside & (im > 0)):
            raise SectorViolation(
                "user_table potentials only extend to complex points outside the table support",
                {"family": pot.family.value},
            )
        return

    delta, strip = analyticity(pot)
    bound = np.maximum(strip, math.tan(delta) * np.abs(np.real(x))) if delta < math.pi / 2 else np.inf
    if np.any(im > bound + SECTOR_SLACK):
        raise SectorViolation(
            "Complex argument outside the analyticity sector",
            {"family": pot.family.value, "delta": round(delta, 6)},
        )


def eval_potential(pot: Potential, x) -> complex:
    """V at a single (possibly complex) point of R^n."""
    x = np.atleast_1d(np.asarray(x))
    if x.shape != (pot.dimension,):
        raise ValueError(f"expected a point of dimension {pot.dimension}")
    _check_sector(pot, x if pot.dimension > 1 else x[0])
    fn = _compiled(pot)
    if np.iscomplexobj(x) and np.any(np.imag(x) != 0):
        value = fn.value(*[np.complex128(v) for v in x]) if pot.family != PotentialFamily.user_table else fn.value(x)[0]
        return complex(value)
    xr = np.real(x).astype(float)
    value = fn.value(*xr) if pot.family != PotentialFamily.user_table else fn.value(xr)[0]
    return complex(float(value), 0.0)


def potential_values(pot: Potential, xs: np.ndarray) -> np.ndarray:
    """Vectorized V on a 1-D array of (possibly complex) nodes."""
    if pot.dimension != 1:
        raise ValueError("grid evaluation is one-dimensional")
    xs = np.asarray(xs)
    _check_sector(pot, xs)
    fn = _compiled(pot)
    if np.iscomplexobj(xs) and np.any(np.imag(xs) != 0):
        return np.asarray(fn.value(xs.astype(complex)), dtype=complex)
    return np.asarray(fn.value(np.real(xs).astype(float)), dtype=float)


def gradient(pot: Potential, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    fn = _compiled(pot)
    if pot.family == PotentialFamily.user_table:
        return np.array([fn.gradient(x)[0][0]])
    return np.array([float(g) for g in fn.gradient(*x)])


def hessian(pot: Potential, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    fn = _compiled(pot)
    if pot.family == PotentialFamily.user_table:
        return np.array([[fn.hessian(x)[0][0][0]]])
    return np.array([[float(h) for h in row] for row in fn.hessian(*x)])


def _table_apex(pot: Potential) -> float:
    tx = np.asarray(pot.table_x)
    i = int(np.argmax(pot.table_v))
    lo, hi = tx[max(i - 2, 0)], tx[min(i + 2, len(tx) - 1)]
    fn = _compiled(pot)
    res = minimize_scalar(lambda s: -fn.value(np.array([s]))[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x)


def barrier_data(pot: Potential) -> BarrierData:
    """Barrier height, apex and the lambdas of the quadratic normal form."""
    if pot.family == PotentialFamily.user_table:
        apex = np.array([_table_apex(pot)])
    else:
        apex = np.zeros(pot.dimension)
    E0 = eval_potential(pot, apex).real
    hess = hessian(pot, apex)
    hess = 0.5 * (hess + hess.T)
    eig = np.linalg.eigvalsh(hess)
    if np.any(eig >= -DEGENERACY_TOL):
        raise DegenerateMaximum(
            "Apex hessian is not negative definite",
            {"eigenvalues": np.round(eig, 12).tolist()},
        )
    lambdas = np.sort(np.sqrt(-2.0 * eig))
    logger.debug("barrier data: E0=%.12g lambdas=%s", E0, lambdas)
    return BarrierData(E0=float(E0), apex=apex, lambdas=lambdas, hessian=hess)


def hamiltonian(pot: Potential, p: PhasePoint) -> float:
    return float(np.dot(p.xi, p.xi) + eval_potential(pot, p.x).real)


def hamiltonian_field(pot: Potential, p: PhasePoint) -> np.ndarray:
    """H_p(x, xi) = (2 xi, -grad V(x))."""
    return np.concatenate([2.0 * p.xi, -gradient(pot, p.x)])


def field_function(pot: Potential) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side for solve_ivp."""
    n = pot.dimension
    fn = _compiled(pot)

    if pot.family == PotentialFamily.user_table:
        def rhs(t, u):
            return np.array([2.0 * u[1], -fn.gradient(np.array([u[0]]))[0][0]])
        return rhs

    def rhs(t, u):
        grad = fn.gradient(*u[:n])
        return np.concatenate([2.0 * u[n:], -np.array([float(g) for g in grad])])

    return rhs


def field_jacobian(pot: Potential, u: np.ndarray) -> np.ndarray:
    """dH_p at u = (x, xi)."""
    n = pot.dimension
    jac = np.zeros((2 * n, 2 * n))
    jac[:n, n:] = 2.0 * np.eye(n)
    jac[n:, :n] = -hessian(pot, u[:n])
    return jac


def _position_columns(pot: Potential, X: np.ndarray) -> List[np.ndarray]:
    return [X[:, j] for j in range(pot.dimension)]


def field_values(pot: Potential, U: np.ndarray) -> np.ndarray:
    """H_p on the rows of U, shape (T, 2n)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    n = pot.dimension
    fn = _compiled(pot)
    if pot.family == PotentialFamily.user_table:
        grad = [fn.gradient(U[:, 0])[0]]
    else:
        grad = fn.gradient(*_position_columns(pot, U[:, :n]))
    out = np.empty_like(U)
    out[:, :n] = 2.0 * U[:, n:]
    for j in range(n):
        out[:, n + j] = -np.asarray(grad[j], dtype=float)
    return out


def field_jacobians(pot: Potential, U: np.ndarray) -> np.ndarray:
    """dH_p on the rows of U, shape (T, 2n, 2n)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    n = pot.dimension
    fn = _compiled(pot)
    if pot.family == PotentialFamily.user_table:
        hess = [[fn.hessian(U[:, 0])[0][0]]]
    else:
        hess = fn.hessian(*_position_columns(pot, U[:, :n]))
    out = np.zeros((len(U), 2 * n, 2 * n))
    for j in range(n):
        out[:, j, n + j] = 2.0
        for k in range(n):
            out[:, n + j, k] = -np.asarray(hess[j][k], dtype=float)
    return out


@lru_cache(maxsize=32)
def _taylor_polynomial(pot: Potential, order: int) -> Tuple[sp.Expr, Tuple[sp.Symbol, ...]]:
    """Taylor polynomial of V at the apex up to total degree ``order``."""
    if pot.family == PotentialFamily.user_table:
        apex = _table_apex(pot)
        tx = np.asarray(pot.table_x)
        near = np.argsort(np.abs(tx - apex))[: max(3 * order, 16)]
        fit = np.polynomial.polynomial.polyfit(tx[near] - apex, np.asarray(pot.table_v)[near], order)
        x = sp.Symbol("x1", real=True)
        return sum(sp.Float(c) * x**k for k, c in enumerate(fit)), (x,)

    expr, xs = symbolic_potential(pot)
    t = sp.Symbol("t")
    scaled = expr.subs({x: t * x for x in xs}, simultaneous=True)
    poly = sp.series(scaled, t, 0, order + 1).removeO()
    return sp.expand(poly.subs(t, 1)), xs


def taylor_field(pot: Potential, order: int) -> List[HomogeneousField]:
    """Homogeneous parts G_2..G_K of H_p at the apex."""
    if order < 2:
        raise ValueError("taylor_field needs order >= 2")
    n = pot.dimension
    poly, xs = _taylor_polynomial(pot, order + 1)
    fields = []
    for k in range(2, order + 1):
        terms = {}
        for j, x in enumerate(xs):
            component = -sp.diff(poly, x)
            if component == 0:
                continue
            for monom, coeff in sp.Poly(component, *xs).terms():
                if sum(monom) != k:
                    continue
                value = float(coeff)
                if abs(value) < 1e-15:
                    continue
                vec = terms.setdefault(tuple(monom), np.zeros(2 * n))
                vec[n + j] += value
        fields.append(
            HomogeneousField(
                degree=k,
                dimension=n,
                terms=tuple(sorted((m, tuple(v)) for m, v in terms.items())),
            )
        )
    return fields


@lru_cache(maxsize=32)
def _deficit_coefficients(pot: Potential) -> np.ndarray:
    poly, xs = _taylor_polynomial(pot, DEFICIT_TAYLOR_ORDER)
    coeffs = sp.Poly(poly, xs[0]).all_coeffs()[::-1]
    out = np.zeros(DEFICIT_TAYLOR_ORDER + 1)
    for k, c in enumerate(coeffs[: DEFICIT_TAYLOR_ORDER + 1]):
        out[k] = float(c)
    return out


def barrier_deficit(pot: Potential, barrier: BarrierData, x) -> np.ndarray:
    """E0 - V(x) in 1-D, via the apex Taylor polynomial close to the apex."""
    if pot.dimension != 1:
        raise ValueError("barrier_deficit is one-dimensional")
    x = np.asarray(x, dtype=float)
    s = x - barrier.apex[0]
    out = barrier.E0 - potential_values(pot, np.atleast_1d(x)).reshape(np.shape(x))
    near = np.abs(s) < DEFICIT_TAYLOR_RADIUS
    if np.any(near):
        coeffs = _deficit_coefficients(pot).copy()
        coeffs[0] = 0.0
        coeffs[1] = 0.0
        local = -np.polynomial.polynomial.polyval(s, coeffs)
        out = np.where(near, local, out)
    return out
