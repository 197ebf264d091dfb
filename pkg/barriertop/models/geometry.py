from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np


class Direction(str, enum.Enum):
    stable = "stable"
    unstable = "unstable"


class Side(str, enum.Enum):
    """t -> +inf with decaying exponentials, or t -> -inf with growing ones."""

    future = "future"
    past = "past"


@dataclass(frozen=True, eq=False)
class GeneratingFunction:
    sign: int
    value: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    derivative: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    # only the quadratic part sum lambda_j x_j^2 / 4 is available
    local: bool = False
    eikonal_residual: float = 0.0

    def __call__(self, x):
        return self.value(x)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    energy: float
    direction: Direction
    # time added to the integrator's clock; set by the free-asymptote pinning
    anchor: float = 0.0
    pinned: bool = False
    max_drift: float = 0.0
    solution: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.states.shape[1] // 2

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, : self.dimension]

    @property
    def momenta(self) -> np.ndarray:
        return self.states[:, self.dimension :]

    def at(self, t) -> np.ndarray:
        """States at the requested times, shape (len(t), 2n)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.solution is None:
            raise ValueError("trajectory carries no dense output")
        return np.asarray(self.solution(t - self.anchor)).T.reshape(len(t), -1)

    def reanchored(self, shift: float, pinned: Optional[bool] = None) -> "Trajectory":
        """Same orbit with every time moved by ``shift``."""
        return replace(
            self,
            times=self.times + shift,
            anchor=self.anchor + shift,
            pinned=self.pinned if pinned is None else pinned,
        )


@dataclass(frozen=True, eq=False)
class SeriesTerm:
    mu: float
    # row m is the coefficient of t^m, shape (degree + 1, 2n)
    coefficients: np.ndarray = field(repr=False)

    @property
    def degree(self) -> int:
        return self.coefficients.shape[0] - 1


@dataclass(frozen=True, eq=False)
class AsymptoticExpansion:
    terms: Tuple[SeriesTerm, ...]
    side: Side = Side.future
    g: Dict[float, np.ndarray] = field(default_factory=dict, repr=False)
    lambda_star: Optional[float] = None
    residual: float = 0.0
    dropped_terms: int = 0

    def __call__(self, t) -> np.ndarray:
        return self._evaluate(t, derivative=False)

    def derivative(self, t) -> np.ndarray:
        return self._evaluate(t, derivative=True)

    def _evaluate(self, t, derivative: bool) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        sign = -1.0 if self.side == Side.future else 1.0
        width = self.terms[0].coefficients.shape[1] if self.terms else 0
        out = np.zeros((len(t), width))
        for term in self.terms:
            exp = np.exp(sign * term.mu * t)
            poly = np.polynomial.polynomial.polyval(t, term.coefficients).T
            if derivative:
                dpoly = np.polynomial.polynomial.polyval(
                    t, np.polynomial.polynomial.polyder(term.coefficients)
                ).T if term.degree > 0 else 0.0
                out += (dpoly + sign * term.mu * poly) * exp[:, None]
            else:
                out += poly * exp[:, None]
        return out

    def term(self, mu: float, tol: float = 1e-9) -> Optional[SeriesTerm]:
        for t in self.terms:
            if abs(t.mu - mu) <= tol * max(1.0, mu):
                return t
        return None

    @property
    def mu_values(self) -> Tuple[float, ...]:
        return tuple(t.mu for t in self.terms)

    @property
    def degrees(self) -> Dict[float, int]:
        return {t.mu: t.degree for t in self.terms}


@dataclass(frozen=True)
class ScatteringGeometry:
    S_minus: float
    S_plus: float
    D_minus: float
    D_plus: float
    nu_minus: int
    nu_plus: int
    g_minus: float
    g_plus: float
    lambda_star: float
    z_impact: Tuple[float, ...] = ()
    omega_in: int = 1
    omega_out: int = 1
    # finite-t values of |x'(t)| e^{-+(sum lambda - 2 lambda*)t} at the window ends
    D_minus_sequence: float = 0.0
    D_plus_sequence: float = 0.0
