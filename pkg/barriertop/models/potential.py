from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np


class PotentialFamily(str, enum.Enum):
    sech2_barrier = "sech2_barrier"
    gaussian_barrier = "gaussian_barrier"
    anisotropic_gaussian = "anisotropic_gaussian"
    quadratic_model = "quadratic_model"
    perturbed_quadratic = "perturbed_quadratic"
    user_table = "user_table"


# Families that do not decay at infinity and are refused by scattering
NON_DECAYING = {PotentialFamily.quadratic_model, PotentialFamily.perturbed_quadratic}


@dataclass(frozen=True)
class Potential:
    family: PotentialFamily
    params: Tuple[float, ...]
    dimension: int = 1
    decay_exponent: float = math.inf
    # user_table only: abscissae and values, V = 0 outside the table
    table_x: Tuple[float, ...] = ()
    table_v: Tuple[float, ...] = ()

    @property
    def decaying(self) -> bool:
        return self.family not in NON_DECAYING

    @property
    def short_range(self) -> bool:
        return self.decaying and self.decay_exponent > 1

    @property
    def height(self) -> float:
        if self.family == PotentialFamily.user_table:
            return float(max(self.table_v))
        return float(self.params[0])


@dataclass(frozen=True, eq=False)
class BarrierData:
    E0: float
    apex: np.ndarray
    lambdas: np.ndarray
    hessian: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.lambdas)

    @property
    def lambda_min(self) -> float:
        return float(self.lambdas[0])

    @property
    def lambda_max(self) -> float:
        return float(self.lambdas[-1])


@dataclass(frozen=True, eq=False)
class PhasePoint:
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "xi", np.atleast_1d(np.asarray(self.xi, dtype=float)))
        if self.x.shape != self.xi.shape:
            raise ValueError("x and xi must have the same dimension")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.xi))):
            raise ValueError("phase point components must be finite")

    @classmethod
    def from_vector(cls, u: np.ndarray) -> "PhasePoint":
        u = np.asarray(u, dtype=float)
        n = len(u) // 2
        return cls(x=u[:n], xi=u[n:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.xi])


@dataclass(frozen=True)
class HomogeneousField:
    """Degree-k homogeneous polynomial part of H_p at the apex.

    ``terms`` maps a monomial exponent over the position variables to the
    coefficient vector in R^{2n}. Only position monomials occur since the
    position component 2*xi of H_p is linear.
    """

    degree: int
    dimension: int
    terms: Tuple[Tuple[Tuple[int, ...], Tuple[float, ...]], ...] = field(default_factory=tuple)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        x = u[: self.dimension]
        out = np.zeros(2 * self.dimension, dtype=np.result_type(u, float))
        for monomial, coeff in self.terms:
            out = out + np.asarray(coeff) * np.prod(x ** np.asarray(monomial))
        return out

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, monomial: Tuple[int, ...]) -> Optional[np.ndarray]:
        for mono, coeff in self.terms:
            if tuple(mono) == tuple(monomial):
                return np.asarray(coeff)
        return None
