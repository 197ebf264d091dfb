from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Optional

from barriertop.models.lattice import MultiIndex


class ResidueMethod(str, enum.Enum):
    contour_quadrature = "contour_quadrature"
    pole_fit = "pole_fit"


def amplitude_constant(z: complex, h: float, n: int = 1) -> complex:
    """c(z, h) = -2 pi z^{-(n-1)/4} (2 pi h)^{(n-1)/2} e^{-i (n-3) pi / 4}, with A = c T.

    For n = 1 the z and h powers vanish and c = -2 pi i, so A = S - Id.
    """
    z = complex(z)
    return complex(
        -2.0 * math.pi
        * z ** (-(n - 1) / 4.0)
        * (2.0 * math.pi * h) ** ((n - 1) / 2.0)
        * cmath.exp(-1j * (n - 3) * math.pi / 4.0)
    )


@dataclass(frozen=True)
class ScatteringData1D:
    z: complex
    h: float
    T: complex
    R_left: complex
    R_right: Optional[complex]
    matching_radius: float
    # angle of the line x = s e^{i phi} the equation is integrated on
    path_angle: float = 0.0
    # T recomputed from the Wronskian of the two Jost solutions
    wronskian_T: Optional[complex] = None

    def s_matrix(self, omega: int, omega_prime: int) -> complex:
        """S-matrix entry from incoming direction omega_prime to outgoing omega."""
        if omega not in (1, -1) or omega_prime not in (1, -1):
            raise ValueError("directions are +1 or -1")
        if omega == omega_prime:
            return self.T
        if omega_prime == 1:
            return self.R_left
        if self.R_right is None:
            raise ValueError("right reflection was not computed")
        return self.R_right

    def t_kernel(self, omega: int, omega_prime: int) -> complex:
        """Kernel of T(z, h) defined by S = Id - 2 i pi T."""
        delta = 1.0 if omega == omega_prime else 0.0
        return (delta - self.s_matrix(omega, omega_prime)) / (2j * math.pi)

    def amplitude(self, omega: int, omega_prime: int) -> complex:
        """Scattering amplitude c(z, h) T(omega, omega_prime, z, h).

        In one dimension this is T - 1 forward and a reflection coefficient backward.
        """
        return amplitude_constant(self.z, self.h) * self.t_kernel(omega, omega_prime)

    @property
    def flux_defect(self) -> float:
        """| |T|^2 + |R|^2 - 1 |, meaningful for real z."""
        return abs(abs(self.T) ** 2 + abs(self.R_left) ** 2 - 1.0)


@dataclass(frozen=True)
class ResidueRecord:
    z_pole: complex
    residue: complex
    method: ResidueMethod
    h: float
    alpha: MultiIndex
    z_alpha: complex
    predicted: Optional[complex] = None
    pole_fit_residue: Optional[complex] = None
    pole_fit_location: Optional[complex] = None
    radius: float = 0.0
    # c(z_alpha, h) the amplitude was normalized with
    amplitude_constant: complex = -2j * math.pi

    @property
    def agreement(self) -> Optional[float]:
        if self.pole_fit_residue is None:
            return None
        return abs(self.residue - self.pole_fit_residue) / abs(self.residue)

    @property
    def pole_offset(self) -> float:
        """|z_pole - z_alpha| in units of h."""
        return abs(self.z_pole - self.z_alpha) / self.h


@dataclass(frozen=True)
class PredictedResidue:
    value: complex
    # leading product b_-0 b_+0 without the h power and the action phase
    leading: complex
    leading_zero: bool
