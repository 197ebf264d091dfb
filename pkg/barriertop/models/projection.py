from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from barriertop.models.lattice import MultiIndex


@dataclass(frozen=True, eq=False)
class ResonantState:
    samples: np.ndarray = field(repr=False)
    contour: np.ndarray = field(repr=False)
    h: float
    alpha: MultiIndex
    z: complex
    # Taylor coefficient used for the scaling, window half-width, local defect
    normalization: Dict[str, float] = field(default_factory=dict)
    residual: float = 0.0

    def conjugated(self) -> "ResonantState":
        """J f = conj(f); incoming and outgoing roles swap."""
        return ResonantState(
            samples=np.conj(self.samples),
            contour=self.contour,
            h=self.h,
            alpha=self.alpha,
            z=complex(np.conj(self.z)),
            normalization=dict(self.normalization),
            residual=self.residual,
        )


@dataclass(frozen=True)
class ProjectionConstant:
    c_num: complex
    h: float
    alpha: MultiIndex
    predicted: complex
    modulus_ratio: float
    phase_gap: float
    # max relative defect of Pi v = c (v, conj f) f over the random probes
    consistency: float = 0.0


@dataclass(frozen=True)
class OutgoingReport:
    R: float
    h: float
    # incoming energy share on the windows around -R and +R
    incoming_fraction: Dict[str, float]
    fit_residual: float

    @property
    def worst(self) -> float:
        return max(self.incoming_fraction.values())
