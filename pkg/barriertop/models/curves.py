from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from barriertop.models.geometry import AsymptoticExpansion
from barriertop.models.potential import HomogeneousField


@dataclass(frozen=True, eq=False)
class LinearizationData:
    Fp: np.ndarray = field(repr=False)
    lambdas: np.ndarray = field(repr=False)
    # eigenvalues of Fp in the column order of ``eigenvectors``
    spectrum: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    eigenvectors_inv: np.ndarray = field(repr=False)
    projectors: Dict[float, np.ndarray] = field(default_factory=dict, repr=False)
    partial_inverses: Dict[float, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def dimension(self) -> int:
        return len(self.lambdas)

    def key(self, mu: float, tol: float = 1e-9) -> Optional[float]:
        """The lambda_j key matching ``mu``, if any."""
        for lam in self.projectors:
            if abs(lam - mu) <= tol * max(1.0, lam):
                return lam
        return None

    def shifted_inverse(self, mu: float) -> np.ndarray:
        """(Fp + mu)^{-1} for mu off the spectrum."""
        return (self.eigenvectors / (self.spectrum + mu)) @ self.eigenvectors_inv


@dataclass(frozen=True, eq=False)
class FormalCurve:
    expansion: AsymptoticExpansion
    prescribed: Dict[float, np.ndarray] = field(repr=False)
    truncation_N: float = 0.0
    taylor_order: int = 2
    # max defect of the coefficient equations at every level mu <= N
    recursion_defect: float = 0.0
    resonant_levels: Tuple[float, ...] = ()
    fields: Tuple[HomogeneousField, ...] = field(default=(), repr=False)

    def __call__(self, t) -> np.ndarray:
        return self.expansion(t)

    def derivative(self, t) -> np.ndarray:
        return self.expansion.derivative(t)


@dataclass(frozen=True, eq=False)
class RefinedCurve:
    formal: FormalCurve
    correction: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    correction_rate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    times: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    T_N: float
    N: float
    window_end: float
    picard_history: List[float] = field(default_factory=list)
    residual: float = 0.0
    weighted_sup: float = 0.0
    flow_deviation: float = 0.0
    flow_window: float = 0.0
    C1: float = 0.0

    def __call__(self, t) -> np.ndarray:
        return self.formal(t) + self.correction(t)

    def derivative(self, t) -> np.ndarray:
        return self.formal.derivative(t) + self.correction_rate(t)

    @property
    def window(self) -> np.ndarray:
        return self.times <= self.window_end + 1e-12

    @property
    def states(self) -> np.ndarray:
        return self.formal(self.times) + self.r

    @property
    def ratios(self) -> List[float]:
        h = self.picard_history
        return [b / a for a, b in zip(h, h[1:]) if a > 0]


@dataclass
class PrescriptionReport:
    recovered: Dict[float, np.ndarray]
    prescribed: Dict[float, np.ndarray]
    mismatch: float
    correction_decay: float
    passed: bool
