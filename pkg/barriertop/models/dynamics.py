from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from barriertop.models.operator import BumpSpec


@dataclass(frozen=True, eq=False)
class PropagatorRun:
    h: float
    times: np.ndarray = field(repr=False)
    chi_spec: BumpSpec
    psi_spec: BumpSpec
    test_states: Tuple[np.ndarray, ...] = field(repr=False)
    # strip depth: resonances with decay sum below mu are summed
    mu: float

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("propagator times must increase")
        if not self.test_states:
            raise ValueError("at least one test state is needed")


@dataclass(frozen=True, eq=False)
class ExpansionComparison:
    times: np.ndarray = field(repr=False)
    # max over test states of ||LHS - sum|| / ||u0||
    error_curve: np.ndarray = field(repr=False)
    # max over test states of ||LHS - sum|| / ||LHS||
    relative_error: np.ndarray = field(repr=False)
    lhs_norm: np.ndarray = field(repr=False)
    sum_norm: np.ndarray = field(repr=False)
    fitted_mu: Optional[float]
    fitted_K: Optional[float]
    onset_time: Optional[float]
    fit_start: float
    included: List[complex] = field(default_factory=list)
    log_inverse_h: float = 0.0
    # rounding level of the modal sum, eps * sum |c_k| e^{t Im lambda_k / h}
    noise_floor: Optional[np.ndarray] = field(default=None, repr=False)

    def bound(self) -> np.ndarray:
        """e^{-mu t} h^{-K} with the fitted parameters, NaN when no fit exists."""
        if self.fitted_mu is None:
            return np.full_like(self.times, np.nan)
        return np.exp(-self.fitted_mu * self.times + self.fitted_K * self.log_inverse_h)
