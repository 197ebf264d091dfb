from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sparse

from barriertop.models.lattice import MultiIndex

Matrix = Union[np.ndarray, sparse.spmatrix]


class Discretization(str, enum.Enum):
    fd2 = "fd2"
    fd4 = "fd4"
    fourier = "fourier"


class ScalingType(str, enum.Enum):
    uniform = "uniform"
    exterior = "exterior"


@dataclass(frozen=True)
class Scaling:
    type: ScalingType = ScalingType.uniform
    R0: float = 0.0
    smoothing_width: float = 1.0


@dataclass(frozen=True)
class Grid1D:
    half_length: float
    points: int

    def __post_init__(self):
        if self.points < 16:
            raise ValueError("Grid1D needs at least 16 points")
        if self.half_length <= 0:
            raise ValueError("Grid1D half_length must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / (self.points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.half_length, self.half_length, self.points)

    @property
    def midpoints(self) -> np.ndarray:
        # N + 1 staggered points, including the two next to the Dirichlet ghosts
        return np.concatenate([[self.nodes[0] - 0.5 * self.spacing], self.nodes + 0.5 * self.spacing])

    @property
    def dirichlet_half_length(self) -> float:
        """Half-length of the box where the zero boundary values sit."""
        return self.half_length + self.spacing

    def doubled(self) -> "Grid1D":
        return Grid1D(half_length=2 * self.half_length, points=2 * self.points - 1)


@dataclass(frozen=True, eq=False)
class ScaledOperator:
    theta: float
    scaling: Scaling
    matrix: Matrix
    h: float
    discretization: Discretization
    grid: Grid1D
    # complex contour x(y) and the quadrature weights J(y) * dy
    contour: np.ndarray = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def rotation(self) -> float:
        """Angle by which the essential spectrum rotates, divided by two."""
        if self.scaling.type == ScalingType.uniform:
            return self.theta
        return float(np.arctan(self.theta))

    def dense(self) -> np.ndarray:
        if sparse.issparse(self.matrix):
            return self.matrix.toarray()
        return np.asarray(self.matrix)


@dataclass
class ResonanceHit:
    z: complex
    alpha: MultiIndex
    right_vector: np.ndarray = field(repr=False)
    residual: float
    match_distance: float
    shift: complex = 0j
    iterations: int = 0
    flagged: bool = False


@dataclass
class RieszProjector:
    center: complex
    radius: float
    n_quad: int
    matrix: np.ndarray = field(repr=False)
    rank_gap: float
    norm: float
    idempotency_defect: float = 0.0
    quadrature_change: float = 0.0
    enclosed: int = 0


@dataclass(frozen=True)
class BumpSpec:
    """Smooth bump: 1 on |E - center| <= plateau, 0 beyond support."""

    center: float
    plateau: float
    support: float

    def __post_init__(self):
        if not 0 <= self.plateau < self.support:
            raise ValueError("bump needs 0 <= plateau < support")


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    h: float = 0.0
    grid: Optional[Grid1D] = None
    # rows of the biorthogonal dual basis; None for a Hermitian decomposition
    dual: Optional[np.ndarray] = field(default=None, repr=False)
