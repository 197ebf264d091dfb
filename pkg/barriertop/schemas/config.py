from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from barriertop.core.config import settings


class TableSpec(BaseModel):
    x: List[float]
    V: List[float]


class PotentialSpec(BaseModel):
    family: str
    params: List[float] = Field(default_factory=list)
    dimension: int = 1
    decay_exponent: Optional[float] = None
    table: Optional[TableSpec] = None


class GridSpec(BaseModel):
    L: float = Field(gt=0)
    N: int = Field(ge=16)
    discretization: str = settings.DEFAULT_DISCRETIZATION

    @field_validator("discretization")
    @classmethod
    def known_discretization(cls, v: str) -> str:
        if v not in ("fd2", "fd4", "fourier"):
            raise ValueError("discretization must be fd2, fd4 or fourier")
        return v


class ScalingSpec(BaseModel):
    type: str = "uniform"  # uniform, exterior
    theta: float = settings.DEFAULT_THETA
    R0: float = 0.0
    smoothing_width: float = 1.0

    @field_validator("type")
    @classmethod
    def known_type(cls, v: str) -> str:
        if v not in ("uniform", "exterior"):
            raise ValueError("scaling type must be uniform or exterior")
        return v


class StripSpec(BaseModel):
    # energy half-width of the box around E0, as a fraction of E0
    epsilon: float = 0.15
    # lattice radius: decay sums below C are searched
    C: float = 2.0
    # strip depth for the propagator expansion
    mu: Optional[float] = None


class ContourSpec(BaseModel):
    # circle radius in units of h
    radius_factor: float = 0.5
    n_quad: int = Field(default=32, ge=8)


class BumpSpec(BaseModel):
    center: float = 0.0
    plateau: float
    support: float

    @model_validator(mode="after")
    def ordered(self):
        if not 0 <= self.plateau < self.support:
            raise ValueError("bump needs 0 <= plateau < support")
        return self


class ResonanceOptions(BaseModel):
    match_limit: float = 1.0
    certify_box: bool = False
    # box ([E0 - width, E0 + width] + i[-depth h, 0]) scanned for stray eigenvalues
    zone_width: float = 0.2
    zone_depth: float = 3.0
    zone_disc: float = 6.0


class ProbeOptions(BaseModel):
    shape: Tuple[int, int] = (40, 20)
    re_halfwidth: float = 0.2
    # imaginary range in units of h, measured downward from the real axis
    im_depth: float = 3.0


class ProjectOptions(BaseModel):
    alphas: List[List[int]] = Field(default_factory=lambda: [[0]])
    outgoing_radius: float = 4.0
    outgoing_half_width: float = 0.5


class CurvesOptions(BaseModel):
    N: float = 8.0
    span: float = 10.0
    j_max: int = 60
    tol: float = 1e-10
    # spatial leading coefficient per lambda, keyed by the lambda value as text
    g: Dict[str, List[float]] = Field(default_factory=dict)
    time_reverse: bool = True


class PropagateOptions(BaseModel):
    t_start: float = 0.2  # in units of |ln h|
    t_stop: float = 8.0
    samples: int = Field(default=60, ge=4)
    test_states: int = Field(default=4, ge=1)
    chi: Optional[BumpSpec] = None
    # spectral cutoff plateau as a fraction of epsilon
    psi_plateau: float = 0.5


class ScatterOptions(BaseModel):
    alphas: List[List[int]] = Field(default_factory=lambda: [[0]])
    nodes: int = Field(default=32, ge=8)
    # contour radius in units of h
    radius_factor: float = 0.1
    omega: int = 1
    omega_prime: int = 1


class RunConfig(BaseModel):
    command: Optional[str] = None
    potential: PotentialSpec
    h_list: List[float]
    grid: GridSpec
    scaling: ScalingSpec = Field(default_factory=ScalingSpec)
    strip: StripSpec = Field(default_factory=StripSpec)
    contour: ContourSpec = Field(default_factory=ContourSpec)
    resonances: ResonanceOptions = Field(default_factory=ResonanceOptions)
    probe: ProbeOptions = Field(default_factory=ProbeOptions)
    project: ProjectOptions = Field(default_factory=ProjectOptions)
    curves: CurvesOptions = Field(default_factory=CurvesOptions)
    propagate: PropagateOptions = Field(default_factory=PropagateOptions)
    scatter: ScatterOptions = Field(default_factory=ScatterOptions)
    output_dir: str = settings.RESULTS_DIR
    oracle: bool = settings.DENSE_ORACLE

    @field_validator("h_list")
    @classmethod
    def decreasing(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("h_list must not be empty")
        if any(h <= 0 for h in v):
            raise ValueError("h_list entries must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("h_list must be strictly decreasing")
        return v
