from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class ResonanceRow(BaseModel):
    h: float
    alpha: List[int]
    re_z: float
    im_z: float
    re_z0: float
    im_z0: float
    distance_over_h: float
    residual: float
    iterations: int
    flagged: bool


class ProjectionRow(BaseModel):
    h: float
    alpha: List[int]
    c_re: float
    c_im: float
    predicted_re: float
    predicted_im: float
    modulus_ratio: float
    phase_gap: float
    scaled_modulus: float
    rank_gap: float
    idempotency_defect: float
    kernel_symmetry: float
    residual: float
    incoming_fraction: Optional[float] = None


class CurveSummary(BaseModel):
    N: float
    T_N: float
    C1: float
    residual: float
    weighted_sup: float
    picard_ratios: List[float]
    prescription_mismatch: float
    correction_decay: float
    flow_deviation: float
    flow_window: float
    degrees: Dict[str, int]
    resonant_levels: List[float]
    recursion_defect: float


class PropagationSummary(BaseModel):
    h: float
    mu: float
    included: List[List[float]]
    fitted_mu: Optional[float]
    fitted_K: Optional[float]
    onset_time: Optional[float]
    fit_start: float
    first_excluded_rate: float
    no_exponential_regime: bool = False


class ResidueRow(BaseModel):
    alpha: List[int]
    h: float
    residue_re: float
    residue_im: float
    predicted_re: Optional[float] = None
    predicted_im: Optional[float] = None
    pole_fit_re: Optional[float] = None
    pole_fit_im: Optional[float] = None
    slope_fit: Optional[float] = None


class RunManifest(BaseModel):
    command: str
    config_hash: str
    artifacts: Dict[str, str] = Field(default_factory=dict)
    versions: Dict[str, str] = Field(default_factory=dict)
    # seconds per h level; kept out of the artifacts so their checksums stay stable
    wall_times: Dict[str, float] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    status: str = "ok"
    error: Optional[str] = None
