"""Shared pieces of every command: config loading, model construction and artifact output."""

import csv
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from barriertop.core.errors import ConfigError, ForbiddenRadius
from barriertop.models.operator import BumpSpec as Bump
from barriertop.models.operator import Discretization, Grid1D, ScaledOperator, Scaling, ScalingType
from barriertop.models.potential import BarrierData, Potential
from barriertop.schemas.config import BumpSpec, RunConfig
from barriertop.services.lattice_service import check_radius
from barriertop.services.operator_service import assemble_scaled
from barriertop.services.potential_service import barrier_data, build_potential

logger = logging.getLogger(__name__)


def load_config(
    path: str,
    h_list: Optional[Sequence[float]] = None,
    output_dir: Optional[str] = None,
    oracle: Optional[bool] = None,
) -> RunConfig:
    """Read a JSON config, apply CLI overrides, then validate."""
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file '{path}' not found")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file '{path}' is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    if h_list is not None:
        raw["h_list"] = list(h_list)
    if output_dir is not None:
        raw["output_dir"] = output_dir
    if oracle:
        raw["oracle"] = True

    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {e.errors()[0]['loc']}: {e.errors()[0]['msg']}", {"errors": len(e.errors())})


def parse_h_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--h expects a comma separated list of numbers, got '{text}'")


def canonical_json(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def get_potential(config: RunConfig) -> Potential:
    spec = config.potential
    table = (spec.table.x, spec.table.V) if spec.table is not None else None
    return build_potential(spec.family, spec.params, spec.dimension, spec.decay_exponent, table)


def get_barrier(pot: Potential) -> BarrierData:
    return barrier_data(pot)


def check_strip(config: RunConfig, barrier: BarrierData) -> None:
    """Lattice validity of C and mu, reported as a config error."""
    try:
        check_radius(barrier.lambdas, config.strip.C)
        if config.strip.mu is not None:
            check_radius(barrier.lambdas, config.strip.mu)
    except ForbiddenRadius as e:
        raise ConfigError(str(e), e.context)


def get_grid(config: RunConfig) -> Grid1D:
    try:
        return Grid1D(half_length=config.grid.L, points=config.grid.N)
    except ValueError as e:
        raise ConfigError(str(e))


def get_scaling(config: RunConfig) -> Scaling:
    spec = config.scaling
    return Scaling(type=ScalingType(spec.type), R0=spec.R0, smoothing_width=spec.smoothing_width)


def get_operator(config: RunConfig, pot: Potential, h: float) -> ScaledOperator:
    return assemble_scaled(
        pot,
        get_grid(config),
        h,
        config.scaling.theta,
        get_scaling(config),
        Discretization(config.grid.discretization),
    )


def to_bump(spec: BumpSpec) -> Bump:
    return Bump(center=spec.center, plateau=spec.plateau, support=spec.support)


def _default(obj: Any):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "model_dump"):
        return obj.model_dump(mode="json")
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class RunContext:
    """Output directory of one command run and the checksums of what was written."""

    def __init__(self, config: RunConfig, command: str):
        self.config = config
        self.command = command
        self.out_dir = Path(config.output_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: Dict[str, str] = {}
        self.wall_times: Dict[str, float] = {}

    def _record(self, path: Path) -> Path:
        self.artifacts[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
        logger.info("wrote %s", path)
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.out_dir / name
        path.write_text(json.dumps(payload, default=_default, sort_keys=True, indent=2) + "\n")
        return self._record(path)

    def write_csv(self, name: str, rows: Iterable[Dict[str, Any]]) -> Path:
        rows = list(rows)
        path = self.out_dir / name
        with path.open("w", newline="") as fh:
            if rows:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()), lineterminator="\n")
                writer.writeheader()
                for row in rows:
                    writer.writerow({k: _clean(v) for k, v in row.items()})
        return self._record(path)


def h_label(h: float) -> str:
    return f"h{h:g}"
