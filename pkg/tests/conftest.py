import json
from pathlib import Path

import pytest

from barriertop.models.operator import Grid1D
from barriertop.services.potential_service import barrier_data, build_potential


@pytest.fixture
def sech2():
    return build_potential("sech2_barrier", [1.0])


@pytest.fixture
def sech2_data(sech2):
    return barrier_data(sech2)


@pytest.fixture
def quadratic():
    """Inverted oscillator V = 1 - x^2, lambda = 2."""
    return build_potential("quadratic_model", [1.0, 2.0])


@pytest.fixture
def quadratic_data(quadratic):
    return barrier_data(quadratic)


@pytest.fixture
def small_grid():
    return Grid1D(half_length=4.0, points=801)


@pytest.fixture
def write_config(tmp_path: Path):
    """Write a sech^2 run config with overrides and return its path."""

    def _write(**overrides) -> Path:
        config = {
            "potential": {"family": "sech2_barrier", "params": [1.0]},
            "h_list": [0.1],
            "grid": {"L": 6.0, "N": 481, "discretization": "fd4"},
            "scaling": {"type": "uniform", "theta": 0.3},
            "strip": {"C": 2.0},
            "output_dir": str(tmp_path / "out"),
        }
        config.update(overrides)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        return path

    return _write
