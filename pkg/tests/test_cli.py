"""Tests for the command line surface and the run manifest."""

import csv
import json

import pytest

from barriertop.commands.deps import RunContext, load_config, parse_h_list
from barriertop.core.errors import ConfigError
from barriertop.main import app, build_parser, main


def _manifest(tmp_path):
    return json.loads((tmp_path / "out" / "manifest.json").read_text())


def test_all_commands_are_registered():
    assert set(app.routers) == {"resonances", "probe_resolvent", "project", "curves", "propagate", "scatter"}
    args = build_parser().parse_args(["scatter", "--config", "c.json", "--h", "0.1,0.05", "--oracle"])
    assert args.command == "scatter"
    assert args.oracle


def test_parse_h_list():
    assert parse_h_list("0.1, 0.05,0.025") == [0.1, 0.05, 0.025]
    with pytest.raises(ConfigError):
        parse_h_list("0.1,small")


def test_missing_or_broken_config(tmp_path):
    assert main(["resonances", "--config", str(tmp_path / "nope.json")]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["resonances", "--config", str(broken)]) == 2
    with pytest.raises(ConfigError):
        load_config(str(broken))


def test_invalid_field_is_a_config_error(write_config):
    with pytest.raises(ConfigError):
        load_config(str(write_config(h_list=[-0.1])))


def test_cli_overrides(write_config, tmp_path):
    config = load_config(str(write_config()), [0.2, 0.1], str(tmp_path / "elsewhere"), True)
    assert config.h_list == [0.2, 0.1]
    assert config.oracle
    assert config.output_dir == str(tmp_path / "elsewhere")


def test_forbidden_strip_radius_exits_with_config_error(write_config, tmp_path):
    """C = 3 is a decay sum of the sech^2 lattice."""
    path = write_config(strip={"C": 3.0})
    assert main(["resonances", "--config", str(path)]) == 2
    manifest = _manifest(tmp_path)
    assert manifest["status"] == "config_error"
    assert manifest["error"].startswith("ConfigError")


def test_propagate_needs_exterior_scaling(write_config, tmp_path):
    path = write_config(command="propagate", strip={"C": 2.0, "mu": 2.0})
    assert main(["propagate", "--config", str(path)]) == 2
    assert _manifest(tmp_path)["status"] == "config_error"


def test_resonances_run_is_reproducible(write_config, tmp_path):
    path = write_config(command="resonances")
    assert main(["resonances", "--config", str(path)]) == 0
    first = _manifest(tmp_path)
    assert first["status"] == "ok"
    assert set(first["artifacts"]) == {"resonances.csv", "lattice.json"}
    assert first["versions"]["numpy"]

    with (tmp_path / "out" / "resonances.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert float(rows[0]["re_z"]) == pytest.approx(1.0, abs=0.01)
    assert float(rows[0]["im_z"]) == pytest.approx(-0.1, abs=0.01)
    lattice = json.loads((tmp_path / "out" / "lattice.json").read_text())
    assert lattice["lambdas"] == pytest.approx([2.0])

    assert main(["resonances", "--config", str(path)]) == 0
    second = _manifest(tmp_path)
    assert second["artifacts"] == first["artifacts"]
    assert second["config_hash"] == first["config_hash"]


def test_run_context_checksums(write_config, tmp_path):
    ctx = RunContext(load_config(str(write_config())), "resonances")
    ctx.write_csv("rows.csv", [{"a": 1.0, "b": float("nan")}])
    ctx.write_json("data.json", {"z": complex(1.0, -0.1)})
    assert set(ctx.artifacts) == {"rows.csv", "data.json"}
    assert (tmp_path / "out" / "rows.csv").read_text() == "a,b\n1.0,\n"
    assert json.loads((tmp_path / "out" / "data.json").read_text()) == {"z": {"re": 1.0, "im": -0.1}}
