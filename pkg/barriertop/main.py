import argparse
import logging
import sys
import warnings
from importlib import metadata
from typing import Dict, List, Optional

from barriertop.commands import curves, probe_resolvent, project, propagate, resonances, scatter
from barriertop.commands.deps import RunContext, config_hash, load_config, parse_h_list
from barriertop.core.config import settings
from barriertop.core.errors import BarrierTopError, ConfigError
from barriertop.core.logging import configure_logging
from barriertop.core.router import CommandApp
from barriertop.schemas.records import RunManifest

logger = logging.getLogger("barriertop")

app = CommandApp(title=settings.PROJECT_NAME, version=settings.VERSION)

# Include routers
app.include_router(resonances.router)
app.include_router(probe_resolvent.router)
app.include_router(project.router)
app.include_router(curves.router)
app.include_router(propagate.router)
app.include_router(scatter.router)

PACKAGES = ("barriertop", "numpy", "scipy", "sympy", "pydantic", "pydantic-settings")


def _versions() -> Dict[str, str]:
    out = {}
    for name in PACKAGES:
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = settings.VERSION if name == "barriertop" else "unknown"
    out["python"] = sys.version.split()[0]
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=app.title, description="Barrier-top resonance experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {app.version}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, router in app.routers.items():
        epilog = "artifacts: " + ", ".join(router.artifacts) if router.artifacts else None
        cmd = sub.add_parser(name, help=router.help, description=router.help, epilog=epilog)
        cmd.add_argument("--config", required=True, help="JSON run configuration")
        cmd.add_argument("--out", default=None, help="output directory, overrides the config")
        cmd.add_argument("--h", default=None, help="comma separated h values, overrides h_list")
        cmd.add_argument("--oracle", action="store_true", help="enable dense-eigensolve cross-checks")
    return parser


def run(command: str, config_path: str, out: Optional[str] = None, h: Optional[str] = None, oracle: bool = False) -> int:
    """Execute one command and write its manifest. Returns the process exit code."""
    router = app.get(command)
    try:
        config = load_config(config_path, parse_h_list(h) if h else None, out, oracle)
    except ConfigError as e:
        logger.error("config error: %s", e)
        return e.exit_code
    if config.command is not None and config.command != command:
        logger.warning("config was written for '%s', running '%s'", config.command, command)

    ctx = RunContext(config, command)
    manifest = RunManifest(command=command, config_hash=config_hash(config), versions=_versions())
    code = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            router.handler(config, ctx)
        except BarrierTopError as e:
            logger.error("%s failed: %s", command, e)
            manifest.status = "config_error" if isinstance(e, ConfigError) else "numerical_failure"
            manifest.error = f"{type(e).__name__}: {e}"
            code = e.exit_code
    manifest.warnings = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    manifest.artifacts = dict(ctx.artifacts)
    manifest.wall_times = dict(ctx.wall_times)
    ctx.write_json("manifest.json", manifest.model_dump())
    return code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    return run(args.command, args.config, args.out, args.h, args.oracle)


if __name__ == "__main__":
    sys.exit(main())
