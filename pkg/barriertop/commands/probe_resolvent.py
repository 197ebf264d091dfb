import logging
import time

from barriertop.commands.deps import RunContext, check_strip, get_barrier, get_operator, get_potential, h_label
from barriertop.core.router import CommandRouter
from barriertop.schemas.config import RunConfig
from barriertop.services.lattice_service import pseudo_resonances
from barriertop.services.operator_service import find_resonances, fit_resolvent_exponent, scan_resolvent

logger = logging.getLogger(__name__)

router = CommandRouter(
    name="probe-resolvent",
    help="Resolvent norms times prod |z - z_alpha| on a z-grid of the strip, and the fitted h^{-K}",
    artifacts=["resolvent_<h>.csv", "resolvent.json"],
)


@router.command
def run(config: RunConfig, ctx: RunContext) -> None:
    pot = get_potential(config)
    barrier = get_barrier(pot)
    check_strip(config, barrier)
    opts = config.probe

    scans = {}
    resonances = {}
    for h in config.h_list:
        started = time.perf_counter()
        op = get_operator(config, pot, h)
        hits = find_resonances(op, pseudo_resonances(barrier, h, config.strip.C))
        zs = [hit.z for hit in hits]
        rows = scan_resolvent(
            op,
            zs,
            (barrier.E0 - opts.re_halfwidth, barrier.E0 + opts.re_halfwidth),
            (-opts.im_depth * h, 0.0),
            tuple(opts.shape),
        )
        scans[h] = rows
        resonances[h_label(h)] = [[z.real, z.imag] for z in zs]
        ctx.write_csv(f"resolvent_{h_label(h)}.csv", rows)
        ctx.wall_times[h_label(h)] = time.perf_counter() - started

    fit = fit_resolvent_exponent(scans)
    logger.info("resolvent exponents %s, spread %.3f", fit["K"], fit["relative_spread"])
    ctx.write_json(
        "resolvent.json",
        {
            "K": {h_label(h): k for h, k in fit["K"].items()},
            "relative_spread": fit["relative_spread"],
            "resonances": resonances,
        },
    )
