import logging
import time
from typing import Dict

from barriertop.commands.deps import RunContext, check_strip, get_barrier, get_operator, get_potential, h_label
from barriertop.core.router import CommandRouter
from barriertop.schemas.config import RunConfig
from barriertop.schemas.records import ResonanceRow
from barriertop.services.lattice_service import convergence_rates, lattice_records, pseudo_resonances
from barriertop.services.operator_service import (
    certify_box,
    dense_resonances,
    find_resonances,
    stray_eigenvalues,
)

logger = logging.getLogger(__name__)

router = CommandRouter(
    name="resonances",
    help="Shift-invert resonances at every lattice point below C, per h",
    artifacts=["resonances.csv", "lattice.json"],
)


@router.command
def run(config: RunConfig, ctx: RunContext) -> None:
    pot = get_potential(config)
    barrier = get_barrier(pot)
    check_strip(config, barrier)
    opts = config.resonances

    rows = []
    lattice: Dict[str, object] = {"E0": barrier.E0, "lambdas": barrier.lambdas.tolist(), "C": config.strip.C, "levels": {}}
    distances: Dict[str, Dict[float, float]] = {}
    for h in config.h_list:
        started = time.perf_counter()
        points = pseudo_resonances(barrier, h, config.strip.C)
        op = get_operator(config, pot, h)
        hits = find_resonances(op, points, match_limit=opts.match_limit)
        z0_by_alpha = {p.alpha: p.z0 for p in points}
        for hit in hits:
            z0 = z0_by_alpha[hit.alpha]
            rows.append(
                ResonanceRow(
                    h=h,
                    alpha=list(hit.alpha.alpha),
                    re_z=hit.z.real,
                    im_z=hit.z.imag,
                    re_z0=z0.real,
                    im_z0=z0.imag,
                    distance_over_h=hit.match_distance,
                    residual=hit.residual,
                    iterations=hit.iterations,
                    flagged=hit.flagged,
                ).model_dump()
            )
            distances.setdefault(str(hit.alpha), {})[h] = hit.match_distance

        level: Dict[str, object] = {"points": lattice_records(points)}
        if config.oracle:
            depth = config.strip.C * h
            dense = dense_resonances(op, complex(barrier.E0, -0.5 * depth), depth)
            gaps = [min(abs(hit.z - d) for d in dense) if len(dense) else float("inf") for hit in hits]
            level["oracle_max_gap"] = max(gaps) if gaps else 0.0
            stray = stray_eigenvalues(op, barrier.E0, opts.zone_width, opts.zone_depth, opts.zone_disc)
            level["stray_eigenvalues"] = [[z.real, z.imag] for z in stray]
            logger.info("h=%g oracle gap %.2e, %d stray eigenvalues", h, level["oracle_max_gap"], len(stray))
        if opts.certify_box:
            level["box_certificate"] = certify_box(
                pot, op.grid, h, config.scaling.theta, points, op.scaling, op.discretization
            )
        lattice["levels"][h_label(h)] = level
        ctx.wall_times[h_label(h)] = time.perf_counter() - started
        logger.info("h=%g: %d resonances", h, len(hits))

    lattice["convergence"] = {alpha: convergence_rates(d) for alpha, d in distances.items() if len(d) > 1}
    ctx.write_csv("resonances.csv", rows)
    ctx.write_json("lattice.json", lattice)
