import logging
import math
import time

import numpy as np

from barriertop.commands.deps import (
    RunContext,
    check_strip,
    get_barrier,
    get_grid,
    get_operator,
    get_potential,
    h_label,
    to_bump,
)
from barriertop.core.errors import ConfigError, NoExponentialRegime
from barriertop.core.router import CommandRouter
from barriertop.models.dynamics import PropagatorRun
from barriertop.models.operator import BumpSpec, Discretization, ScalingType
from barriertop.schemas.config import RunConfig
from barriertop.schemas.records import PropagationSummary
from barriertop.services.dynamics_service import (
    compare_expansion,
    comparison_records,
    default_test_states,
    first_excluded_rate,
)
from barriertop.services.lattice_service import pseudo_resonances
from barriertop.services.operator_service import (
    assemble_selfadjoint,
    find_resonances,
    riesz_projector,
    scaled_decomposition,
    spectral_decomposition,
)

logger = logging.getLogger(__name__)

router = CommandRouter(
    name="propagate",
    help="Cut-off propagator against its truncated resonance expansion, with the fitted decay rate",
    artifacts=["errors_<h>.csv", "propagation.json"],
)


def _default_chi(config: RunConfig) -> BumpSpec:
    R0 = config.scaling.R0
    return BumpSpec(center=0.0, plateau=0.5 * R0, support=0.9 * R0)


@router.command
def run(config: RunConfig, ctx: RunContext) -> None:
    pot = get_potential(config)
    barrier = get_barrier(pot)
    if config.strip.mu is None:
        raise ConfigError("propagate needs strip.mu")
    check_strip(config, barrier)
    # chi and the evolved states must sit where the contour is still real
    if config.scaling.type != ScalingType.exterior.value:
        raise ConfigError("propagate needs exterior scaling", {"scaling": config.scaling.type})
    opts = config.propagate
    mu = config.strip.mu
    chi_spec = to_bump(opts.chi) if opts.chi is not None else _default_chi(config)
    if abs(chi_spec.center) + chi_spec.support > config.scaling.R0:
        raise ConfigError("chi must be supported inside the undistorted region", {"R0": config.scaling.R0})
    epsilon = config.strip.epsilon * barrier.E0
    psi_spec = BumpSpec(center=barrier.E0, plateau=opts.psi_plateau * epsilon, support=epsilon)
    excluded = first_excluded_rate(barrier.lambdas, mu)
    grid = get_grid(config)

    summaries = []
    failure = None
    for h in config.h_list:
        started = time.perf_counter()
        log_h = abs(math.log(h))
        decomp = spectral_decomposition(
            assemble_selfadjoint(pot, grid, h, Discretization(config.grid.discretization)), h, grid
        )
        op = get_operator(config, pot, h)
        scaled = scaled_decomposition(op)
        # lattice radius must reach mu for every included term
        points = pseudo_resonances(barrier, h, max(config.strip.C, mu))
        hits = find_resonances(op, points)
        projectors = [
            riesz_projector(op, hit.z, config.contour.radius_factor * h, config.contour.n_quad) for hit in hits
        ]
        run_spec = PropagatorRun(
            h=h,
            times=np.linspace(opts.t_start, opts.t_stop, opts.samples) * log_h,
            chi_spec=chi_spec,
            psi_spec=psi_spec,
            test_states=default_test_states(grid, h, opts.test_states),
            mu=mu,
        )
        try:
            comparison = compare_expansion(run_spec, decomp, scaled, hits, projectors, barrier.lambdas)
        except NoExponentialRegime as e:
            comparison = e.comparison
            failure = failure or e
        ctx.wall_times[h_label(h)] = time.perf_counter() - started
        ctx.write_csv(f"errors_{h_label(h)}.csv", comparison_records(comparison))
        summaries.append(
            PropagationSummary(
                h=h,
                mu=mu,
                included=[[z.real, z.imag] for z in comparison.included],
                fitted_mu=comparison.fitted_mu,
                fitted_K=comparison.fitted_K,
                onset_time=comparison.onset_time,
                fit_start=comparison.fit_start,
                first_excluded_rate=excluded,
                no_exponential_regime=comparison.fitted_mu is None,
            ).model_dump()
        )
        logger.info(
            "h=%g: %d terms, fitted rate %s against first excluded %.3f",
            h, len(comparison.included), comparison.fitted_mu, excluded,
        )

    ctx.write_json(
        "propagation.json",
        {"chi": chi_spec.__dict__, "psi": psi_spec.__dict__, "levels": summaries},
    )
    if failure is not None:
        raise failure
