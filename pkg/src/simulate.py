#!/usr/bin/env python3
"""
Simulate a single influenza outbreak and export its daily trajectory.
"""

import logging
from pathlib import Path
from typing import Optional

from epidemics.interventions import InterventionConfig, InterventionKind
from epidemics.natural_history import NaturalHistoryParams, load_viral_load_curves
from epidemics.outbreak import OutcomeSummary, run_outbreak, save_trajectory
from networks.season_plan import Variant, make_season_plan
from random_streams import spawn_rng
from settings import DATA_DIR, LOG_FORMAT, LOG_LEVEL, SEED, VIRAL_LOAD_CURVES_FNAME
from synthesize import load_or_default_params, load_or_generate_roster, obtain_friendship

logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)
logger = logging.getLogger(__name__)

TRAJECTORY_FNAME = "trajectory.csv"

_PLAN_KEY = 2
_OUTBREAK_KEY = 3


def run_simulate(
    roster_path: Optional[Path] = None,
    friendship_path: Optional[Path] = None,
    coefficients_path: Optional[Path] = None,
    params_path: Optional[Path] = None,
    curves_path: Optional[Path] = None,
    variant: Variant = Variant.static,
    intervention: InterventionConfig = InterventionConfig(),
    p_bar: float = 0.004,
    season_length: int = 365,
    n_index_cases: int = 1,
    out_path: Optional[Path] = None,
    seed: int = SEED,
) -> OutcomeSummary:
    logger.info(
        f"Starting {Variant(variant).value} outbreak at p_bar {p_bar} "
        f"with intervention {InterventionKind(intervention.kind).value}..."
    )
    roster = load_or_generate_roster(roster_path, seed)
    friendship = obtain_friendship(roster, seed, friendship_path, coefficients_path)
    curves = load_viral_load_curves(Path(curves_path or DATA_DIR / VIRAL_LOAD_CURVES_FNAME))
    plan = make_season_plan(
        roster,
        friendship,
        variant,
        spawn_rng(seed, _PLAN_KEY),
        params=load_or_default_params(params_path),
        season_length=season_length,
    )

    trajectory, summary = run_outbreak(
        plan,
        NaturalHistoryParams(mean_unit_transmission=p_bar),
        intervention,
        spawn_rng(seed, _OUTBREAK_KEY),
        curves,
        n_index_cases=n_index_cases,
    )
    logger.info(
        f"Outbreak over after {trajectory.days} days: final size {summary.final_size}, "
        f"peak on day {summary.peak_date}, epidemic {summary.epidemic}"
    )
    save_trajectory(trajectory, Path(out_path or DATA_DIR / TRAJECTORY_FNAME))
    return summary


if __name__ == "__main__":
    run_simulate()
