#!/usr/bin/env python3
"""
Run scenario experiments and write plot-ready result tables.

Reads a scenario document, simulates every grid point with bootstrap
parameter uncertainty, and writes the results plus one delta table per
scenario that names a baseline.
"""

import logging
from pathlib import Path
from typing import Optional

from epidemics.natural_history import load_viral_load_curves
from experiments.harness import ExperimentInputs, load_scenarios, run_scenarios
from experiments.results import ScenarioResult, deltas_frame, emit_results
from networks.friendship_ergm import load_ergm_coefficients, load_friendship
from population.items_loaders import load_survey
from population.survey_service import preprocess_survey
from settings import (
    DATA_DIR,
    ERGM_COEFFICIENTS_FNAME,
    LOG_FORMAT,
    LOG_LEVEL,
    THREADS,
    VIRAL_LOAD_CURVES_FNAME,
)
from synthesize import load_or_default_params, load_or_generate_roster

logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)
logger = logging.getLogger(__name__)

SCENARIOS_FNAME = "scenario_example.json"
RESULTS_FNAME = "results"


def run_experiment_stage(
    scenarios_path: Optional[Path] = None,
    roster_path: Optional[Path] = None,
    survey_path: Optional[Path] = None,
    params_path: Optional[Path] = None,
    coefficients_path: Optional[Path] = None,
    friendship_path: Optional[Path] = None,
    curves_path: Optional[Path] = None,
    out_path: Optional[Path] = None,
    fmt: str = "csv",
    threads: int = THREADS,
    seed: Optional[int] = None,
) -> list[ScenarioResult]:
    """
    Main entry point for scenario experiments.

    Without a survey the degree parameters are used as fitted and every
    bootstrap replicate shares them.

    Returns:
        One result per scenario, in document order.
    """
    logger.info("Starting scenario experiments...")
    specs = load_scenarios(Path(scenarios_path or DATA_DIR / SCENARIOS_FNAME), seed=seed)
    master_seed = seed if seed is not None else specs[0].seed

    roster = load_or_generate_roster(roster_path, master_seed)
    survey = preprocess_survey(load_survey(Path(survey_path))) if survey_path is not None else None
    inputs = ExperimentInputs(
        roster=roster,
        curves=load_viral_load_curves(Path(curves_path or DATA_DIR / VIRAL_LOAD_CURVES_FNAME)),
        survey=survey,
        degree_params=load_or_default_params(params_path),
        coefficients=load_ergm_coefficients(Path(coefficients_path or DATA_DIR / ERGM_COEFFICIENTS_FNAME)),
        friendship=load_friendship(Path(friendship_path), roster.n) if friendship_path is not None else None,
    )

    results, deltas = run_scenarios(specs, inputs, threads=threads)

    out_path = Path(out_path or DATA_DIR / f"{RESULTS_FNAME}.{fmt}")
    emit_results(results, fmt, out_path)
    for name, delta in deltas.items():
        delta_path = out_path.with_name(f"{out_path.stem}_delta_{name}.csv")
        deltas_frame(delta).to_csv(delta_path, index=False)
        logger.info(f"Saved deltas of scenario {name} to {delta_path}")

    failed = [result.name for result in results if result.failed]
    if failed:
        logger.warning(f"{len(failed)} scenarios failed: {', '.join(failed)}")
    logger.info("Experiments completed successfully!")
    return results


if __name__ == "__main__":
    run_experiment_stage()
