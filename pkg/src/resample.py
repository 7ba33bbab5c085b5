#!/usr/bin/env python3
"""
Bootstrap diagnostics for the contact-degree models.

Refits the degree models on B resamples of the survey and writes one row
per resample, so the spread of each parameter can be inspected before an
experiment relies on it.
"""

import logging
from pathlib import Path
from typing import Optional

import pandas as pd

from degrees.degree_model import DEFAULT_LUNCH_CUTOFF, ConvergenceError, fit_degree_parameters
from population.items_loaders import load_survey
from population.survey_service import bootstrap_resample, preprocess_survey
from random_streams import spawn_rng
from settings import DATA_DIR, LOG_FORMAT, LOG_LEVEL, SEED, SURVEY_FNAME

logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)
logger = logging.getLogger(__name__)

BOOTSTRAP_FNAME = "bootstrap_params.csv"
BOOTSTRAP_COLUMNS = [
    "replicate",
    "break_mean0",
    "break_ratio",
    "break_dispersion",
    "lunch_mean",
    "lunch_dispersion",
    "pct_to_friends",
]


def run_bootstrap(
    survey_path: Optional[Path] = None,
    replicates: int = 20,
    cutoff: int = DEFAULT_LUNCH_CUTOFF,
    out_path: Optional[Path] = None,
    seed: int = SEED,
) -> pd.DataFrame:
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    survey_path = Path(survey_path or DATA_DIR / SURVEY_FNAME)
    logger.info(f"Starting bootstrap diagnostics with {replicates} resamples of {survey_path}...")
    survey = preprocess_survey(load_survey(survey_path))

    rows = []
    for b in range(replicates):
        sample = bootstrap_resample(survey, spawn_rng(seed, b))
        try:
            params = fit_degree_parameters(sample, cutoff=cutoff)
        except ConvergenceError as err:
            logger.warning(f"Resample {b}: fit did not converge ({err}); skipped")
            continue
        rows.append(
            {
                "replicate": b,
                "break_mean0": params.break_fit.mean_at_zero_friends,
                "break_ratio": params.break_fit.ratio,
                "break_dispersion": params.break_fit.dispersion,
                "lunch_mean": params.lunch_fit.mean,
                "lunch_dispersion": params.lunch_fit.dispersion,
                "pct_to_friends": params.pct_to_friends,
            }
        )
    df = pd.DataFrame(rows, columns=BOOTSTRAP_COLUMNS)

    if not df.empty:
        quantiles = df.drop(columns="replicate").quantile([0.025, 0.5, 0.975])
        for column in quantiles.columns:
            lo, mid, hi = quantiles[column].to_numpy()
            logger.info(f"{column}: median {mid:.4f}, 95% interval {lo:.4f}-{hi:.4f}")
    skipped = replicates - len(df)
    if skipped:
        logger.warning(f"{skipped} of {replicates} resamples were skipped; fraction {skipped / replicates:.2f}")

    out_path = Path(out_path or DATA_DIR / BOOTSTRAP_FNAME)
    df.to_csv(out_path, index=False)
    logger.info(f"Saved {len(df)} bootstrap fits to {out_path}")
    return df


if __name__ == "__main__":
    run_bootstrap()
