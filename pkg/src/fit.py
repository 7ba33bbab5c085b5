#!/usr/bin/env python3
"""
Fit the contact-degree models to the contact survey.

Writes the degree-parameter JSON used by every later stage. With a roster
and an observed friendship edge list it also fits the friendship ERGM.
"""

import logging
from pathlib import Path
from typing import Optional

from degrees.degree_model import (
    DEFAULT_LUNCH_CUTOFF,
    DegreeParameters,
    fit_degree_parameters,
    lunch_friend_association,
    save_degree_params,
)
from networks.friendship_ergm import fit_ergm, load_friendship, save_ergm_coefficients
from population.items_loaders import load_roster, load_survey
from population.survey_service import preprocess_survey
from settings import DATA_DIR, DEGREE_PARAMS_FNAME, ERGM_COEFFICIENTS_FNAME, LOG_FORMAT, LOG_LEVEL, SURVEY_FNAME

logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)
logger = logging.getLogger(__name__)


def run_fit(
    survey_path: Optional[Path] = None,
    out_path: Optional[Path] = None,
    cutoff: int = DEFAULT_LUNCH_CUTOFF,
    class_friend_fraction: float = 0.5,
    roster_path: Optional[Path] = None,
    friendship_path: Optional[Path] = None,
    ergm_out_path: Optional[Path] = None,
) -> DegreeParameters:
    """
    Main entry point for fitting model inputs.

    Returns:
        The fitted degree parameters.
    """
    survey_path = Path(survey_path or DATA_DIR / SURVEY_FNAME)
    out_path = Path(out_path or DATA_DIR / DEGREE_PARAMS_FNAME)
    logger.info("Starting degree model fit...")

    survey = preprocess_survey(load_survey(survey_path))
    params = fit_degree_parameters(survey, cutoff=cutoff, class_friend_fraction=class_friend_fraction)
    brk = params.break_fit
    logger.info(
        f"Break contacts: mean {brk.mean_at_zero_friends:.3f} at zero friends, ratio {brk.ratio:.4f} "
        f"(95% CI {brk.ci_ratio[0]:.4f}-{brk.ci_ratio[1]:.4f}) per friend, dispersion {brk.dispersion:.3f}"
    )
    logger.info(
        f"Lunch contacts: mean {params.lunch_fit.mean:.3f}, dispersion {params.lunch_fit.dispersion:.3f}, "
        f"{params.lunch_fit.n_censored} reports censored at {params.lunch_fit.cutoff}"
    )
    logger.info(f"Share of contacts to friends X = {params.pct_to_friends:.3f}")

    lunch_check = lunch_friend_association(survey)
    logger.info(
        f"Lunch contacts vs. friend count: ratio {lunch_check.ratio:.4f} "
        f"(95% CI {lunch_check.ci_ratio[0]:.4f}-{lunch_check.ci_ratio[1]:.4f})"
    )
    shares = ", ".join(f"{mix} {share:.2f}" for mix, share in survey.neighbor_mix_shares().items())
    logger.info(f"Class neighbours: {shares}")

    save_degree_params(params, out_path)

    if roster_path is not None and friendship_path is not None:
        roster = load_roster(Path(roster_path))
        friendship = load_friendship(Path(friendship_path), roster.n)
        coefficients = fit_ergm(friendship, roster)
        save_ergm_coefficients(coefficients, Path(ergm_out_path or DATA_DIR / ERGM_COEFFICIENTS_FNAME))
        logger.info(f"Fitted friendship ERGM: edges {coefficients.edges:.3f}")

    logger.info("Fit completed successfully!")
    return params


if __name__ == "__main__":
    run_fit()
