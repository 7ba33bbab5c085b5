"""Synthetic rosters and contact surveys.

The restricted school roster and the raw contact survey are not
redistributable, so tests and examples run on stand-ins drawn here.
Survey records follow the parametric degree model of `degrees.degree_model`.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from degrees.degree_model import draw_negative_binomial
from population.items import (
    GRADES,
    NeighborMix,
    Race,
    Roster,
    School,
    Sex,
    Student,
    SurveyRecord,
    SurveySample,
)

logger = logging.getLogger(__name__)

DEFAULT_GRADE_WEIGHTS = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
DEFAULT_SEX_SPLIT = 0.5
# white, black, hispanic, asian, mixed, missing
DEFAULT_RACE_WEIGHTS = (0.55, 0.15, 0.15, 0.05, 0.09, 0.01)

# Friend counts in the synthetic survey: geometric with mean 6
SYNTHETIC_FRIENDS_MEAN = 6.0
SYNTHETIC_FRIENDS_DISPERSION = 1.0
# Beta concentration for the reported share of contacts to friends
PCT_TO_FRIENDS_CONCENTRATION = 10.0
# Share of respondents sitting next to a mix of friends and non-friends
NEIGHBOR_MIX_WEIGHTS = {
    NeighborMix.mix: 0.74,
    NeighborMix.mostly_friends: 0.13,
    NeighborMix.mostly_nonfriends: 0.13,
}


def _normalized(weights: Sequence[float], expected_len: int, name: str) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (expected_len,):
        raise ValueError(f"{name} must have {expected_len} entries, got {weights.shape[0]}")
    if np.any(weights < 0) or not np.isfinite(weights).all():
        raise ValueError(f"{name} must be nonnegative")
    total = weights.sum()
    if total <= 0:
        raise ValueError(f"{name} must not be all zero")
    return weights / total


def generate_synthetic_roster(
    n: int,
    grade_weights: Sequence[float] = DEFAULT_GRADE_WEIGHTS,
    sex_split: float = DEFAULT_SEX_SPLIT,
    race_weights: Sequence[float] = DEFAULT_RACE_WEIGHTS,
    sister_school_share: float = 0.0,
    seed: Optional[int | np.random.Generator] = None,
) -> Roster:
    """Draw grade, sex, race and school independently per student.

    `sex_split` is the probability that a student is male; `sister_school_share`
    the probability that a student attends the sister school.
    """
    if n < 2:
        raise ValueError(f"a roster needs at least 2 students, got {n}")
    if not 0.0 <= sex_split <= 1.0:
        raise ValueError(f"sex_split must be within [0, 1], got {sex_split}")
    if not 0.0 <= sister_school_share <= 1.0:
        raise ValueError(f"sister_school_share must be within [0, 1], got {sister_school_share}")
    grade_p = _normalized(grade_weights, len(GRADES), "grade_weights")
    race_p = _normalized(race_weights, len(Race), "race_weights")

    rng = np.random.default_rng(seed)
    grades = rng.choice(np.array(GRADES), size=n, p=grade_p)
    male = rng.random(n) < sex_split
    races = rng.choice(len(Race), size=n, p=race_p)
    sister = rng.random(n) < sister_school_share
    race_levels = list(Race)

    students = [
        Student(
            id=i,
            grade=int(grades[i]),
            sex=Sex.male if male[i] else Sex.female,
            race=race_levels[races[i]],
            school=School.sister if sister[i] else School.main,
        )
        for i in range(n)
    ]
    return Roster(students=students)


def generate_synthetic_survey(
    break_mean0: float = 4.5,
    break_ratio: float = 1.03,
    break_dispersion: float = 2.0,
    lunch_mean: float = 10.8,
    lunch_dispersion: float = 1.5,
    pct_to_friends_mean: float = 0.68,
    n: int = 362,
    seed: Optional[int | np.random.Generator] = None,
) -> SurveySample:
    """Draw survey records from the parametric contact-degree model.

    Break contacts are negative binomial with mean
    ``break_mean0 * break_ratio ** n_close_friends``; lunch contacts are
    negative binomial without a friend-count predictor.
    """
    for name, value in (
        ("break_mean0", break_mean0),
        ("break_ratio", break_ratio),
        ("break_dispersion", break_dispersion),
        ("lunch_mean", lunch_mean),
        ("lunch_dispersion", lunch_dispersion),
    ):
        if not value > 0:
            raise ValueError(f"{name} must be > 0, got {value}")
    if not 0.0 <= pct_to_friends_mean <= 1.0:
        raise ValueError(f"pct_to_friends_mean must be within [0, 1], got {pct_to_friends_mean}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")

    rng = np.random.default_rng(seed)
    if n == 0:
        logger.warning("Generated an empty survey; mean share of contacts to friends is undefined")
        return SurveySample(records=[])

    friends = draw_negative_binomial(
        np.full(n, SYNTHETIC_FRIENDS_MEAN), SYNTHETIC_FRIENDS_DISPERSION, rng
    )
    break_contacts = draw_negative_binomial(
        break_mean0 * np.power(break_ratio, friends), break_dispersion, rng
    )
    lunch_contacts = draw_negative_binomial(np.full(n, lunch_mean), lunch_dispersion, rng)

    if 0.0 < pct_to_friends_mean < 1.0:
        a = PCT_TO_FRIENDS_CONCENTRATION * pct_to_friends_mean
        b = PCT_TO_FRIENDS_CONCENTRATION * (1.0 - pct_to_friends_mean)
        pct = rng.beta(a, b, size=n)
    else:
        pct = np.full(n, pct_to_friends_mean)

    mix_levels = list(NEIGHBOR_MIX_WEIGHTS)
    mix = rng.choice(len(mix_levels), size=n, p=list(NEIGHBOR_MIX_WEIGHTS.values()))

    records = [
        SurveyRecord(
            break_contacts=int(break_contacts[i]),
            lunch_contacts=int(lunch_contacts[i]),
            n_close_friends=int(friends[i]),
            pct_to_friends=float(pct[i]),
            neighbor_mix=mix_levels[mix[i]],
        )
        for i in range(n)
    ]
    return SurveySample(records=records)
