import logging

import attr
import numpy as np

from population.items_loaders import SurveyError
from population.items import SurveySample

logger = logging.getLogger(__name__)

# Reports above these values are treated as outliers
BREAK_CONTACTS_CAP = 20
CLOSE_FRIENDS_LIMIT = 40


def preprocess_survey(raw: SurveySample) -> SurveySample:
    """Recode break contacts above 20 to 20 and drop records with more than 40 close friends."""
    capped = 0
    records = []
    for record in raw.records:
        if record.n_close_friends > CLOSE_FRIENDS_LIMIT:
            continue
        if record.break_contacts > BREAK_CONTACTS_CAP:
            record = attr.evolve(record, break_contacts=BREAK_CONTACTS_CAP)
            capped += 1
        records.append(record)

    dropped = raw.n - len(records)
    if not records:
        raise SurveyError("empty survey after preprocessing")
    if capped or dropped:
        logger.info(
            f"Survey preprocessing: recoded {capped} break reports to {BREAK_CONTACTS_CAP}, "
            f"removed {dropped} records with more than {CLOSE_FRIENDS_LIMIT} close friends"
        )
    return SurveySample(records=records)


def bootstrap_resample(survey: SurveySample, rng: np.random.Generator) -> SurveySample:
    """Resample records with replacement; the share of contacts to friends is recomputed on the resample."""
    if survey.n == 0:
        raise SurveyError("cannot resample an empty survey")
    idx = rng.integers(0, survey.n, size=survey.n)
    return SurveySample(records=[survey.records[i] for i in idx])
