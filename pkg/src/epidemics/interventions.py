"""School interventions triggered by symptom onsets.

Both act one day after onset. Targeted antiviral prophylaxis (TAP) treats
the new case for five days and gives each reported contact ten days of
prophylaxis. Grade closure sends the case's whole grade home.
"""

import logging
from enum import Enum
from typing import TYPE_CHECKING, Optional

import attr
import numpy as np

from epidemics.natural_history import NEVER, Status
from networks.contact_network import ContactNetwork

if TYPE_CHECKING:
    from epidemics.outbreak import EpidemicState

logger = logging.getLogger(__name__)


class InterventionKind(str, Enum):
    none = "none"
    tap = "tap"
    grade_closure = "grade_closure"


def _efficacy(instance, attribute, value):
    if not 0.0 <= value < 1.0:
        raise ValueError(f"{attribute.name} must be within [0, 1), got {value}")


def _reporting(instance, attribute, value):
    if not 0.0 < value <= 1.0:
        raise ValueError(f"{attribute.name} must be within (0, 1], got {value}")


def _positive_days(instance, attribute, value):
    if value is not None and value < 1:
        raise ValueError(f"{attribute.name} must be >= 1, got {value}")


@attr.s(frozen=True, auto_attribs=True)
class InterventionConfig:
    kind: InterventionKind = attr.ib(default=InterventionKind.none, converter=InterventionKind)
    ave_s: float = attr.ib(default=0.63, converter=float, validator=_efficacy)
    ave_i: float = attr.ib(default=0.15, converter=float, validator=_efficacy)
    ave_p: float = attr.ib(default=0.56, converter=float, validator=_efficacy)
    treatment_days: int = attr.ib(default=5, converter=int, validator=_positive_days)
    prophylaxis_days: int = attr.ib(default=10, converter=int, validator=_positive_days)
    reporting_fraction: float = attr.ib(default=1.0, converter=float, validator=_reporting)
    # None keeps closed grades closed for the rest of the season
    closure_days: Optional[int] = attr.ib(default=None, validator=_positive_days)


def _reduce_pathogenicity(state: "EpidemicState", students: np.ndarray, config: InterventionConfig, rng) -> None:
    """Latent students starting antivirals keep their symptoms with probability 1 - AVE_P, once."""
    latent = students[(state.status[students] == Status.latent) & ~state.pathogenicity_reduced[students]]
    if latent.size == 0:
        return
    lose = state.symptomatic[latent] & (rng.random(latent.size) >= 1.0 - config.ave_p)
    state.symptomatic[latent[lose]] = False
    state.withdrawal_day[latent[lose]] = NEVER
    state.pathogenicity_reduced[latent] = True


def apply_tap(
    state: "EpidemicState",
    onsets: np.ndarray,
    network_day: ContactNetwork,
    config: InterventionConfig,
    rng: np.random.Generator,
) -> "EpidemicState":
    """Treat ``onsets`` and prophylax their partners on the onset day's network.

    Each partner is reported independently with the configured reporting
    fraction. Antiviral courses restart rather than accumulate.
    """
    if config.kind is not InterventionKind.tap:
        raise ValueError(f"apply_tap needs a tap intervention, got {config.kind.value}")
    onsets = np.asarray(onsets, dtype=np.int64)
    if onsets.size == 0:
        return state

    state.treatment_days[onsets] = config.treatment_days

    matrix = network_day.matrix
    reported = []
    for i in onsets:
        partners = matrix.indices[matrix.indptr[i] : matrix.indptr[i + 1]]
        if config.reporting_fraction < 1.0:
            partners = partners[rng.random(partners.size) < config.reporting_fraction]
        reported.append(partners)
    contacts = np.unique(np.concatenate(reported)) if reported else np.empty(0, dtype=np.int64)
    state.prophylaxis_days[contacts] = config.prophylaxis_days

    _reduce_pathogenicity(state, np.union1d(onsets, contacts), config, rng)
    logger.debug(f"Day {state.day}: TAP treated {onsets.size} cases, prophylaxed {contacts.size} contacts")
    return state


def apply_grade_closure(
    state: "EpidemicState", onsets: np.ndarray, config: Optional[InterventionConfig] = None
) -> "EpidemicState":
    """Close the grades of ``onsets`` from today; reopen after ``closure_days`` if set."""
    config = config or InterventionConfig(kind=InterventionKind.grade_closure)
    if config.closure_days is not None:
        for grade, closed_on in list(state.closed_grades.items()):
            if state.day >= closed_on + config.closure_days:
                del state.closed_grades[grade]
                logger.debug(f"Day {state.day}: grade {grade} reopened")

    for grade in np.unique(state.grades[np.asarray(onsets, dtype=np.int64)]):
        if int(grade) not in state.closed_grades:
            state.closed_grades[int(grade)] = state.day
            logger.debug(f"Day {state.day}: grade {grade} closed")
    return state
