"""Influenza natural history and per-contact infectiousness.

Infection on day ``t`` is followed by an incubation of 1-3 days. The first
day after incubation is the symptom onset day (for symptomatic cases) and
the first of exactly six infectious days. Infectiousness follows one of six
viral-load curves and is doubled for symptomatic cases.
"""

import logging
from enum import IntEnum
from pathlib import Path
from typing import Optional

import attr
import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

INFECTIOUS_DAYS = 6
N_CURVES = 6
# Sentinel day for "never withdraws"
NEVER = 10**9


class Status(IntEnum):
    susceptible = 0
    latent = 1
    infectious = 2
    immune = 3


def _pmf(value) -> dict[int, float]:
    return {int(k): float(v) for k, v in dict(value).items()}


def _sums_to_one(instance, attribute, value):
    if any(p < 0 for p in value.values()) or not np.isclose(sum(value.values()), 1.0):
        raise ValueError(f"{attribute.name} must be a probability distribution, got {value}")


def _sub_probability(instance, attribute, value):
    if any(p < 0 for p in value.values()) or sum(value.values()) > 1.0 + 1e-12:
        raise ValueError(f"{attribute.name} must sum to at most 1, got {value}")


def _unit_interval(instance, attribute, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{attribute.name} must be within [0, 1], got {value}")


@attr.s(frozen=True, auto_attribs=True)
class NaturalHistoryParams:
    incubation_pmf: dict[int, float] = attr.ib(
        factory=lambda: {1: 0.30, 2: 0.50, 3: 0.20}, converter=_pmf, validator=_sums_to_one
    )
    infectious_days: int = attr.ib(default=INFECTIOUS_DAYS, converter=int)
    symptomatic_prob: float = attr.ib(default=0.67, converter=float, validator=_unit_interval)
    symptomatic_multiplier: float = attr.ib(default=2.0, converter=float)
    # Symptom day of withdrawal; the remaining mass never withdraws
    withdrawal_pmf: dict[int, float] = attr.ib(
        factory=lambda: {1: 0.203, 2: 0.397, 3: 0.15}, converter=_pmf, validator=_sub_probability
    )
    mean_unit_transmission: float = attr.ib(default=0.004, converter=float, validator=_unit_interval)

    @infectious_days.validator
    def _six_days(self, attribute, value):
        if value != INFECTIOUS_DAYS:
            raise ValueError(f"infectious_days is fixed at {INFECTIOUS_DAYS}, got {value}")

    @property
    def never_withdraw_prob(self) -> float:
        return 1.0 - sum(self.withdrawal_pmf.values())

    @property
    def mean_multiplier(self) -> float:
        return self.symptomatic_prob * self.symptomatic_multiplier + (1.0 - self.symptomatic_prob)


def _loads(value) -> tuple[float, ...]:
    return tuple(float(v) for v in value)


@attr.s(frozen=True, auto_attribs=True)
class ViralLoadCurve:
    loads: tuple[float, ...] = attr.ib(converter=_loads)

    @loads.validator
    def _check_loads(self, attribute, value):
        if len(value) != INFECTIOUS_DAYS:
            raise ValueError(f"a viral-load curve has {INFECTIOUS_DAYS} daily values, got {len(value)}")
        if any(v < 0 for v in value):
            raise ValueError("viral loads must be nonnegative")
        if not any(value):
            raise ValueError("a viral-load curve cannot be all zero")


@attr.s(frozen=True, auto_attribs=True)
class PersonCourse:
    infection_day: int = attr.ib(converter=int)
    incubation: int = attr.ib(converter=int)
    symptomatic: bool = attr.ib(converter=bool)
    curve_index: int = attr.ib(converter=int)
    withdrawal_symptom_day: Optional[int] = attr.ib(default=None)

    @withdrawal_symptom_day.validator
    def _withdrawal_needs_symptoms(self, attribute, value):
        if value is not None and not self.symptomatic:
            raise ValueError("only symptomatic students withdraw")

    @property
    def onset_day(self) -> int:
        return self.infection_day + self.incubation

    @property
    def recovery_day(self) -> int:
        return self.onset_day + INFECTIOUS_DAYS

    @property
    def withdrawal_day(self) -> Optional[int]:
        if self.withdrawal_symptom_day is None:
            return None
        return self.onset_day + self.withdrawal_symptom_day - 1


def curves_matrix(curves: list[ViralLoadCurve]) -> np.ndarray:
    return np.array([c.loads for c in curves], dtype=float)


def load_viral_load_curves(path: Path) -> list[ViralLoadCurve]:
    """Whitespace-separated text, one curve per row, one column per infectious day."""
    df = pd.read_csv(path, sep=r"\s+", header=None, comment="#", dtype=float)
    if df.shape != (N_CURVES, INFECTIOUS_DAYS):
        raise ValueError(f"{path}: expected {N_CURVES} rows of {INFECTIOUS_DAYS} loads, got {df.shape}")
    curves = [ViralLoadCurve(loads=row) for row in df.itertuples(index=False)]
    logger.info(f"Loaded {len(curves)} viral-load curves from {path}")
    return curves


def sample_courses(
    params: NaturalHistoryParams,
    n_curves: int,
    infection_day: int,
    size: int,
    rng: np.random.Generator,
    symptomatic_scale: np.ndarray | float = 1.0,
) -> dict[str, np.ndarray]:
    """Vectorised `sample_course`; ``symptomatic_scale`` thins the symptomatic probability per person.

    Returns arrays ``incubation``, ``symptomatic``, ``curve_index`` and
    ``withdrawal_symptom_day`` (`NEVER` for students who stay in school).
    """
    incubation_days = np.array(list(params.incubation_pmf.keys()))
    incubation = rng.choice(incubation_days, size=size, p=list(params.incubation_pmf.values()))
    symptomatic = rng.random(size) < params.symptomatic_prob * np.asarray(symptomatic_scale)
    curve_index = rng.integers(0, n_curves, size=size)

    withdrawal_days = np.array(list(params.withdrawal_pmf.keys()) + [NEVER])
    withdrawal_p = list(params.withdrawal_pmf.values()) + [params.never_withdraw_prob]
    withdrawal = rng.choice(withdrawal_days, size=size, p=np.clip(withdrawal_p, 0.0, None))
    withdrawal = np.where(symptomatic, withdrawal, NEVER)
    return {
        "incubation": incubation.astype(np.int64),
        "symptomatic": symptomatic,
        "curve_index": curve_index.astype(np.int64),
        "withdrawal_symptom_day": withdrawal.astype(np.int64),
        "infection_day": np.full(size, infection_day, dtype=np.int64),
    }


def sample_course(
    params: NaturalHistoryParams, curves: list[ViralLoadCurve], day: int, rng: np.random.Generator
) -> PersonCourse:
    drawn = sample_courses(params, len(curves), day, 1, rng)
    withdrawal = int(drawn["withdrawal_symptom_day"][0])
    return PersonCourse(
        infection_day=day,
        incubation=int(drawn["incubation"][0]),
        symptomatic=bool(drawn["symptomatic"][0]),
        curve_index=int(drawn["curve_index"][0]),
        withdrawal_symptom_day=None if withdrawal == NEVER else withdrawal,
    )


def calibrate_scale(params: NaturalHistoryParams, curves: list[ViralLoadCurve]) -> float:
    """Scale that makes the mean per-unit transmission probability equal to p-bar."""
    mean_load = float(curves_matrix(curves).mean())
    if mean_load <= 0:
        raise ValueError("viral-load curves have zero mean load")
    return params.mean_unit_transmission / (mean_load * params.mean_multiplier)


def infectiousness(
    course: PersonCourse,
    curves: list[ViralLoadCurve],
    day: int,
    scale: float,
    treated: bool = False,
    params: Optional[NaturalHistoryParams] = None,
    ave_i: float = 0.15,
) -> float:
    """Per-unit transmission probability of ``course`` on ``day``; 0 outside the infectious window."""
    params = params or NaturalHistoryParams()
    offset = day - course.onset_day
    if not 0 <= offset < INFECTIOUS_DAYS:
        return 0.0
    p = scale * curves[course.curve_index].loads[offset]
    if course.symptomatic:
        p *= params.symptomatic_multiplier
    if treated:
        p *= 1.0 - ave_i
    return float(min(max(p, 0.0), 1.0))
