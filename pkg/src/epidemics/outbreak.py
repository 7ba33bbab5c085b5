"""Outbreak simulation over a season plan.

One index case is infected on day 0; school days are numbered from 1.
Each day runs, in order: status transitions, withdrawal, interventions
triggered by yesterday's symptom onsets, transmission on today's network,
antiviral countdown, and the daily record.
"""

import logging
from pathlib import Path
from typing import Optional

import attr
import numpy as np
import pandas as pd

from epidemics.interventions import (
    InterventionConfig,
    InterventionKind,
    apply_grade_closure,
    apply_tap,
)
from epidemics.natural_history import (
    INFECTIOUS_DAYS,
    NEVER,
    NaturalHistoryParams,
    Status,
    ViralLoadCurve,
    calibrate_scale,
    curves_matrix,
    sample_courses,
)
from networks.contact_network import ContactNetwork
from networks.season_plan import SeasonPlan

logger = logging.getLogger(__name__)

EPIDEMIC_THRESHOLD = 200
TRAJECTORY_COLUMNS = ["day", "susceptible", "latent", "infectious", "immune", "withdrawn", "new_infections"]


@attr.s(auto_attribs=True)
class EpidemicState:
    """Mutable per-student arrays for one outbreak."""

    grades: np.ndarray
    params: NaturalHistoryParams
    loads: np.ndarray
    scale: float
    status: np.ndarray = None
    infection_day: np.ndarray = None
    onset_day: np.ndarray = None
    curve_index: np.ndarray = None
    symptomatic: np.ndarray = None
    withdrawal_day: np.ndarray = None
    pathogenicity_reduced: np.ndarray = None
    treatment_days: np.ndarray = None
    prophylaxis_days: np.ndarray = None
    closed_grades: dict[int, int] = attr.Factory(dict)
    day: int = 0
    cumulative: int = 0
    daily_infectious: list[int] = attr.Factory(list)
    history: list[tuple[int, ...]] = attr.Factory(list)

    def __attrs_post_init__(self):
        n = self.grades.shape[0]
        self.status = np.full(n, Status.susceptible, dtype=np.int8)
        self.infection_day = np.full(n, -1, dtype=np.int64)
        self.onset_day = np.full(n, NEVER, dtype=np.int64)
        self.curve_index = np.zeros(n, dtype=np.int64)
        self.symptomatic = np.zeros(n, dtype=bool)
        self.withdrawal_day = np.full(n, NEVER, dtype=np.int64)
        self.pathogenicity_reduced = np.zeros(n, dtype=bool)
        self.treatment_days = np.zeros(n, dtype=np.int64)
        self.prophylaxis_days = np.zeros(n, dtype=np.int64)

    @property
    def n(self) -> int:
        return int(self.grades.shape[0])

    @property
    def active(self) -> bool:
        return bool(np.any((self.status == Status.latent) | (self.status == Status.infectious)))

    def counts(self) -> dict[str, int]:
        return {s.name: int((self.status == s).sum()) for s in Status}

    def on_antivirals(self) -> np.ndarray:
        return (self.treatment_days > 0) | (self.prophylaxis_days > 0)

    def withdrawn(self) -> np.ndarray:
        return (self.status == Status.infectious) & (self.withdrawal_day <= self.day)

    def in_closed_grade(self) -> np.ndarray:
        if not self.closed_grades:
            return np.zeros(self.n, dtype=bool)
        return np.isin(self.grades, list(self.closed_grades))

    def absent(self) -> np.ndarray:
        return self.withdrawn() | self.in_closed_grade()

    def infect(self, students: np.ndarray, rng: np.random.Generator, ave_p: float = 0.0) -> None:
        """Start latent courses for ``students`` infected today."""
        students = np.asarray(students, dtype=np.int64)
        if students.size == 0:
            return
        treated = self.on_antivirals()[students]
        courses = sample_courses(
            self.params,
            self.loads.shape[0],
            self.day,
            students.size,
            rng,
            symptomatic_scale=np.where(treated, 1.0 - ave_p, 1.0),
        )
        self.status[students] = Status.latent
        self.infection_day[students] = self.day
        self.onset_day[students] = self.day + courses["incubation"]
        self.curve_index[students] = courses["curve_index"]
        self.symptomatic[students] = courses["symptomatic"]
        withdrawal = courses["withdrawal_symptom_day"]
        self.withdrawal_day[students] = np.where(
            withdrawal == NEVER, NEVER, self.onset_day[students] + withdrawal - 1
        )
        self.pathogenicity_reduced[students] = treated
        self.cumulative += int(students.size)

    def unit_probabilities(self, ave_i: float = 0.0) -> np.ndarray:
        """Per-unit transmission probability of every student today (0 unless infectious)."""
        p = np.zeros(self.n)
        infectious = np.flatnonzero(self.status == Status.infectious)
        if infectious.size == 0:
            return p
        offset = np.clip(self.day - self.onset_day[infectious], 0, INFECTIOUS_DAYS - 1)
        value = self.scale * self.loads[self.curve_index[infectious], offset]
        value = value * np.where(self.symptomatic[infectious], self.params.symptomatic_multiplier, 1.0)
        value = value * np.where(self.on_antivirals()[infectious], 1.0 - ave_i, 1.0)
        p[infectious] = np.clip(value, 0.0, 1.0)
        return p


def new_state(
    roster_grades: np.ndarray,
    params: NaturalHistoryParams,
    curves: list[ViralLoadCurve],
) -> EpidemicState:
    return EpidemicState(
        grades=np.asarray(roster_grades, dtype=np.int64),
        params=params,
        loads=curves_matrix(curves),
        scale=calibrate_scale(params, curves),
    )


def infection_probabilities(
    state: EpidemicState, network: ContactNetwork, intervention: Optional[InterventionConfig] = None
) -> np.ndarray:
    """Probability that each student is infected today: 1 - prod_i (1 - p_i)^Y_ij over present infectious i.

    Students on antivirals acquire with per-unit probability p_i (1 - AVE_S).
    Absent students neither transmit nor acquire.
    """
    intervention = intervention or InterventionConfig()
    if network.n != state.n:
        raise ValueError(f"network has {network.n} students, outbreak state {state.n}")
    present = ~state.absent()
    p = state.unit_probabilities(ave_i=intervention.ave_i) * present
    sources = np.flatnonzero(p > 0)
    prob = np.zeros(state.n)
    if sources.size == 0:
        return prob

    contacts = network.matrix[:, sources]
    susceptible = (state.status == Status.susceptible) & present
    protected = state.on_antivirals()
    log_escape = contacts @ np.log1p(-p[sources])
    if protected.any():
        log_escape_protected = contacts @ np.log1p(-p[sources] * (1.0 - intervention.ave_s))
        log_escape = np.where(protected, log_escape_protected, log_escape)
    prob[susceptible] = -np.expm1(log_escape[susceptible])
    return prob


def transmission_step(
    state: EpidemicState,
    network: ContactNetwork,
    rng: np.random.Generator,
    intervention: Optional[InterventionConfig] = None,
) -> np.ndarray:
    intervention = intervention or InterventionConfig()
    prob = infection_probabilities(state, network, intervention)
    candidates = np.flatnonzero(prob > 0)
    if candidates.size == 0:
        return candidates
    infected = candidates[rng.random(candidates.size) < prob[candidates]]
    apply_ave_p = intervention.kind is InterventionKind.tap
    state.infect(infected, rng, ave_p=intervention.ave_p if apply_ave_p else 0.0)
    return infected


def advance_day(
    state: EpidemicState,
    plan: SeasonPlan,
    intervention: InterventionConfig,
    rng: np.random.Generator,
) -> EpidemicState:
    state.day += 1
    today = state.day

    # Status transitions
    becoming_infectious = (state.status == Status.latent) & (state.onset_day == today)
    state.status[becoming_infectious] = Status.infectious
    recovering = (state.status == Status.infectious) & (state.onset_day + INFECTIOUS_DAYS == today)
    state.status[recovering] = Status.immune

    # Interventions respond to yesterday's symptom onsets
    onsets = np.flatnonzero(state.symptomatic & (state.onset_day == today - 1))
    if intervention.kind is InterventionKind.tap and onsets.size:
        apply_tap(state, onsets, plan.network_for_day(today - 1), intervention, rng)
    elif intervention.kind is InterventionKind.grade_closure:
        apply_grade_closure(state, onsets, intervention)

    new_infections = np.empty(0, dtype=np.int64)
    if np.any(state.status == Status.infectious):
        new_infections = transmission_step(state, plan.network_for_day(today), rng, intervention)

    np.subtract(state.treatment_days, 1, out=state.treatment_days, where=state.treatment_days > 0)
    np.subtract(state.prophylaxis_days, 1, out=state.prophylaxis_days, where=state.prophylaxis_days > 0)

    counts = state.counts()
    state.daily_infectious.append(counts["infectious"])
    state.history.append(
        (
            today,
            counts["susceptible"],
            counts["latent"],
            counts["infectious"],
            counts["immune"],
            int(state.withdrawn().sum()),
            int(new_infections.size),
        )
    )
    return state


# ------------------------------------------------ Outcomes ------------------------------------------------


@attr.s(frozen=True, auto_attribs=True)
class OutcomeSummary:
    final_size: int = attr.ib(converter=int)
    peak_date: Optional[int] = None
    epidemic: bool = attr.ib(default=attr.Factory(lambda self: self.final_size > EPIDEMIC_THRESHOLD, takes_self=True))

    @epidemic.validator
    def _epidemic_matches_size(self, attribute, value):
        if value != (self.final_size > EPIDEMIC_THRESHOLD):
            raise ValueError(f"epidemic must be final_size > {EPIDEMIC_THRESHOLD}")

    @classmethod
    def from_daily_counts(cls, daily_infectious, final_size: int) -> "OutcomeSummary":
        daily = np.asarray(daily_infectious)
        peak = int(np.argmax(daily)) + 1 if daily.size and daily.max() > 0 else None
        return cls(final_size=final_size, peak_date=peak)


@attr.s(frozen=True, auto_attribs=True, eq=False)
class Trajectory:
    frame: pd.DataFrame

    @property
    def days(self) -> int:
        return len(self.frame)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.frame.equals(other.frame)


def save_trajectory(trajectory: Trajectory, path: Path) -> None:
    trajectory.frame.to_csv(path, index=False)
    logger.info(f"Saved {trajectory.days}-day trajectory to {path}")


def simulate(
    state: EpidemicState,
    plan: SeasonPlan,
    intervention: InterventionConfig,
    rng: np.random.Generator,
) -> tuple[Trajectory, OutcomeSummary]:
    """Advance ``state`` until no latent or infectious students remain, or the season ends."""
    while state.active:
        if state.day >= plan.season_length:
            logger.warning(f"Outbreak still active after {plan.season_length} days; truncated at the season end")
            break
        advance_day(state, plan, intervention, rng)

    frame = pd.DataFrame(state.history, columns=TRAJECTORY_COLUMNS)
    summary = OutcomeSummary.from_daily_counts(state.daily_infectious, state.cumulative)
    return Trajectory(frame=frame), summary


def run_outbreak(
    plan: SeasonPlan,
    params: NaturalHistoryParams,
    intervention: InterventionConfig,
    seed: int | np.random.Generator,
    curves: list[ViralLoadCurve],
    n_index_cases: int = 1,
) -> tuple[Trajectory, OutcomeSummary]:
    """One stochastic outbreak seeded by ``n_index_cases`` students chosen uniformly on day 0."""
    if plan.roster is None:
        raise ValueError("outbreaks need the plan's roster for grade membership")
    if not 1 <= n_index_cases <= plan.n:
        raise ValueError(f"n_index_cases must be within 1..{plan.n}, got {n_index_cases}")
    rng = np.random.default_rng(seed)
    state = new_state(plan.roster.grades, params, curves)
    state.infect(rng.choice(plan.n, size=n_index_cases, replace=False), rng)
    trajectory, summary = simulate(state, plan, intervention, rng)
    logger.debug(f"Outbreak finished on day {state.day}: {summary}")
    return trajectory, summary
