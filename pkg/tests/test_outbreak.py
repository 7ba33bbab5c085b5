import numpy as np
import pytest

from epidemics.interventions import InterventionConfig, InterventionKind
from epidemics.natural_history import NEVER, NaturalHistoryParams, Status
from epidemics.outbreak import (
    EPIDEMIC_THRESHOLD,
    TRAJECTORY_COLUMNS,
    OutcomeSummary,
    advance_day,
    infection_probabilities,
    new_state,
    run_outbreak,
    save_trajectory,
    simulate,
    transmission_step,
)
from networks.contact_network import ContactNetwork
from networks.season_plan import SeasonPlan, Variant
from networks.stub_matcher import MultiLayer
from population.items import Race, Roster, School, Sex, Student


def _network(n, entries):
    return ContactNetwork(matrix=MultiLayer.from_entries(n, entries).matrix)


def _roster(grades):
    return Roster(
        students=[
            Student(id=i, grade=g, sex=Sex.male, race=Race.white, school=School.main) for i, g in enumerate(grades)
        ]
    )


def _static_plan(network, grades, season_length=365):
    return SeasonPlan(
        variant=Variant.static,
        n=network.n,
        seed=0,
        season_length=season_length,
        roster=_roster(grades),
        fixed_network=network,
    )


def _infectious_source(state, i=0, symptomatic=False):
    """Put student ``i`` on the first infectious day with curve 0."""
    state.status[i] = Status.infectious
    state.onset_day[i] = state.day
    state.curve_index[i] = 0
    state.symptomatic[i] = symptomatic
    state.withdrawal_day[i] = NEVER


@pytest.fixture
def pair_state(flat_curves):
    state = new_state(np.array([7, 7]), NaturalHistoryParams(), flat_curves)
    state.day = 1
    _infectious_source(state)
    return state


# ------------------------------------------------ Escape probabilities ------------------------------------------------


def test_two_units_at_one_half(pair_state):
    pair_state.scale = 0.5
    prob = infection_probabilities(pair_state, _network(2, {(0, 1): 2}))
    assert prob[1] == pytest.approx(0.75)
    assert prob[0] == 0.0


def test_full_day_of_contact(pair_state):
    pair_state.scale = 0.004
    prob = infection_probabilities(pair_state, _network(2, {(0, 1): 38}))
    assert prob[1] == pytest.approx(1 - 0.996**38)
    assert prob[1] == pytest.approx(0.1412, abs=1e-4)


def test_several_sources_multiply_escapes(flat_curves):
    state = new_state(np.array([7, 7, 7]), NaturalHistoryParams(), flat_curves)
    state.day = 1
    state.scale = 0.1
    _infectious_source(state, 0)
    _infectious_source(state, 1, symptomatic=True)
    prob = infection_probabilities(state, _network(3, {(0, 2): 3, (1, 2): 1}))
    assert prob[2] == pytest.approx(1 - 0.9**3 * 0.8)


def test_prophylaxis_scales_acquisition(pair_state):
    pair_state.scale = 0.01
    network = _network(2, {(0, 1): 1})
    unprotected = infection_probabilities(pair_state, network)[1]
    pair_state.prophylaxis_days[1] = 10
    protected = infection_probabilities(pair_state, network, InterventionConfig(kind=InterventionKind.tap))[1]
    assert protected == pytest.approx(0.37 * unprotected, rel=1e-12)


def test_treated_source_is_less_infectious(pair_state):
    pair_state.scale = 0.01
    network = _network(2, {(0, 1): 1})
    untreated = infection_probabilities(pair_state, network)[1]
    pair_state.treatment_days[0] = 5
    treated = infection_probabilities(pair_state, network, InterventionConfig(kind=InterventionKind.tap))[1]
    assert treated == pytest.approx(0.85 * untreated, rel=1e-12)


def test_withdrawn_source_contributes_nothing(pair_state):
    pair_state.scale = 0.5
    pair_state.withdrawal_day[0] = pair_state.day
    assert infection_probabilities(pair_state, _network(2, {(0, 1): 10}))[1] == 0.0


def test_closed_grade_cannot_be_infected(flat_curves):
    state = new_state(np.array([7, 8]), NaturalHistoryParams(), flat_curves)
    state.day = 1
    state.scale = 0.5
    _infectious_source(state)
    state.closed_grades[8] = 1
    assert infection_probabilities(state, _network(2, {(0, 1): 10}))[1] == 0.0


def test_network_size_must_match(pair_state):
    with pytest.raises(ValueError):
        infection_probabilities(pair_state, ContactNetwork.empty(3))


def test_transmission_step_infects_with_certainty(pair_state):
    pair_state.scale = 1.0
    infected = transmission_step(pair_state, _network(2, {(0, 1): 1}), np.random.default_rng(0))
    assert infected.tolist() == [1]
    assert pair_state.status[1] == Status.latent
    assert pair_state.infection_day[1] == 1
    assert pair_state.onset_day[1] in (2, 3, 4)
    assert pair_state.cumulative == 1


# ------------------------------------------------ Daily progression ------------------------------------------------


def test_nothing_happens_without_infection(flat_curves):
    state = new_state(np.array([7, 7]), NaturalHistoryParams(), flat_curves)
    plan = _static_plan(_network(2, {(0, 1): 10}), [7, 7])
    advance_day(state, plan, InterventionConfig(), np.random.default_rng(0))
    assert state.day == 1
    assert state.counts()["susceptible"] == 2
    assert state.history[-1] == (1, 2, 0, 0, 0, 0, 0)


def test_six_infectious_days_then_immune(flat_curves):
    state = new_state(np.array([7, 7]), NaturalHistoryParams(), flat_curves)
    plan = _static_plan(ContactNetwork.empty(2), [7, 7])
    rng = np.random.default_rng(1)
    state.infect(np.array([0]), rng)
    state.onset_day[0] = 1
    statuses = []
    for _ in range(8):
        advance_day(state, plan, InterventionConfig(), rng)
        statuses.append(Status(state.status[0]))
    assert statuses[:6] == [Status.infectious] * 6
    assert statuses[6] is Status.immune


def test_grade_closes_the_day_after_onset(flat_curves):
    state = new_state(np.array([9, 9, 10]), NaturalHistoryParams(), flat_curves)
    plan = _static_plan(ContactNetwork.empty(3), [9, 9, 10])
    rng = np.random.default_rng(2)
    state.infect(np.array([0]), rng)
    state.onset_day[0] = 1
    state.symptomatic[0] = True
    closure = InterventionConfig(kind=InterventionKind.grade_closure)
    advance_day(state, plan, closure, rng)
    assert state.closed_grades == {}
    advance_day(state, plan, closure, rng)
    assert state.closed_grades == {9: 2}


def test_tap_triggers_the_day_after_onset(flat_curves):
    state = new_state(np.array([7, 7, 7]), NaturalHistoryParams(), flat_curves)
    plan = _static_plan(_network(3, {(0, 1): 4}), [7, 7, 7])
    rng = np.random.default_rng(3)
    state.infect(np.array([0]), rng)
    state.onset_day[0] = 1
    state.symptomatic[0] = True
    tap = InterventionConfig(kind=InterventionKind.tap)
    advance_day(state, plan, tap, rng)
    assert not state.on_antivirals().any()
    advance_day(state, plan, tap, rng)
    # counters are decremented at the end of the day
    assert state.treatment_days[0] == 4
    assert state.prophylaxis_days[1] == 9
    assert state.prophylaxis_days[2] == 0


# ------------------------------------------------ Outcomes ------------------------------------------------


def test_peak_date_takes_first_maximum():
    summary = OutcomeSummary.from_daily_counts([1, 3, 3, 2], final_size=9)
    assert summary.peak_date == 2


def test_no_infectious_days_means_no_peak():
    assert OutcomeSummary.from_daily_counts([0, 0], final_size=1).peak_date is None


def test_epidemic_threshold():
    assert EPIDEMIC_THRESHOLD == 200
    assert OutcomeSummary(final_size=201).epidemic
    assert not OutcomeSummary(final_size=200).epidemic
    with pytest.raises(ValueError):
        OutcomeSummary(final_size=10, epidemic=True)


@pytest.fixture
def dense_plan(small_roster):
    rng = np.random.default_rng(5)
    iu, ju = np.triu_indices(small_roster.n, k=1)
    keep = rng.random(iu.size) < 0.1
    entries = {(int(i), int(j)): int(u) for i, j, u in zip(iu[keep], ju[keep], rng.integers(1, 20, keep.sum()))}
    return SeasonPlan(
        variant=Variant.static,
        n=small_roster.n,
        seed=0,
        roster=small_roster,
        fixed_network=_network(small_roster.n, entries),
    )


def test_no_transmission_gives_final_size_one(dense_plan, curves):
    params = NaturalHistoryParams(mean_unit_transmission=0.0)
    _, summary = run_outbreak(dense_plan, params, InterventionConfig(), 7, curves)
    assert summary.final_size == 1
    assert not summary.epidemic


def test_status_conservation(dense_plan, curves):
    params = NaturalHistoryParams(mean_unit_transmission=0.01)
    trajectory, summary = run_outbreak(dense_plan, params, InterventionConfig(), 11, curves)
    frame = trajectory.frame
    assert list(frame.columns) == TRAJECTORY_COLUMNS
    totals = frame[["susceptible", "latent", "infectious", "immune"]].sum(axis=1)
    assert (totals == dense_plan.n).all()
    assert frame["day"].tolist() == list(range(1, trajectory.days + 1))
    assert summary.final_size == 1 + frame["new_infections"].sum()
    assert frame["immune"].iloc[-1] == summary.final_size


def test_outbreak_is_reproducible(dense_plan, curves):
    params = NaturalHistoryParams(mean_unit_transmission=0.01)
    first = run_outbreak(dense_plan, params, InterventionConfig(), 13, curves)
    second = run_outbreak(dense_plan, params, InterventionConfig(), 13, curves)
    assert first[0] == second[0]
    assert first[1] == second[1]


def test_all_grades_closed_stops_transmission(dense_plan, curves, small_roster):
    params = NaturalHistoryParams(mean_unit_transmission=0.05)
    state = new_state(small_roster.grades, params, curves)
    state.infect(np.array([0]), np.random.default_rng(0))
    state.closed_grades.update({int(g): 0 for g in np.unique(small_roster.grades)})
    closure = InterventionConfig(kind=InterventionKind.grade_closure)
    _, summary = simulate(state, dense_plan, closure, np.random.default_rng(1))
    assert summary.final_size == 1


def test_season_end_truncates(dense_plan, curves):
    short = SeasonPlan(
        variant=Variant.static,
        n=dense_plan.n,
        seed=0,
        season_length=3,
        roster=dense_plan.roster,
        fixed_network=dense_plan.fixed_network,
    )
    trajectory, _ = run_outbreak(short, NaturalHistoryParams(), InterventionConfig(), 3, curves)
    assert trajectory.days <= 3


def test_index_case_count_checked(dense_plan, curves):
    with pytest.raises(ValueError):
        run_outbreak(dense_plan, NaturalHistoryParams(), InterventionConfig(), 1, curves, n_index_cases=0)


def test_save_trajectory(tmp_path, dense_plan, curves):
    trajectory, _ = run_outbreak(dense_plan, NaturalHistoryParams(), InterventionConfig(), 5, curves)
    path = tmp_path / "trajectory.csv"
    save_trajectory(trajectory, path)
    assert path.read_text().splitlines()[0] == ",".join(TRAJECTORY_COLUMNS)


@pytest.mark.slow
def test_tap_lowers_mean_final_size(dense_plan, curves):
    params = NaturalHistoryParams(mean_unit_transmission=0.02)
    tap = InterventionConfig(kind=InterventionKind.tap)

    def mean_final_size(intervention):
        return np.mean([run_outbreak(dense_plan, params, intervention, s, curves)[1].final_size for s in range(60)])

    assert mean_final_size(tap) < mean_final_size(InterventionConfig())
