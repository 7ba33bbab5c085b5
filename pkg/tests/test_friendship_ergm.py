import json
import math

import numpy as np
import pytest
from scipy.special import expit, logit
from scipy.stats import chi2

from networks.friendship_ergm import (
    ALL_TERMS,
    ErgmCoefficients,
    ErgmSeparationError,
    FriendshipNetwork,
    dyad_logit,
    dyad_probabilities,
    fit_ergm,
    load_ergm_coefficients,
    load_friendship,
    save_ergm_coefficients,
    save_friendship,
    _TypePairs,
    simulate_friendship,
)
from population.items import Race, Roster, School, Sex, Student
from population.synthetic import generate_synthetic_roster


@pytest.fixture
def table_coefficients(data_dir) -> ErgmCoefficients:
    return load_ergm_coefficients(data_dir / "ergm_coefficients.json")


def _student(i, grade=7, sex=Sex.female, race=Race.white, school=School.main):
    return Student(id=i, grade=grade, sex=sex, race=race, school=school)


# ------------------------------------------------ Dyad model ------------------------------------------------


def test_dyad_logit_for_matching_grade_seven_students(table_coefficients):
    value = dyad_logit(_student(0), _student(1), table_coefficients)
    assert value == pytest.approx(-4.67)
    assert expit(value) == pytest.approx(0.0093, abs=1e-4)


def test_race_missing_pair_is_never_friends(table_coefficients):
    a = _student(0, race=Race.missing)
    b = _student(1, race=Race.missing, grade=9, sex=Sex.male)
    assert dyad_logit(a, b, table_coefficients) == -math.inf
    assert expit(dyad_logit(a, b, table_coefficients)) == 0.0


def test_sociality_is_added_for_both_endpoints(table_coefficients):
    a = _student(0, grade=8, sex=Sex.male, race=Race.black)
    b = _student(1, grade=10, sex=Sex.female, race=Race.hispanic, school=School.sister)
    expected = -10.91 + 0.54 + 0.3 + 0.12 + 0.57 + 0.81
    assert dyad_logit(a, b, table_coefficients) == pytest.approx(expected)


def test_dyad_logit_symmetry(table_coefficients):
    roster = generate_synthetic_roster(40, sister_school_share=0.3, seed=5)
    rng = np.random.default_rng(0)
    for _ in range(50):
        i, j = rng.choice(roster.n, size=2, replace=False)
        a, b = roster.students[i], roster.students[j]
        assert dyad_logit(a, b, table_coefficients) == dyad_logit(b, a, table_coefficients)


def test_dyad_probabilities_match_dyad_logit(table_coefficients):
    roster = generate_synthetic_roster(15, sister_school_share=0.3, seed=6)
    prob = dyad_probabilities(roster, table_coefficients)
    iu, ju = np.triu_indices(roster.n, k=1)
    expected = [expit(dyad_logit(roster.students[i], roster.students[j], table_coefficients)) for i, j in zip(iu, ju)]
    np.testing.assert_allclose(prob, expected)


def test_coefficients_validation():
    with pytest.raises(ValueError):
        ErgmCoefficients(edges=-math.inf)
    with pytest.raises(ValueError):
        ErgmCoefficients(edges=-1.0, sociality={"grade7": 0.1})
    with pytest.raises(ValueError):
        ErgmCoefficients(edges=-1.0, sociality={"male": -math.inf})
    with pytest.raises(ValueError):
        ErgmCoefficients(edges=-1.0, mixing={"school": math.inf})
    assert ErgmCoefficients(edges=-1.0, mixing={"race.missing": -math.inf}).term("mixing.race.missing") == -math.inf


# ------------------------------------------------ Simulation ------------------------------------------------


def test_simulate_with_very_negative_edges_is_empty(small_roster):
    network = simulate_friendship(small_roster, ErgmCoefficients(edges=-50.0), np.random.default_rng(1))
    assert network.n_edges == 0


def test_simulate_with_very_positive_edges_is_complete(small_roster):
    network = simulate_friendship(small_roster, ErgmCoefficients(edges=50.0), np.random.default_rng(1))
    assert network.n_edges == small_roster.n * (small_roster.n - 1) // 2


def test_simulate_is_deterministic(small_roster, table_coefficients):
    first = simulate_friendship(small_roster, table_coefficients, np.random.default_rng(3))
    second = simulate_friendship(small_roster, table_coefficients, np.random.default_rng(3))
    assert first == second


def test_simulated_density_matches_probabilities():
    roster = generate_synthetic_roster(200, seed=8)
    coef = ErgmCoefficients(edges=-3.0, mixing={"grade7": 1.0, "grade8": 1.0})
    expected = dyad_probabilities(roster, coef).sum()
    rng = np.random.default_rng(4)
    counts = [simulate_friendship(roster, coef, rng).n_edges for _ in range(20)]
    assert np.mean(counts) == pytest.approx(expected, rel=0.03)


@pytest.mark.slow
def test_simulated_dyad_types_match_their_probabilities():
    roster = generate_synthetic_roster(200, seed=8)
    coef = ErgmCoefficients(
        edges=-3.5,
        sociality={"male": 0.3, "grade12": -0.2, "race.hispanic": 0.4},
        mixing={"grade7": 1.0, "grade10": 0.8, "race.white": 0.5, "sex.female": 0.4},
    )
    pairs = _TypePairs.of_roster(roster)
    rng = np.random.default_rng(21)
    n_networks = 500
    observed = sum(pairs.edge_counts(simulate_friendship(roster, coef, rng)) for _ in range(n_networks))

    p = expit(pairs.logit_table(coef)[pairs.first, pairs.second])
    expected = n_networks * pairs.dyads * p
    variance = expected * (1 - p)

    cells = expected >= 5
    statistic = float((((observed - expected) ** 2)[cells] / variance[cells]).sum())
    assert chi2.sf(statistic, int(cells.sum())) > 1e-3

    # grade-pair totals, each within four standard errors
    grade = pairs.covariates.grade
    low = np.minimum(grade[pairs.first], grade[pairs.second])
    high = np.maximum(grade[pairs.first], grade[pairs.second])
    for a, b in sorted(set(zip(low.tolist(), high.tolist()))):
        cell = (low == a) & (high == b)
        if expected[cell].sum() == 0:
            continue
        gap = abs(observed[cell].sum() - expected[cell].sum())
        assert gap < 4 * np.sqrt(variance[cell].sum()), (a, b)


# ------------------------------------------------ Estimation ------------------------------------------------


def test_identical_students_fit_logit_of_density():
    roster = Roster(students=[_student(i) for i in range(30)])
    rng = np.random.default_rng(2)
    iu, ju = np.triu_indices(30, k=1)
    hit = rng.random(iu.size) < 0.2
    network = FriendshipNetwork(n=30, edges=np.column_stack([iu[hit], ju[hit]]))
    coef = fit_ergm(network, roster)
    density = network.n_edges / iu.size
    assert coef.edges == pytest.approx(logit(density), abs=1e-6)
    assert all(value == 0.0 for value in coef.sociality.values())
    assert all(value == 0.0 for value in coef.mixing.values())


def test_race_missing_without_edges_fits_minus_infinity():
    students = [
        _student(i, grade=7 + i % 2, race=Race.missing if i % 5 == 0 else Race.white) for i in range(60)
    ]
    roster = Roster(students=students)
    rng = np.random.default_rng(3)
    iu, ju = np.triu_indices(60, k=1)
    both_missing = (iu % 5 == 0) & (ju % 5 == 0)
    hit = (rng.random(iu.size) < 0.3) & ~both_missing
    network = FriendshipNetwork(n=60, edges=np.column_stack([iu[hit], ju[hit]]))

    coef = fit_ergm(network, roster)
    assert coef.mixing["race.missing"] == -math.inf
    assert coef.standard_errors["mixing.race.missing"] is None
    assert math.isfinite(coef.edges)
    assert coef.standard_errors["edges"] > 0


def test_separation_names_the_term():
    students = [_student(0, grade=8), _student(1, grade=8)] + [_student(i) for i in range(2, 6)]
    network = FriendshipNetwork(n=6, edges=[(0, 1), (2, 3)])
    with pytest.raises(ErgmSeparationError) as exc_info:
        fit_ergm(network, Roster(students=students))
    assert exc_info.value.term == "mixing.grade8"


def test_fit_needs_an_edge_and_a_non_edge(small_roster):
    with pytest.raises(ValueError):
        fit_ergm(FriendshipNetwork(n=small_roster.n), small_roster)


@pytest.mark.slow
def test_fit_recovers_simulated_coefficients():
    roster = generate_synthetic_roster(
        400, race_weights=(0.55, 0.15, 0.15, 0.05, 0.1, 0.0), sister_school_share=0.3, seed=13
    )
    truth = ErgmCoefficients(
        edges=-4.0,
        sociality={"male": 0.3},
        mixing={"school": 1.0, "sex.male": 0.5, **{f"grade{g}": 1.5 for g in range(7, 13)}},
    )
    network = simulate_friendship(roster, truth, np.random.default_rng(21))
    fitted = fit_ergm(network, roster)
    for term, se in fitted.standard_errors.items():
        if se is None:
            continue
        assert abs(fitted.term(term) - truth.term(term)) < 4 * se, term


# ------------------------------------------------ Files ------------------------------------------------


def test_bundled_coefficients(table_coefficients):
    assert table_coefficients.edges == pytest.approx(-10.91)
    assert table_coefficients.term("sociality.race.hispanic") == pytest.approx(0.81)
    assert table_coefficients.term("mixing.race.missing") == -math.inf
    assert table_coefficients.term("sociality.grade7") == 0.0


def test_coefficients_file_keeps_minus_infinity(tmp_path, table_coefficients):
    path = tmp_path / "coefficients.json"
    save_ergm_coefficients(table_coefficients, path)
    assert json.loads(path.read_text())["mixing.race.missing"] == "-Inf"
    loaded = load_ergm_coefficients(path)
    assert loaded.mixing == table_coefficients.mixing
    assert loaded.sociality == table_coefficients.sociality


def test_bundled_standard_errors_survive_a_round_trip(tmp_path, table_coefficients):
    errors = table_coefficients.standard_errors
    assert set(errors) == set(ALL_TERMS)
    assert errors["edges"] == pytest.approx(0.78)
    assert errors["mixing.sex.male"] == pytest.approx(0.38)
    assert errors["mixing.race.missing"] is None

    path = tmp_path / "coefficients.json"
    save_ergm_coefficients(table_coefficients, path)
    assert load_ergm_coefficients(path).standard_errors == errors


def test_invalid_coefficients_file(tmp_path):
    path = tmp_path / "coefficients.json"
    path.write_text(json.dumps({"sociality.male": 0.2}))
    with pytest.raises(ValueError):
        load_ergm_coefficients(path)


def test_friendship_file_round_trip(tmp_path, small_friendship):
    path = tmp_path / "friendship.txt"
    save_friendship(small_friendship, path)
    assert load_friendship(path, small_friendship.n) == small_friendship


def test_reciprocal_nominations_collapse(tmp_path):
    path = tmp_path / "friendship.txt"
    path.write_text("0 1\n1 0\n1 2\n")
    network = load_friendship(path, 3)
    assert network.n_edges == 2
    assert network.has_edge(1, 0)
