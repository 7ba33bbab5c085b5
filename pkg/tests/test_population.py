import numpy as np
import pytest

from population.items import NeighborMix, Race, Roster, School, Sex, Student, SurveyRecord, SurveySample
from population.items_loaders import (
    RosterValidationError,
    SurveyError,
    load_roster,
    load_survey,
    save_roster,
    save_survey,
)
from population.survey_service import bootstrap_resample, preprocess_survey
from population.synthetic import generate_synthetic_roster, generate_synthetic_survey


def _record(breaks=3, lunch=5, friends=4, pct=0.5, mix="mix"):
    return SurveyRecord(
        break_contacts=breaks, lunch_contacts=lunch, n_close_friends=friends, pct_to_friends=pct, neighbor_mix=mix
    )


# ------------------------------------------------ Roster loading ------------------------------------------------


def test_load_roster_three_rows(tmp_path):
    path = tmp_path / "roster.csv"
    path.write_text(
        "id,grade,sex,race,school\n"
        "101,7,male,white,main\n"
        "205,9,female,Asian,\n"
        "999,12,female,martian,sister\n"
    )
    roster = load_roster(path)
    assert roster.n == 3
    assert roster.grades.tolist() == [7, 9, 12]
    assert [s.id for s in roster.students] == [0, 1, 2]
    assert roster.students[1].race is Race.asian
    assert roster.students[1].school is School.main
    assert roster.students[2].race is Race.missing
    assert roster.students[2].school is School.sister


def test_load_roster_empty_file(tmp_path):
    path = tmp_path / "roster.csv"
    path.write_text("")
    with pytest.raises(RosterValidationError, match="empty roster"):
        load_roster(path)


def test_load_roster_header_only(tmp_path):
    path = tmp_path / "roster.csv"
    path.write_text("id,grade,sex,race,school\n")
    with pytest.raises(RosterValidationError, match="empty roster"):
        load_roster(path)


def test_load_roster_grade_out_of_range_names_line(tmp_path):
    path = tmp_path / "roster.csv"
    path.write_text("id,grade,sex,race,school\n1,7,male,white,main\n2,13,female,black,main\n")
    with pytest.raises(RosterValidationError, match="line 3") as exc_info:
        load_roster(path)
    assert exc_info.value.line == 3


def test_load_roster_duplicate_id(tmp_path):
    path = tmp_path / "roster.csv"
    path.write_text("id,grade,sex,race,school\n1,7,male,white,main\n1,8,female,black,main\n")
    with pytest.raises(RosterValidationError, match="duplicate"):
        load_roster(path)


def test_load_roster_missing_column(tmp_path):
    path = tmp_path / "roster.csv"
    path.write_text("id,grade,sex,race\n1,7,male,white\n2,8,female,black\n")
    with pytest.raises(RosterValidationError, match="school"):
        load_roster(path)


def test_roster_file_round_trip(tmp_path):
    roster = generate_synthetic_roster(25, sister_school_share=0.3, seed=4)
    path = tmp_path / "roster.csv"
    save_roster(roster, path)
    assert load_roster(path) == roster


def test_student_rejects_bad_grade():
    with pytest.raises(ValueError):
        Student(id=0, grade=6, sex=Sex.male, race=Race.white, school=School.main)


def test_roster_type_checks_before_its_own_validator():
    student = Student(id=0, grade=7, sex=Sex.male, race=Race.white)
    with pytest.raises(TypeError):
        Roster(students=[student, "not a student"])


# ------------------------------------------------ Survey loading ------------------------------------------------


def test_load_survey(tmp_path):
    path = tmp_path / "survey.csv"
    path.write_text(
        "break_contacts,lunch_contacts,n_close_friends,pct_to_friends,neighbor_mix\n"
        "4,10,3,0.6,mostly_friends\n"
        "2,8,0,0.8,\n"
    )
    survey = load_survey(path)
    assert survey.n == 2
    assert survey.records[0].neighbor_mix is NeighborMix.mostly_friends
    assert survey.records[1].neighbor_mix is NeighborMix.mix
    assert survey.mean_pct_to_friends == pytest.approx(0.7)


def test_load_survey_unknown_neighbor_mix_names_line(tmp_path):
    path = tmp_path / "survey.csv"
    path.write_text(
        "break_contacts,lunch_contacts,n_close_friends,pct_to_friends,neighbor_mix\n"
        "4,10,3,0.6,mix\n"
        "4,10,3,0.6,sometimes\n"
    )
    with pytest.raises(SurveyError, match="line 3"):
        load_survey(path)


def test_load_survey_rejects_fraction_above_one(tmp_path):
    path = tmp_path / "survey.csv"
    path.write_text("break_contacts,lunch_contacts,n_close_friends,pct_to_friends,neighbor_mix\n4,10,3,1.2,mix\n")
    with pytest.raises(SurveyError):
        load_survey(path)


def test_load_survey_empty(tmp_path):
    path = tmp_path / "survey.csv"
    path.write_text("")
    with pytest.raises(SurveyError, match="empty survey"):
        load_survey(path)


def test_survey_file_round_trip(tmp_path):
    survey = generate_synthetic_survey(n=40, seed=3)
    path = tmp_path / "survey.csv"
    save_survey(survey, path)
    loaded = load_survey(path)
    assert loaded.n == survey.n
    np.testing.assert_array_equal(loaded.break_contacts, survey.break_contacts)
    assert loaded.mean_pct_to_friends == pytest.approx(survey.mean_pct_to_friends)


# ------------------------------------------------ Preprocessing ------------------------------------------------


def test_preprocess_caps_break_contacts():
    survey = preprocess_survey(SurveySample(records=[_record(breaks=35)]))
    assert survey.records[0].break_contacts == 20


def test_preprocess_drops_more_than_forty_friends():
    survey = preprocess_survey(SurveySample(records=[_record(friends=41), _record(friends=3)]))
    assert survey.n == 1
    assert survey.records[0].n_close_friends == 3


def test_preprocess_boundary_unchanged():
    record = _record(breaks=20, friends=40)
    assert preprocess_survey(SurveySample(records=[record])).records == [record]


def test_preprocess_recomputes_x():
    survey = preprocess_survey(SurveySample(records=[_record(friends=41, pct=0.0), _record(pct=0.9)]))
    assert survey.mean_pct_to_friends == pytest.approx(0.9)


def test_preprocess_everything_removed():
    with pytest.raises(SurveyError, match="empty survey after preprocessing"):
        preprocess_survey(SurveySample(records=[_record(friends=50)]))


def test_preprocess_is_idempotent():
    raw = generate_synthetic_survey(break_mean0=12.0, n=300, seed=8)
    once = preprocess_survey(raw)
    assert preprocess_survey(once).records == once.records


# ------------------------------------------------ Resampling ------------------------------------------------


def test_bootstrap_single_record():
    survey = SurveySample(records=[_record()])
    assert bootstrap_resample(survey, np.random.default_rng(0)).records == survey.records


def test_bootstrap_preserves_size():
    survey = generate_synthetic_survey(n=57, seed=2)
    assert bootstrap_resample(survey, np.random.default_rng(1)).n == 57


def test_bootstrap_expected_multiplicity():
    first, second = _record(pct=0.1), _record(pct=0.9)
    survey = SurveySample(records=[first, second])
    rng = np.random.default_rng(5)
    counts = [sum(r is first for r in bootstrap_resample(survey, rng).records) for _ in range(1000)]
    assert np.mean(counts) == pytest.approx(1.0, abs=0.1)


def test_bootstrap_empty_survey():
    with pytest.raises(SurveyError):
        bootstrap_resample(SurveySample(records=[]), np.random.default_rng(0))


# ------------------------------------------------ Synthetic data ------------------------------------------------


def test_synthetic_roster_default_size():
    assert generate_synthetic_roster(1074, seed=1).n == 1074


def test_synthetic_roster_point_mass_grade():
    roster = generate_synthetic_roster(10, grade_weights=(0, 0, 1, 0, 0, 0), seed=1)
    assert set(roster.grades.tolist()) == {9}


def test_synthetic_roster_deterministic():
    assert generate_synthetic_roster(50, seed=9) == generate_synthetic_roster(50, seed=9)


def test_synthetic_roster_rejects_bad_inputs():
    with pytest.raises(ValueError):
        generate_synthetic_roster(1)
    with pytest.raises(ValueError):
        generate_synthetic_roster(10, grade_weights=(0, 0, 0, 0, 0, 0))
    with pytest.raises(ValueError):
        generate_synthetic_roster(10, race_weights=(1, -1, 0, 0, 0, 1))


def test_synthetic_roster_frequencies_match_weights():
    roster = generate_synthetic_roster(10_000, seed=21)
    from scipy import stats

    observed = np.array([(roster.races == r.value).sum() for r in Race])
    expected = np.array([0.55, 0.15, 0.15, 0.05, 0.09, 0.01]) * roster.n
    assert stats.chisquare(observed, expected).pvalue > 0.001
    assert roster.is_male.mean() == pytest.approx(0.5, abs=0.03)


def test_synthetic_survey_break_mean_at_zero_friends():
    survey = generate_synthetic_survey(n=10_000, seed=17)
    zero = survey.break_contacts[survey.n_close_friends == 0]
    assert 4.2 <= zero.mean() <= 4.8


def test_synthetic_survey_empty():
    survey = generate_synthetic_survey(n=0, seed=1)
    assert survey.n == 0
    assert survey.mean_pct_to_friends is None


def test_synthetic_survey_deterministic():
    assert generate_synthetic_survey(n=30, seed=4).records == generate_synthetic_survey(n=30, seed=4).records
