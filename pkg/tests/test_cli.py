import pandas as pd
import pytest

from cli import build_parser, main
from degrees.degree_model import load_degree_params
from epidemics.interventions import InterventionKind
from networks.friendship_ergm import load_friendship
from networks.season_plan import Variant
from population.items_loaders import save_roster, save_survey
from population.synthetic import generate_synthetic_roster, generate_synthetic_survey


@pytest.fixture
def survey_path(tmp_path):
    path = tmp_path / "survey.csv"
    save_survey(generate_synthetic_survey(seed=3), path)
    return path


def test_parse_simulate():
    args = build_parser().parse_args(
        ["--seed", "5", "simulate", "--variant", "dynamic", "--intervention", "tap", "--p-bar", "0.003"]
    )
    assert args.command == "simulate"
    assert args.seed == 5
    assert args.variant is Variant.dynamic
    assert args.intervention is InterventionKind.tap
    assert args.p_bar == 0.003
    assert args.closure_days is None


def test_parse_experiment_defaults(tmp_path):
    args = build_parser().parse_args(["experiment", str(tmp_path / "scenarios.json")])
    assert args.format == "csv"
    assert args.seed is None
    assert args.survey is None


def test_unknown_variant_is_rejected():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["synth-contacts", "--variant", "small_world"])


def test_command_is_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_errors_return_nonzero(tmp_path):
    assert main(["bootstrap", str(tmp_path / "missing.csv")]) == 1


def test_fit_writes_degree_params(tmp_path, survey_path):
    out = tmp_path / "params.json"
    assert main(["--out", str(out), "fit", str(survey_path)]) == 0
    params = load_degree_params(out)
    assert params.break_fit.ratio > 1.0
    assert 0.0 <= params.pct_to_friends <= 1.0


def test_bootstrap_writes_one_row_per_resample(tmp_path, survey_path):
    out = tmp_path / "bootstrap.csv"
    assert main(["--seed", "2", "--out", str(out), "bootstrap", str(survey_path), "--replicates", "3"]) == 0
    assert len(pd.read_csv(out)) == 3


def test_synth_friendship(tmp_path):
    roster_path = tmp_path / "roster.csv"
    save_roster(generate_synthetic_roster(150, seed=4), roster_path)
    out = tmp_path / "friends.txt"
    assert main(["--out", str(out), "synth-friendship", "--roster", str(roster_path)]) == 0
    assert load_friendship(out, 150).n == 150
