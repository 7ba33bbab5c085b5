from pathlib import Path

import numpy as np
import pytest

from degrees.degree_model import CensoredNegBinFit, DegreeParameters, NegBinRegressionFit
from epidemics.natural_history import ViralLoadCurve, load_viral_load_curves
from networks.friendship_ergm import FriendshipNetwork
from population.items import Roster
from population.synthetic import generate_synthetic_roster

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def random_friendship(
    roster: Roster, within_grade: float, across_grades: float, rng: np.random.Generator
) -> FriendshipNetwork:
    """Dyad-independent friendships, denser within a grade."""
    iu, ju = np.triu_indices(roster.n, k=1)
    same = roster.grades[iu] == roster.grades[ju]
    hit = rng.random(iu.size) < np.where(same, within_grade, across_grades)
    return FriendshipNetwork(n=roster.n, edges=np.column_stack([iu[hit], ju[hit]]))


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def small_roster() -> Roster:
    return generate_synthetic_roster(120, seed=11)


@pytest.fixture
def small_friendship(small_roster) -> FriendshipNetwork:
    return random_friendship(small_roster, 0.2, 0.01, np.random.default_rng(12))


@pytest.fixture
def light_params() -> DegreeParameters:
    """Low contact rates so small networks wire quickly."""
    return DegreeParameters(
        break_fit=NegBinRegressionFit(intercept=0.0, log_ratio=0.0, dispersion=2.0),
        lunch_fit=CensoredNegBinFit(mean=2.0, dispersion=2.0),
        pct_to_friends=0.5,
        class_friend_fraction=0.5,
    )


@pytest.fixture
def curves() -> list[ViralLoadCurve]:
    return load_viral_load_curves(DATA_DIR / "viral_load_curves.txt")


@pytest.fixture
def flat_curves() -> list[ViralLoadCurve]:
    return [ViralLoadCurve(loads=[1.0] * 6) for _ in range(6)]
