#!/usr/bin/env python3
"""
Synthesize friendship and contact networks.

Draws a friendship network from the ERGM coefficients and composes single
school-day contact networks from a season plan. Without a roster file a
synthetic roster is drawn.
"""

import logging
from pathlib import Path
from typing import Optional

from degrees.degree_model import DegreeParameters, default_degree_params, load_degree_params
from networks.contact_network import ContactNetwork, contact_summary, save_contact_network
from networks.friendship_ergm import (
    FriendshipNetwork,
    load_ergm_coefficients,
    load_friendship,
    save_friendship,
    simulate_friendship,
)
from networks.season_plan import Variant, make_season_plan
from population.items import Roster
from population.items_loaders import load_roster
from population.synthetic import generate_synthetic_roster
from random_streams import spawn_rng
from settings import DATA_DIR, DEGREE_PARAMS_FNAME, ERGM_COEFFICIENTS_FNAME, LOG_FORMAT, LOG_LEVEL, SEED

logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)
logger = logging.getLogger(__name__)

# Size of the school the bundled coefficients describe
DEFAULT_SCHOOL_SIZE = 1074
FRIENDSHIP_FNAME = "friendship.txt"
CONTACTS_FNAME = "contacts_day{day}.txt"

_ROSTER_KEY = 0
_FRIENDSHIP_KEY = 1
_PLAN_KEY = 2


def load_or_generate_roster(roster_path: Optional[Path], seed: int, n: int = DEFAULT_SCHOOL_SIZE) -> Roster:
    if roster_path is not None:
        return load_roster(Path(roster_path))
    logger.info(f"No roster given; drawing a synthetic roster of {n} students")
    return generate_synthetic_roster(n, seed=spawn_rng(seed, _ROSTER_KEY))


def load_or_default_params(params_path: Optional[Path]) -> DegreeParameters:
    path = Path(params_path) if params_path is not None else DATA_DIR / DEGREE_PARAMS_FNAME
    if path.exists():
        return load_degree_params(path)
    logger.warning(f"Degree parameters {path} not found; using the bundled defaults")
    return default_degree_params()


def obtain_friendship(
    roster: Roster,
    seed: int,
    friendship_path: Optional[Path] = None,
    coefficients_path: Optional[Path] = None,
) -> FriendshipNetwork:
    """Read an observed friendship edge list, or simulate one from the ERGM coefficients."""
    if friendship_path is not None:
        return load_friendship(Path(friendship_path), roster.n)
    coefficients = load_ergm_coefficients(Path(coefficients_path or DATA_DIR / ERGM_COEFFICIENTS_FNAME))
    return simulate_friendship(roster, coefficients, spawn_rng(seed, _FRIENDSHIP_KEY))


def run_synth_friendship(
    roster_path: Optional[Path] = None,
    coefficients_path: Optional[Path] = None,
    out_path: Optional[Path] = None,
    seed: int = SEED,
) -> FriendshipNetwork:
    logger.info("Starting friendship network synthesis...")
    roster = load_or_generate_roster(roster_path, seed)
    network = obtain_friendship(roster, seed, coefficients_path=coefficients_path)
    degrees = network.degrees
    logger.info(
        f"Friendship network: {network.n_edges} edges, mean degree {degrees.mean():.2f}, "
        f"{int((degrees == 0).sum())} isolates"
    )
    save_friendship(network, Path(out_path or DATA_DIR / FRIENDSHIP_FNAME))
    return network


def run_synth_contacts(
    roster_path: Optional[Path] = None,
    friendship_path: Optional[Path] = None,
    coefficients_path: Optional[Path] = None,
    params_path: Optional[Path] = None,
    variant: Variant = Variant.static,
    day: int = 1,
    out_path: Optional[Path] = None,
    seed: int = SEED,
) -> ContactNetwork:
    """Compose the contact network of one school day."""
    logger.info(f"Starting {Variant(variant).value} contact network synthesis for day {day}...")
    roster = load_or_generate_roster(roster_path, seed)
    friendship = obtain_friendship(roster, seed, friendship_path, coefficients_path)
    plan = make_season_plan(
        roster,
        friendship,
        variant,
        spawn_rng(seed, _PLAN_KEY),
        params=load_or_default_params(params_path),
    )
    network = plan.network_for_day(day)

    summary = contact_summary(network, friendship)
    friend_share = "n/a" if summary.friend_fraction is None else f"{summary.friend_fraction:.1%}"
    logger.info(
        f"Day {day}: {summary.mean_partners:.1f} partners and {summary.mean_daily_units * 10:.0f} contact minutes "
        f"per student, {summary.mean_duration_minutes:.1f} minutes per partnership, "
        f"{friend_share} of units between friends, {summary.clamped} dyads clamped"
    )
    save_contact_network(network, Path(out_path or DATA_DIR / CONTACTS_FNAME.format(day=day)))
    return network


if __name__ == "__main__":
    run_synth_friendship()
    run_synth_contacts()
