"""Daily contact networks.

A day network ``Y`` counts 10-minute contacts per dyad (at most 38). The
network model sums a break/lunch layer, wired by the stub matcher with a
share X of units on friends, and a class layer in which students sit next
to each other within their own grade.
"""

import logging
from functools import cached_property
from pathlib import Path
from typing import Optional

import attr
import numpy as np
import scipy.sparse as sp

from degrees.degree_model import (
    ClassNeighborModel,
    DegreeParameters,
    DegreeRealization,
    sample_class_neighbor_degrees,
    sample_degree_realization,
)
from networks.edge_list import read_edge_list, symmetric_from_entries, write_edge_list
from networks.friendship_ergm import FriendshipNetwork
from networks.stub_matcher import (
    DEFAULT_MAX_RESTARTS,
    InfeasibleDegreesError,
    MatchConstraints,
    MultiLayer,
    StubMatchingError,
    check_feasibility,
    match_stubs,
    round_half_away,
)
from population.items import Roster

logger = logging.getLogger(__name__)

MAX_DAILY_UNITS = 38
BREAK_LUNCH_MAX_MULTIPLICITY = 10
CLASS_MAX_SHARED = 7
CLASS_UNITS_PER_SHARED_CLASS = 4
DEFAULT_MAX_REDRAWS = 50

# Random-mixing partnerships last 40 or 50 minutes, 41 on average
RANDOM_MIXING_PARTNERS = 36
RANDOM_MIXING_DURATION_PMF = {4: 0.9, 5: 0.1}


def _valid_network(instance, attribute, matrix):
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("contact matrix must be square")
    if matrix.diagonal().any():
        raise ValueError("contact networks have no self-contacts")
    if matrix.nnz and (matrix.max() > MAX_DAILY_UNITS or matrix.min() < 0):
        raise ValueError(f"contact units must be within 0..{MAX_DAILY_UNITS}")
    if (matrix != matrix.T).nnz:
        raise ValueError("contact matrix must be symmetric")


@attr.s(frozen=True, auto_attribs=True, eq=False)
class ContactNetwork:
    matrix: sp.csr_matrix = attr.ib(converter=sp.csr_matrix, validator=_valid_network)
    day: Optional[int] = None
    # dyads whose summed units were cut back to MAX_DAILY_UNITS
    clamped: int = attr.ib(default=0, converter=int)

    @classmethod
    def empty(cls, n: int, day: Optional[int] = None) -> "ContactNetwork":
        return cls(matrix=sp.csr_matrix((n, n), dtype=np.int64), day=day)

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def total_units(self) -> int:
        return int(self.matrix.sum() // 2)

    @cached_property
    def partner_counts(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    @cached_property
    def unit_degrees(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel().astype(np.int64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ContactNetwork):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and (self.matrix != other.matrix).nnz == 0


def _embed(sub_matrix: sp.spmatrix, members: np.ndarray, n: int) -> sp.csr_matrix:
    coo = sp.triu(sub_matrix, k=1).tocoo()
    return symmetric_from_entries(n, members[coo.row], members[coo.col], coo.data)


def _induced_friendship(friendship: FriendshipNetwork, members: np.ndarray) -> FriendshipNetwork:
    return FriendshipNetwork.from_matrix(friendship.adjacency[members][:, members])


# ------------------------------------------------ Break and lunch ------------------------------------------------


def build_break_lunch_layer(
    friendship: FriendshipNetwork,
    degree_realization: DegreeRealization,
    pct_to_friends: float,
    rng: np.random.Generator,
    max_restarts: int = DEFAULT_MAX_RESTARTS,
) -> MultiLayer:
    """Wire break and lunch units with a share ``pct_to_friends`` on friendship dyads, at most 10 per dyad."""
    degrees = degree_realization.break_lunch_units
    if degrees.shape[0] != friendship.n:
        raise ValueError(f"degree realization covers {degrees.shape[0]} students, friendship {friendship.n}")
    if not degrees.any():
        return MultiLayer.empty(friendship.n)
    constraints = MatchConstraints.for_degrees(degrees, pct_to_friends, BREAK_LUNCH_MAX_MULTIPLICITY)
    return match_stubs(degrees, friendship, constraints, rng, max_restarts=max_restarts)


def sample_break_lunch_layer(
    friendship: FriendshipNetwork,
    params: DegreeParameters,
    rng: np.random.Generator,
    max_redraws: int = DEFAULT_MAX_REDRAWS,
) -> MultiLayer:
    """Draw degrees from ``params`` and wire them, redrawing degrees that cannot be matched."""
    n_friends = friendship.degrees
    last_error: Exception = InfeasibleDegreesError([])
    for redraw in range(max_redraws):
        realization = sample_degree_realization(params, n_friends, rng)
        try:
            return build_break_lunch_layer(friendship, realization, params.pct_to_friends, rng)
        except (InfeasibleDegreesError, StubMatchingError) as err:
            last_error = err
            logger.debug(f"Break/lunch degree draw {redraw + 1} rejected: {err}")
    raise last_error


# ------------------------------------------------ Classes ------------------------------------------------


def _class_friend_target(
    degrees: np.ndarray, friendship: FriendshipNetwork, p: float, m: int
) -> int:
    """round(p * sum(d) / 2) clamped to what the friend and non-friend dyads can hold."""
    units = int(degrees.sum()) // 2
    g = friendship.n
    nonfriend_pairs = g * (g - 1) // 2 - friendship.n_edges
    lower = max(0, units - m * nonfriend_pairs)
    upper = min(units, m * friendship.n_edges)
    return int(np.clip(round_half_away(p * units), lower, upper))


def _grade_layer(
    grade_friendship: FriendshipNetwork,
    class_model: ClassNeighborModel,
    p: float,
    rng: np.random.Generator,
    max_redraws: int,
) -> MultiLayer:
    g = grade_friendship.n
    cap = CLASS_MAX_SHARED * (g - 1)
    last_error: Exception = InfeasibleDegreesError([])
    for redraw in range(max_redraws):
        degrees = np.minimum(sample_class_neighbor_degrees(class_model, g, rng).sum(axis=1), cap)
        target = _class_friend_target(degrees, grade_friendship, p, CLASS_MAX_SHARED)
        violations = check_feasibility(degrees, grade_friendship, p, CLASS_MAX_SHARED, target=target)
        if violations:
            last_error = InfeasibleDegreesError(violations)
            logger.debug(f"Class degree draw {redraw + 1} rejected: {last_error}")
            continue
        constraints = MatchConstraints(friend_fraction=p, max_multiplicity=CLASS_MAX_SHARED, target_friend_units=target)
        try:
            return match_stubs(degrees, grade_friendship, constraints, rng)
        except StubMatchingError as err:
            last_error = err
            logger.debug(f"Class degree draw {redraw + 1} could not be wired: {err}")
    raise last_error


def build_class_layer(
    friendship: FriendshipNetwork,
    roster: Roster,
    class_model: ClassNeighborModel,
    rng: np.random.Generator,
    class_friend_fraction: float = 0.5,
    max_redraws: int = DEFAULT_MAX_REDRAWS,
) -> ContactNetwork:
    """Neighbours within each grade, at most 7 shared classes per dyad, 4 units per shared class."""
    if friendship.n != roster.n:
        raise ValueError(f"friendship network has {friendship.n} nodes but roster has {roster.n} students")
    neighbors = sp.csr_matrix((roster.n, roster.n), dtype=np.int64)
    for grade in np.unique(roster.grades):
        members = np.flatnonzero(roster.grades == grade)
        if members.size < 2:
            continue
        grade_friendship = _induced_friendship(friendship, members)
        layer = _grade_layer(grade_friendship, class_model, class_friend_fraction, rng, max_redraws)
        neighbors = neighbors + _embed(layer.matrix, members, roster.n)
    return ContactNetwork(matrix=CLASS_UNITS_PER_SHARED_CLASS * neighbors)


def compose_day(break_lunch: MultiLayer, class_layer: ContactNetwork, day: Optional[int] = None) -> ContactNetwork:
    if break_lunch.n != class_layer.n:
        raise ValueError(f"layer sizes differ: {break_lunch.n} vs {class_layer.n}")
    total = (break_lunch.matrix + class_layer.matrix).tocsr()
    over = total.data > MAX_DAILY_UNITS
    clamped = int(over.sum()) // 2
    if clamped:
        logger.warning(f"Clamped {clamped} dyads to {MAX_DAILY_UNITS} daily units")
        total.data[over] = MAX_DAILY_UNITS
    return ContactNetwork(matrix=total, day=day, clamped=clamped)


# ------------------------------------------------ Comparison models ------------------------------------------------


def friendship_only_network(
    friendship: FriendshipNetwork, target_total_units: int, rng: np.random.Generator
) -> ContactNetwork:
    """Spread the units evenly over friendship edges; a random subset of edges takes the remainder."""
    n_edges = friendship.n_edges
    if n_edges == 0:
        raise ValueError("friendship-only contacts need at least one friendship")
    if target_total_units < 0:
        raise ValueError(f"target_total_units must be >= 0, got {target_total_units}")
    base, remainder = divmod(int(target_total_units), n_edges)
    units = np.full(n_edges, base, dtype=np.int64)
    units[rng.choice(n_edges, size=remainder, replace=False)] += 1

    clamped = int((units > MAX_DAILY_UNITS).sum())
    if clamped:
        logger.warning(
            f"Friendship-only target of {target_total_units} units exceeds {MAX_DAILY_UNITS} per edge "
            f"on {clamped} edges; total is reduced"
        )
        units = np.minimum(units, MAX_DAILY_UNITS)

    keep = units > 0
    edges = friendship.edges[keep]
    matrix = symmetric_from_entries(friendship.n, edges[:, 0], edges[:, 1], units[keep])
    return ContactNetwork(matrix=matrix, clamped=clamped)


def random_mixing_network(
    n: int,
    rng: np.random.Generator,
    mean_partners: float = RANDOM_MIXING_PARTNERS,
    duration_pmf: Optional[dict[int, float]] = None,
    day: Optional[int] = None,
) -> ContactNetwork:
    """One day of random mixing.

    Each dyad is a partnership with probability mean_partners / (n - 1), so a
    student's partners are a uniform draw without replacement and their count
    is Binomial(n - 1, mean_partners / (n - 1)), close to Poisson(mean_partners).
    Each partnership gets a duration from ``duration_pmf`` (units).
    """
    if n <= mean_partners:
        raise ValueError(f"random mixing needs more than {mean_partners} students, got {n}")
    duration_pmf = duration_pmf or RANDOM_MIXING_DURATION_PMF
    durations = np.array(list(duration_pmf.keys()), dtype=np.int64)
    weights = np.array(list(duration_pmf.values()), dtype=float)
    if np.any(durations < 1) or np.any(durations > MAX_DAILY_UNITS) or not np.isclose(weights.sum(), 1.0):
        raise ValueError(f"invalid duration distribution: {duration_pmf}")

    iu, ju = np.triu_indices(n, k=1)
    met = rng.random(iu.size) < mean_partners / (n - 1)
    units = rng.choice(durations, size=int(met.sum()), p=weights)
    matrix = symmetric_from_entries(n, iu[met], ju[met], units)
    return ContactNetwork(matrix=matrix, day=day)


# ------------------------------------------------ Summaries and files ------------------------------------------------


@attr.s(frozen=True, auto_attribs=True)
class ContactSummary:
    n: int
    total_units: int
    mean_partners: float
    mean_duration_minutes: float
    mean_daily_units: float
    max_units: int
    clamped: int
    friend_fraction: Optional[float] = None


def contact_summary(network: ContactNetwork, friendship: Optional[FriendshipNetwork] = None) -> ContactSummary:
    partnerships = network.matrix.nnz // 2
    total = network.total_units
    friend_fraction = None
    if friendship is not None and total:
        friend_units = network.matrix.multiply(friendship.adjacency).sum() / 2
        friend_fraction = float(friend_units / total)
    return ContactSummary(
        n=network.n,
        total_units=total,
        mean_partners=float(network.partner_counts.mean()),
        mean_duration_minutes=float(10.0 * total / partnerships) if partnerships else 0.0,
        mean_daily_units=float(network.unit_degrees.mean()),
        max_units=int(network.matrix.max()) if network.matrix.nnz else 0,
        clamped=network.clamped,
        friend_fraction=friend_fraction,
    )


def save_contact_network(network: ContactNetwork, path: Path) -> None:
    header = f"{network.day if network.day is not None else 0} {network.n} {network.total_units}"
    write_edge_list(network.matrix, path, header=header)


def load_contact_network(path: Path) -> ContactNetwork:
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
    if len(header) != 3:
        raise ValueError(f"{path}: expected a `day n total_units` header line")
    day, n, total_units = (int(v) for v in header)
    matrix, _ = read_edge_list(path, n, has_header=True)
    network = ContactNetwork(matrix=matrix, day=day)
    if network.total_units != total_units:
        raise ValueError(f"{path}: header says {total_units} units, edges sum to {network.total_units}")
    return network
