"""Multigraphs with a prescribed degree sequence, an exact number of units on
friendship dyads and a cap on the multiplicity of any dyad.

Matching runs in two phases. Phase one draws a stub uniformly, picks one of
its owner's friends with probability proportional to the friend's residual
degree, and repeats until T friend units are wired. Phase two wires every
remaining stub to a non-friend by the same rule. A dead end restarts the
whole layer.
"""

import logging
from enum import Enum
from pathlib import Path
from typing import Optional

import attr
import numpy as np
import scipy.sparse as sp

from networks.edge_list import read_edge_list, symmetric_from_entries, upper_entries, write_edge_list
from networks.friendship_ergm import FriendshipNetwork

logger = logging.getLogger(__name__)

DEFAULT_MAX_RESTARTS = 100
# Rejection attempts before falling back to an exact scan of eligible nodes
_REJECTION_ATTEMPTS = 32


class Violation(str, Enum):
    odd_degree_sum = "odd_degree_sum"
    insufficient_friendships = "insufficient_friendships"
    degree_exceeds_capacity = "degree_exceeds_capacity"


class InfeasibleDegreesError(ValueError):
    def __init__(self, violations: list[Violation]):
        super().__init__(f"infeasible degree sequence: {', '.join(v.value for v in violations)}")
        self.violations = violations


class StubMatchingError(RuntimeError):
    def __init__(self, restarts: int):
        super().__init__(f"stub matching hit a dead end on every attempt ({restarts} restarts)")
        self.restarts = restarts


def round_half_away(value: float) -> int:
    return int(np.sign(value) * np.floor(abs(value) + 0.5))


def _unit_interval(instance, attribute, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{attribute.name} must be within [0, 1], got {value}")


def _positive(instance, attribute, value):
    if value < 1:
        raise ValueError(f"{attribute.name} must be >= 1, got {value}")


def _non_negative(instance, attribute, value):
    if value < 0:
        raise ValueError(f"{attribute.name} must be >= 0, got {value}")


@attr.s(frozen=True, auto_attribs=True)
class MatchConstraints:
    friend_fraction: float = attr.ib(converter=float, validator=_unit_interval)
    max_multiplicity: int = attr.ib(converter=int, validator=_positive)
    target_friend_units: int = attr.ib(converter=int, validator=_non_negative)

    @classmethod
    def for_degrees(cls, degrees, friend_fraction: float, max_multiplicity: int) -> "MatchConstraints":
        total = int(np.sum(degrees))
        return cls(
            friend_fraction=friend_fraction,
            max_multiplicity=max_multiplicity,
            target_friend_units=round_half_away(friend_fraction * total / 2),
        )


def _valid_layer(instance, attribute, matrix):
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("layer matrix must be square")
    if matrix.diagonal().any():
        raise ValueError("layers have no self-edges")
    if (matrix != matrix.T).nnz:
        raise ValueError("layer matrix must be symmetric")


@attr.s(frozen=True, auto_attribs=True, eq=False)
class MultiLayer:
    matrix: sp.csr_matrix = attr.ib(converter=sp.csr_matrix, validator=_valid_layer)

    @classmethod
    def empty(cls, n: int) -> "MultiLayer":
        return cls(matrix=sp.csr_matrix((n, n), dtype=np.int64))

    @classmethod
    def from_entries(cls, n: int, entries: dict[tuple[int, int], int]) -> "MultiLayer":
        if not entries:
            return cls.empty(n)
        pairs = np.array(list(entries.keys()), dtype=np.int64)
        lo, hi = pairs.min(axis=1), pairs.max(axis=1)
        return cls(matrix=symmetric_from_entries(n, lo, hi, list(entries.values())))

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def entries(self) -> dict[tuple[int, int], int]:
        df = upper_entries(self.matrix)
        return {(int(i), int(j)): int(m) for i, j, m in df.itertuples(index=False)}

    @property
    def unit_degrees(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel().astype(np.int64)

    @property
    def total_units(self) -> int:
        return int(self.matrix.sum() // 2)

    @property
    def max_multiplicity(self) -> int:
        return int(self.matrix.max()) if self.matrix.nnz else 0

    def friend_units(self, friendships: FriendshipNetwork) -> int:
        return int(self.matrix.multiply(friendships.adjacency).sum() // 2)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiLayer):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and (self.matrix != other.matrix).nnz == 0


def check_feasibility(
    degrees, friendships: FriendshipNetwork, p: float, m: int, target: Optional[int] = None
) -> list[Violation]:
    """Violated preconditions; an explicit ``target`` replaces round(p * sum(d) / 2)."""
    degrees = np.asarray(degrees, dtype=np.int64)
    if degrees.shape != (friendships.n,):
        raise ValueError(f"expected {friendships.n} degrees, got {degrees.shape[0]}")
    if np.any(degrees < 0):
        raise ValueError("degrees must be nonnegative")

    violations = []
    total = int(degrees.sum())
    if total % 2:
        violations.append(Violation.odd_degree_sum)
    if target is None:
        target = round_half_away(p * total / 2)
    if m * friendships.n_edges < target:
        violations.append(Violation.insufficient_friendships)
    if total and degrees.max() > np.minimum(m, degrees).sum():
        violations.append(Violation.degree_exceeds_capacity)
    return violations


class _StubPool:
    """Remaining stubs, with O(1) uniform draws and removals."""

    def __init__(self, degrees: np.ndarray):
        self.owners = np.repeat(np.arange(degrees.size), degrees).tolist()
        self.size = len(self.owners)
        self.slots: list[list[int]] = [[] for _ in range(degrees.size)]
        for pos, owner in enumerate(self.owners):
            self.slots[owner].append(pos)

    def draw(self, rng: np.random.Generator) -> int:
        return self.owners[int(rng.integers(self.size))]

    def remove(self, node: int) -> None:
        pos = self.slots[node].pop()
        last = self.size - 1
        if pos != last:
            moved = self.owners[last]
            self.owners[pos] = moved
            moved_slots = self.slots[moved]
            moved_slots[moved_slots.index(last)] = pos
        self.owners.pop()
        self.size -= 1


class _Matching:
    """State of one matching attempt."""

    def __init__(self, degrees: np.ndarray, friendships: FriendshipNetwork, m: int):
        self.residual = degrees.copy()
        self.pool = _StubPool(degrees)
        self.friendships = friendships
        self.m = m
        self.multiplicity: dict[tuple[int, int], int] = {}

    def _mult(self, i: int, j: int) -> int:
        return self.multiplicity.get((i, j) if i < j else (j, i), 0)

    def wire(self, i: int, j: int) -> None:
        key = (i, j) if i < j else (j, i)
        self.multiplicity[key] = self.multiplicity.get(key, 0) + 1
        self.pool.remove(i)
        self.pool.remove(j)
        self.residual[i] -= 1
        self.residual[j] -= 1

    def _proportional(self, candidates: np.ndarray, rng: np.random.Generator) -> int:
        weights = self.residual[candidates].astype(float)
        cumulative = np.cumsum(weights)
        return int(candidates[np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right")])

    def eligible_friends(self, i: int) -> np.ndarray:
        friends = self.friendships.neighbors(i)
        if friends.size == 0:
            return friends
        open_friends = friends[self.residual[friends] > 0]
        return np.array([j for j in open_friends if self._mult(i, j) < self.m], dtype=np.int64)

    def friend_partner(self, i: int, rng: np.random.Generator) -> Optional[int]:
        eligible = self.eligible_friends(i)
        if eligible.size == 0:
            return None
        return self._proportional(eligible, rng)

    def _nonfriend_ok(self, i: int, j: int) -> bool:
        return j != i and self._mult(i, j) < self.m and not self.friendships.has_edge(i, j)

    def nonfriend_partner(self, i: int, rng: np.random.Generator) -> Optional[int]:
        # i's own stub is still in the pool, so rejection draws exclude it explicitly
        for _ in range(_REJECTION_ATTEMPTS):
            j = self.pool.draw(rng)
            if self._nonfriend_ok(i, j):
                return j
        candidates = np.flatnonzero(self.residual > 0)
        candidates = candidates[candidates != i]
        friends = self.friendships.neighbors(i)
        if friends.size:
            candidates = candidates[~np.isin(candidates, friends)]
        candidates = np.array([j for j in candidates if self._mult(i, j) < self.m], dtype=np.int64)
        if candidates.size == 0:
            return None
        return self._proportional(candidates, rng)


def _attempt(
    degrees: np.ndarray, friendships: FriendshipNetwork, constraints: MatchConstraints, rng: np.random.Generator
) -> Optional[dict[tuple[int, int], int]]:
    state = _Matching(degrees, friendships, constraints.max_multiplicity)
    exhausted = np.zeros(degrees.size, dtype=bool)
    exhausted_units = 0

    placed = 0
    while placed < constraints.target_friend_units:
        if state.pool.size == exhausted_units:
            return None
        i = None
        for _ in range(_REJECTION_ATTEMPTS):
            owner = state.pool.draw(rng)
            if not exhausted[owner]:
                i = owner
                break
        if i is None:
            open_nodes = np.flatnonzero((state.residual > 0) & ~exhausted)
            i = state._proportional(open_nodes, rng)
        j = state.friend_partner(i, rng)
        if j is None:
            # Eligibility only shrinks, so this owner can never place another friend unit
            exhausted[i] = True
            exhausted_units += int(state.residual[i])
            continue
        state.wire(i, j)
        placed += 1

    while state.pool.size:
        i = state.pool.draw(rng)
        j = state.nonfriend_partner(i, rng)
        if j is None:
            return None
        state.wire(i, j)
    return state.multiplicity


def match_stubs(
    degrees,
    friendships: FriendshipNetwork,
    constraints: MatchConstraints,
    rng: np.random.Generator,
    max_restarts: int = DEFAULT_MAX_RESTARTS,
) -> MultiLayer:
    degrees = np.asarray(degrees, dtype=np.int64)
    violations = check_feasibility(
        degrees,
        friendships,
        constraints.friend_fraction,
        constraints.max_multiplicity,
        target=constraints.target_friend_units,
    )
    if violations:
        raise InfeasibleDegreesError(violations)
    if constraints.target_friend_units > degrees.sum() // 2:
        raise ValueError(
            f"target of {constraints.target_friend_units} friend units exceeds the {degrees.sum() // 2} units available"
        )

    for restart in range(max_restarts + 1):
        multiplicity = _attempt(degrees, friendships, constraints, rng)
        if multiplicity is not None:
            if restart:
                logger.debug(f"Stub matching succeeded after {restart} restarts")
            return MultiLayer.from_entries(friendships.n, multiplicity)
        logger.debug(f"Stub matching dead end, restart {restart + 1}")
    raise StubMatchingError(max_restarts)


def multiplicity_histogram(layer: MultiLayer, max_multiplicity: Optional[int] = None) -> dict[int, int]:
    """Dyad counts by multiplicity; with ``max_multiplicity`` every level 1..m is present."""
    values = sp.triu(layer.matrix, k=1).data
    values = values[values > 0]
    counts = np.bincount(values.astype(np.int64)) if values.size else np.zeros(1, dtype=np.int64)
    if max_multiplicity is None:
        return {int(k): int(counts[k]) for k in range(1, counts.size) if counts[k]}
    return {k: int(counts[k]) if k < counts.size else 0 for k in range(1, max_multiplicity + 1)}


def save_layer(layer: MultiLayer, path: Path) -> None:
    write_edge_list(layer.matrix, path)


def load_layer(path: Path, n: int) -> MultiLayer:
    matrix, _ = read_edge_list(path, n)
    return MultiLayer(matrix=matrix)
