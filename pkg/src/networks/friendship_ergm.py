"""Dyad-independent friendship model.

Each unordered pair of students is a friendship with probability
``expit(logit)``, where the logit is the ``edges`` term plus a sociality
term for each endpoint and a selective-mixing term for every attribute the
two students share. Reference levels (grade 7, white, female) carry no
sociality term. A mixing term of ``-inf`` rules out matched pairs entirely.

Fitting uses logistic regression on the change statistics. Dyads are
grouped by the unordered pair of student types (grade, race, sex, school),
which makes the grouped binomial likelihood exact.
"""

import json
import logging
import math
from functools import cached_property
from pathlib import Path
from typing import Optional

import attr
import numpy as np
import scipy.sparse as sp
import statsmodels.api as sm
from marshmallow import ValidationError, fields
from scipy.special import expit

from degrees.degree_model import ConvergenceError
from networks.edge_list import read_edge_list, symmetric_from_entries, write_edge_list
from population.items import GRADES, OrderedSchema, Race, Roster, Student

logger = logging.getLogger(__name__)

SOCIALITY_TERMS = (
    [f"grade{g}" for g in GRADES[1:]]
    + [f"race.{r.value}" for r in Race if r is not Race.white]
    + ["male"]
)
MIXING_TERMS = (
    ["school", "sex.male", "sex.female"]
    + [f"grade{g}" for g in GRADES]
    + [f"race.{r.value}" for r in Race]
)


class ErgmSeparationError(ValueError):
    def __init__(self, term: str, message: str = ""):
        super().__init__(message or f"perfect separation on term {term}")
        self.term = term


def _check_sociality(instance, attribute, value):
    unknown = set(value) - set(SOCIALITY_TERMS)
    if unknown:
        raise ValueError(f"unknown sociality terms (reference levels carry none): {sorted(unknown)}")
    infinite = [term for term, coef in value.items() if not math.isfinite(coef)]
    if infinite:
        raise ValueError(f"sociality terms must be finite: {infinite}")


def _check_mixing(instance, attribute, value):
    unknown = set(value) - set(MIXING_TERMS)
    if unknown:
        raise ValueError(f"unknown mixing terms: {sorted(unknown)}")
    bad = [term for term, coef in value.items() if math.isnan(coef) or coef == math.inf]
    if bad:
        raise ValueError(f"mixing terms must be finite or -inf: {bad}")


def _float_dict(value: dict) -> dict[str, float]:
    return {str(k): float(v) for k, v in value.items()}


@attr.s(frozen=True, auto_attribs=True)
class ErgmCoefficients:
    edges: float = attr.ib(converter=float)
    sociality: dict[str, float] = attr.ib(factory=dict, converter=_float_dict, validator=_check_sociality)
    mixing: dict[str, float] = attr.ib(factory=dict, converter=_float_dict, validator=_check_mixing)
    # None where the term was not estimable (dropped or -inf)
    standard_errors: dict[str, Optional[float]] = attr.ib(factory=dict)

    @edges.validator
    def _edges_finite(self, attribute, value):
        if not math.isfinite(value):
            raise ValueError(f"edges must be finite, got {value}")

    def term(self, name: str) -> float:
        """Coefficient by table row name, e.g. ``sociality.grade8`` or ``mixing.race.missing``."""
        if name == "edges":
            return self.edges
        kind, _, level = name.partition(".")
        table = {"sociality": self.sociality, "mixing": self.mixing}.get(kind)
        if table is None:
            raise KeyError(name)
        return table.get(level, 0.0)

    def sociality_vector(self) -> np.ndarray:
        return np.array([self.sociality.get(t, 0.0) for t in SOCIALITY_TERMS])

    def mixing_vector(self) -> np.ndarray:
        return np.array([self.mixing.get(t, 0.0) for t in MIXING_TERMS])


def _normalized_edges(value) -> np.ndarray:
    edges = np.asarray(value, dtype=np.int64).reshape(-1, 2)
    edges = np.sort(edges, axis=1)
    return np.unique(edges, axis=0)


@attr.s(frozen=True, auto_attribs=True, eq=False)
class FriendshipNetwork:
    """Simple undirected graph; ``edges`` rows are (i, j) with i < j, sorted."""

    n: int = attr.ib(converter=int)
    edges: np.ndarray = attr.ib(factory=lambda: np.empty((0, 2), dtype=np.int64), converter=_normalized_edges)

    def __attrs_post_init__(self):
        if self.edges.size:
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ValueError("friendship networks have no self-edges")
            if self.edges.min() < 0 or self.edges.max() >= self.n:
                raise ValueError(f"friendship endpoints must be within 0..{self.n - 1}")

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        return symmetric_from_entries(self.n, self.edges[:, 0], self.edges[:, 1], np.ones(self.n_edges))

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        adj = self.adjacency
        return adj.indices[adj.indptr[i] : adj.indptr[i + 1]]

    @cached_property
    def neighbor_sets(self) -> list[frozenset]:
        return [frozenset(self.neighbors(i).tolist()) for i in range(self.n)]

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.neighbor_sets[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FriendshipNetwork):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    @classmethod
    def from_matrix(cls, matrix: sp.spmatrix) -> "FriendshipNetwork":
        upper = sp.triu(matrix, k=1).tocoo()
        return cls(n=matrix.shape[0], edges=np.column_stack([upper.row, upper.col]))


# ------------------------------------------------ Change statistics ------------------------------------------------


@attr.s(frozen=True, auto_attribs=True)
class _Covariates:
    grade: np.ndarray
    race: np.ndarray
    male: np.ndarray
    school: np.ndarray

    @classmethod
    def of_roster(cls, roster: Roster) -> "_Covariates":
        return cls(grade=roster.grades, race=roster.races, male=roster.is_male, school=roster.schools)

    @classmethod
    def of_students(cls, *students: Student) -> "_Covariates":
        return cls(
            grade=np.array([s.grade for s in students]),
            race=np.array([s.race.value for s in students], dtype=object),
            male=np.array([s.sex.value == "male" for s in students]),
            school=np.array([s.school.value for s in students], dtype=object),
        )

    def take(self, idx: np.ndarray) -> "_Covariates":
        return _Covariates(grade=self.grade[idx], race=self.race[idx], male=self.male[idx], school=self.school[idx])


def _sociality_statistics(a: _Covariates, b: _Covariates) -> np.ndarray:
    """Endpoint counts (0, 1 or 2) per sociality term; columns follow SOCIALITY_TERMS."""
    columns = []
    for term in SOCIALITY_TERMS:
        if term.startswith("grade"):
            g = int(term[len("grade") :])
            columns.append((a.grade == g).astype(int) + (b.grade == g))
        elif term.startswith("race."):
            r = term[len("race.") :]
            columns.append((a.race == r).astype(int) + (b.race == r))
        else:
            columns.append(a.male.astype(int) + b.male)
    return np.column_stack(columns).astype(float)


def _mixing_statistics(a: _Covariates, b: _Covariates) -> np.ndarray:
    """Match indicators per mixing term; columns follow MIXING_TERMS."""
    columns = []
    for term in MIXING_TERMS:
        if term == "school":
            columns.append(a.school == b.school)
        elif term == "sex.male":
            columns.append(a.male & b.male)
        elif term == "sex.female":
            columns.append(~a.male & ~b.male)
        elif term.startswith("grade"):
            g = int(term[len("grade") :])
            columns.append((a.grade == g) & (b.grade == g))
        else:
            r = term[len("race.") :]
            columns.append((a.race == r) & (b.race == r))
    return np.column_stack(columns).astype(bool)


def _logits(a: _Covariates, b: _Covariates, coef: ErgmCoefficients) -> np.ndarray:
    logit = coef.edges + _sociality_statistics(a, b) @ coef.sociality_vector()
    mixing = _mixing_statistics(a, b)
    for col, value in enumerate(coef.mixing_vector()):
        if value != 0.0:
            # only matched dyads, so -inf never meets a zero statistic
            logit = np.where(mixing[:, col], logit + value, logit)
    return logit


def dyad_logit(a: Student, b: Student, coef: ErgmCoefficients) -> float:
    return float(_logits(_Covariates.of_students(a), _Covariates.of_students(b), coef)[0])


# ------------------------------------------------ Student types ------------------------------------------------


@attr.s(frozen=True, auto_attribs=True)
class _TypePairs:
    """Dyads grouped by the unordered pair of student types."""

    type_of: np.ndarray
    first: np.ndarray
    second: np.ndarray
    dyads: np.ndarray
    covariates: _Covariates

    @classmethod
    def of_roster(cls, roster: Roster) -> "_TypePairs":
        cov = _Covariates.of_roster(roster)
        keys = np.array(
            [f"{g}|{r}|{int(m)}|{s}" for g, r, m, s in zip(cov.grade, cov.race, cov.male, cov.school)]
        )
        _, representative, type_of = np.unique(keys, return_index=True, return_inverse=True)
        type_of = type_of.ravel()
        counts = np.bincount(type_of)
        first, second = np.triu_indices(counts.size)
        dyads = np.where(
            first == second, counts[first] * (counts[first] - 1) // 2, counts[first] * counts[second]
        )
        return cls(
            type_of=type_of,
            first=first,
            second=second,
            dyads=dyads.astype(np.int64),
            covariates=cov.take(representative),
        )

    @property
    def n_types(self) -> int:
        return int(self.covariates.grade.size)

    def edge_counts(self, network: FriendshipNetwork) -> np.ndarray:
        t = self.type_of[network.edges[:, 0]]
        u = self.type_of[network.edges[:, 1]]
        lo, hi = np.minimum(t, u), np.maximum(t, u)
        table = np.zeros((self.n_types, self.n_types), dtype=np.int64)
        np.add.at(table, (lo, hi), 1)
        return table[self.first, self.second]

    def statistics(self) -> tuple[np.ndarray, np.ndarray]:
        a = self.covariates.take(self.first)
        b = self.covariates.take(self.second)
        return _sociality_statistics(a, b), _mixing_statistics(a, b)

    def logit_table(self, coef: ErgmCoefficients) -> np.ndarray:
        a = self.covariates.take(self.first)
        b = self.covariates.take(self.second)
        table = np.full((self.n_types, self.n_types), -np.inf)
        logits = _logits(a, b, coef)
        table[self.first, self.second] = logits
        table[self.second, self.first] = logits
        return table


def dyad_probabilities(roster: Roster, coef: ErgmCoefficients) -> np.ndarray:
    """Friendship probability for every dyad in ``np.triu_indices(n, 1)`` order."""
    pairs = _TypePairs.of_roster(roster)
    iu, ju = np.triu_indices(roster.n, k=1)
    return expit(pairs.logit_table(coef)[pairs.type_of[iu], pairs.type_of[ju]])


def simulate_friendship(roster: Roster, coef: ErgmCoefficients, rng: np.random.Generator) -> FriendshipNetwork:
    """Draw every dyad independently."""
    prob = dyad_probabilities(roster, coef)
    iu, ju = np.triu_indices(roster.n, k=1)
    hit = rng.random(prob.size) < prob
    network = FriendshipNetwork(n=roster.n, edges=np.column_stack([iu[hit], ju[hit]]))
    logger.debug(f"Simulated friendship network: {network.n_edges} edges on {roster.n} students")
    return network


# ------------------------------------------------ Estimation ------------------------------------------------


def _independent_columns(design: np.ndarray) -> list[int]:
    """Greedy left-to-right selection of linearly independent columns."""
    kept: list[int] = []
    rank = 0
    for col in range(design.shape[1]):
        trial = kept + [col]
        trial_rank = np.linalg.matrix_rank(design[:, trial])
        if trial_rank > rank:
            kept, rank = trial, trial_rank
    return kept


def fit_ergm(network: FriendshipNetwork, roster: Roster) -> ErgmCoefficients:
    if network.n != roster.n:
        raise ValueError(f"network has {network.n} nodes but roster has {roster.n} students")
    total_dyads = roster.n * (roster.n - 1) // 2
    if network.n_edges == 0 or network.n_edges == total_dyads:
        raise ValueError("fitting needs at least one edge and one non-edge")

    pairs = _TypePairs.of_roster(roster)
    edges = pairs.edge_counts(network)
    dyads = pairs.dyads
    sociality_stats, mixing_stats = pairs.statistics()

    keep_rows = dyads > 0
    coefficients: dict[str, float] = {}
    standard_errors: dict[str, Optional[float]] = {}
    candidate_terms: list[tuple[str, np.ndarray]] = []

    for col, level in enumerate(MIXING_TERMS):
        term = f"mixing.{level}"
        matched = mixing_stats[:, col] & keep_rows
        matched_dyads = int(dyads[matched].sum())
        matched_edges = int(edges[matched].sum())
        if matched_dyads == 0:
            logger.warning(f"No dyads match on {term}; term skipped")
            coefficients[term], standard_errors[term] = 0.0, None
        elif matched_edges == 0:
            logger.info(f"No edges match on {term}; coefficient set to -inf")
            coefficients[term], standard_errors[term] = -math.inf, None
            keep_rows &= ~mixing_stats[:, col]
        elif matched_edges == matched_dyads:
            raise ErgmSeparationError(term)
        else:
            candidate_terms.append((term, mixing_stats[:, col].astype(float)))

    for col, level in enumerate(SOCIALITY_TERMS):
        term = f"sociality.{level}"
        stat = sociality_stats[:, col]
        exposure = float((stat * dyads)[keep_rows].sum())
        touched_edges = float((stat * edges)[keep_rows].sum())
        if exposure == 0:
            logger.warning(f"No students at level {term}; term skipped")
            coefficients[term], standard_errors[term] = 0.0, None
        elif touched_edges == 0:
            raise ErgmSeparationError(term)
        else:
            candidate_terms.append((term, stat))

    # Order matters for the collinearity pass: edges first, then sociality, then mixing
    candidate_terms.sort(key=lambda item: not item[0].startswith("sociality"))
    names = ["edges"] + [name for name, _ in candidate_terms]
    design = np.column_stack([np.ones(dyads.size)] + [stat for _, stat in candidate_terms])[keep_rows]
    successes = edges[keep_rows]
    failures = dyads[keep_rows] - successes
    nonempty = (successes + failures) > 0
    design, successes, failures = design[nonempty], successes[nonempty], failures[nonempty]

    independent = _independent_columns(design)
    for col, name in enumerate(names):
        if col not in independent:
            logger.warning(f"Term {name} is collinear with earlier terms on this roster; term skipped")
            coefficients[name], standard_errors[name] = 0.0, None

    glm = sm.GLM(
        np.column_stack([successes, failures]).astype(float),
        design[:, independent],
        family=sm.families.Binomial(),
    )
    res = glm.fit(maxiter=100, tol=1e-10)
    if not res.converged:
        raise ConvergenceError("friendship model fit did not converge", float("nan"), int(res.fit_history["iteration"]))

    for col, value, se in zip(independent, res.params, res.bse):
        coefficients[names[col]] = float(value)
        standard_errors[names[col]] = float(se)

    fitted = ErgmCoefficients(
        edges=coefficients["edges"],
        sociality={t: coefficients[f"sociality.{t}"] for t in SOCIALITY_TERMS},
        mixing={t: coefficients[f"mixing.{t}"] for t in MIXING_TERMS},
        standard_errors=standard_errors,
    )
    logger.info(f"Fitted friendship model on {network.n_edges} edges, {len(independent)} estimated terms")
    return fitted


# ------------------------------------------------ Files ------------------------------------------------

ALL_TERMS = ["edges"] + [f"sociality.{t}" for t in SOCIALITY_TERMS] + [f"mixing.{t}" for t in MIXING_TERMS]


class ExtendedFloat(fields.Float):
    """Float that writes infinities as the strings "Inf" / "-Inf"."""

    def __init__(self, **kwargs):
        super().__init__(allow_nan=True, **kwargs)

    def _serialize(self, value, attr, obj, **kwargs):
        if value is None:
            return None
        if math.isinf(value):
            return "Inf" if value > 0 else "-Inf"
        return float(value)

    def _deserialize(self, value, attr, data, **kwargs):
        if isinstance(value, str) and value.strip() in ("Inf", "-Inf"):
            return math.inf if value.strip() == "Inf" else -math.inf
        return super()._deserialize(value, attr, data, **kwargs)


def _field_name(term: str) -> str:
    return term.replace(".", "__")


ErgmCoefficientsSchema = OrderedSchema.from_dict(
    {
        "edges": ExtendedFloat(required=True),
        **{_field_name(t): ExtendedFloat(data_key=t, load_default=0.0) for t in ALL_TERMS[1:]},
        "standard_errors": fields.Dict(
            keys=fields.Str(), values=ExtendedFloat(allow_none=True), load_default=dict
        ),
    },
    name="ErgmCoefficientsSchema",
)


def ergm_to_dict(coef: ErgmCoefficients) -> dict:
    flat = {_field_name(t): coef.term(t) for t in ALL_TERMS}
    flat["standard_errors"] = dict(coef.standard_errors)
    return ErgmCoefficientsSchema().dump(flat)


def ergm_from_dict(data: dict) -> ErgmCoefficients:
    try:
        flat = ErgmCoefficientsSchema().load(data)
    except ValidationError as err:
        raise ValueError(f"invalid friendship model coefficients: {err.messages}") from err
    return ErgmCoefficients(
        edges=flat["edges"],
        sociality={t: flat[_field_name(f"sociality.{t}")] for t in SOCIALITY_TERMS},
        mixing={t: flat[_field_name(f"mixing.{t}")] for t in MIXING_TERMS},
        standard_errors=flat["standard_errors"],
    )


def save_ergm_coefficients(coef: ErgmCoefficients, path: Path) -> None:
    Path(path).write_text(json.dumps(ergm_to_dict(coef), indent=2) + "\n", encoding="utf-8")
    logger.info(f"Saved friendship model coefficients to {path}")


def load_ergm_coefficients(path: Path) -> ErgmCoefficients:
    coef = ergm_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    logger.info(f"Loaded friendship model coefficients from {path}")
    return coef


def save_friendship(network: FriendshipNetwork, path: Path) -> None:
    write_edge_list(network.adjacency, path)


def load_friendship(path: Path, n: int) -> FriendshipNetwork:
    """Read an observed friendship edge list; repeated or reciprocal nominations collapse to one edge."""
    matrix, _ = read_edge_list(path, n)
    return FriendshipNetwork.from_matrix(matrix)
