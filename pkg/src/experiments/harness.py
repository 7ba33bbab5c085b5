"""Experiment orchestration over scenario grids.

A scenario fixes a season-plan variant and an intervention and sweeps the
mean per-unit transmission probability p-bar. Outbreak replicates are
spread evenly over survey bootstrap replicates; each bootstrap replicate
refits the degree models and builds its own season plan, which is then
shared by every grid point.
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Optional

import attr
import numpy as np
from marshmallow import ValidationError, fields, post_load, validate
from marshmallow_enum import EnumField

from degrees.degree_model import ConvergenceError, DegreeParameters
from epidemics.interventions import InterventionConfig, InterventionKind
from epidemics.natural_history import NaturalHistoryParams, ViralLoadCurve
from epidemics.outbreak import EPIDEMIC_THRESHOLD, run_outbreak
from experiments.results import ScenarioDelta, ScenarioResult, compare_scenarios, summarize_grid_point
from networks.friendship_ergm import ErgmCoefficients, FriendshipNetwork, load_friendship, simulate_friendship
from networks.season_plan import DEFAULT_SEASON_LENGTH, Variant, make_season_plan
from networks.stub_matcher import InfeasibleDegreesError, StubMatchingError
from population.items import OrderedSchema, Roster, SurveySample
from random_streams import spawn_rng

logger = logging.getLogger(__name__)

DEFAULT_INNER_RESAMPLES = 50

# Stream key roots under the master seed
FRIENDSHIP_KEY = 0
PLAN_KEY = 1
OUTBREAK_KEY = 2
RESAMPLE_KEY = 3

NETWORK_FAILURES = (InfeasibleDegreesError, StubMatchingError, ConvergenceError)


class FriendshipSource(str, Enum):
    simulated = "simulated"
    empirical = "empirical"


def _grid(value) -> tuple[float, ...]:
    return tuple(float(v) for v in value)


@attr.s(frozen=True, auto_attribs=True)
class ScenarioSpec:
    name: str = attr.ib(converter=str)
    variant: Variant = attr.ib(converter=Variant)
    intervention: InterventionConfig = attr.ib(factory=InterventionConfig)
    p_bar_grid: tuple[float, ...] = attr.ib(factory=tuple, converter=_grid)
    replicates: int = attr.ib(default=1000, converter=int)
    bootstrap_replicates: int = attr.ib(default=20, converter=int)
    inner_resamples: int = attr.ib(default=DEFAULT_INNER_RESAMPLES, converter=int)
    season_length: int = attr.ib(default=DEFAULT_SEASON_LENGTH, converter=int)
    seed: int = attr.ib(default=20111, converter=int)
    friendship: FriendshipSource = attr.ib(default=FriendshipSource.simulated, converter=FriendshipSource)
    friendship_path: Optional[str] = None
    n_index_cases: int = attr.ib(default=1, converter=int)
    baseline: Optional[str] = None

    @p_bar_grid.validator
    def _open_unit_interval(self, attribute, value):
        bad = [p for p in value if not 0.0 < p < 1.0]
        if bad:
            raise ValueError(f"p_bar grid values must be within (0, 1), got {bad}")

    @replicates.validator
    def _at_least_one(self, attribute, value):
        if value < 1:
            raise ValueError(f"replicates must be >= 1, got {value}")

    @bootstrap_replicates.validator
    def _bootstrap_at_least_one(self, attribute, value):
        if value < 1:
            raise ValueError(f"bootstrap_replicates must be >= 1, got {value}")
        if value > self.replicates:
            raise ValueError(f"bootstrap_replicates ({value}) cannot exceed replicates ({self.replicates})")

    @inner_resamples.validator
    def _inner_at_least_one(self, attribute, value):
        if value < 1:
            raise ValueError(f"inner_resamples must be >= 1, got {value}")

    @season_length.validator
    def _season_at_least_one(self, attribute, value):
        if value < 1:
            raise ValueError(f"season_length must be >= 1, got {value}")

    def __attrs_post_init__(self):
        if self.friendship is FriendshipSource.empirical and not self.friendship_path:
            raise ValueError(f"scenario {self.name}: empirical friendship needs friendship_path")

    def allocation(self) -> list[int]:
        """Outbreak replicates per bootstrap replicate; earlier replicates take the remainder."""
        base, extra = divmod(self.replicates, self.bootstrap_replicates)
        return [base + (1 if b < extra else 0) for b in range(self.bootstrap_replicates)]


@attr.s(frozen=True, auto_attribs=True)
class ExperimentInputs:
    """Immutable inputs shared by every worker."""

    roster: Roster
    curves: list[ViralLoadCurve]
    survey: Optional[SurveySample] = None
    degree_params: Optional[DegreeParameters] = None
    coefficients: Optional[ErgmCoefficients] = None
    friendship: Optional[FriendshipNetwork] = None
    natural_history: NaturalHistoryParams = attr.ib(factory=NaturalHistoryParams)


# ------------------------------------------------ Scenario files ------------------------------------------------


class InterventionConfigSchema(OrderedSchema):
    kind = EnumField(InterventionKind, by_value=True, load_default=InterventionKind.none)
    ave_s = fields.Float(load_default=0.63)
    ave_i = fields.Float(load_default=0.15)
    ave_p = fields.Float(load_default=0.56)
    treatment_days = fields.Int(load_default=5)
    prophylaxis_days = fields.Int(load_default=10)
    reporting_fraction = fields.Float(load_default=1.0)
    closure_days = fields.Int(allow_none=True, load_default=None)

    @post_load
    def make_config(self, data: dict, **kwargs) -> InterventionConfig:
        return InterventionConfig(**data)


class ScenarioSpecSchema(OrderedSchema):
    name = fields.Str(required=True)
    variant = EnumField(Variant, by_value=True, required=True)
    intervention = fields.Nested(InterventionConfigSchema, load_default=InterventionConfig)
    p_bar_grid = fields.List(fields.Float(validate=validate.Range(min=0.0, max=1.0)), required=True)
    replicates = fields.Int(load_default=1000)
    bootstrap_replicates = fields.Int(load_default=20)
    inner_resamples = fields.Int(load_default=DEFAULT_INNER_RESAMPLES)
    season_length = fields.Int(load_default=DEFAULT_SEASON_LENGTH)
    seed = fields.Int(load_default=20111)
    friendship = EnumField(FriendshipSource, by_value=True, load_default=FriendshipSource.simulated)
    friendship_path = fields.Str(allow_none=True, load_default=None)
    n_index_cases = fields.Int(load_default=1)
    baseline = fields.Str(allow_none=True, load_default=None)

    @post_load
    def make_spec(self, data: dict, **kwargs) -> ScenarioSpec:
        return ScenarioSpec(**data)


def load_scenarios(path: Path, seed: Optional[int] = None) -> list[ScenarioSpec]:
    """Read a scenario document: one spec object, a list of them, or ``{"scenarios": [...]}``.

    ``seed`` overrides every scenario's master seed.
    """
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(document, dict) and "scenarios" in document:
        document = document["scenarios"]
    if isinstance(document, dict):
        document = [document]
    try:
        specs = ScenarioSpecSchema(many=True).load(document)
    except ValidationError as err:
        raise ValueError(f"{path}: invalid scenario spec: {err.messages}") from err
    if seed is not None:
        specs = [attr.evolve(spec, seed=seed) for spec in specs]

    names = [spec.name for spec in specs]
    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        raise ValueError(f"{path}: duplicate scenario names {duplicates}")
    for spec in specs:
        if spec.baseline is not None and spec.baseline not in names:
            raise ValueError(f"{path}: scenario {spec.name} has unknown baseline {spec.baseline}")
    logger.info(f"Loaded {len(specs)} scenarios from {path}")
    return specs


# ------------------------------------------------ Running ------------------------------------------------


def resolve_friendship(spec: ScenarioSpec, inputs: ExperimentInputs) -> FriendshipNetwork:
    """The friendship network every bootstrap replicate of ``spec`` builds on."""
    n = inputs.roster.n
    if spec.friendship is FriendshipSource.empirical:
        network = load_friendship(Path(spec.friendship_path), n)
        logger.info(f"Scenario {spec.name}: empirical friendship network with {network.n_edges} edges")
        return network
    if inputs.friendship is not None:
        return inputs.friendship
    if inputs.coefficients is None:
        if spec.variant is Variant.random_mixing:
            return FriendshipNetwork(n=n)
        raise ValueError(f"scenario {spec.name}: simulated friendship needs ERGM coefficients")
    network = simulate_friendship(inputs.roster, inputs.coefficients, spawn_rng(spec.seed, FRIENDSHIP_KEY))
    logger.info(f"Scenario {spec.name}: simulated friendship network with {network.n_edges} edges")
    return network


@attr.s(frozen=True, auto_attribs=True)
class _ReplicateTask:
    spec: ScenarioSpec
    inputs: ExperimentInputs
    friendship: FriendshipNetwork
    bootstrap_index: int
    n_outbreaks: int


@attr.s(frozen=True, auto_attribs=True)
class _ReplicateOutcome:
    bootstrap_index: int
    final_sizes: np.ndarray
    peak_dates: np.ndarray
    error: Optional[str] = None


def _run_bootstrap_replicate(task: _ReplicateTask) -> _ReplicateOutcome:
    """All outbreaks of one bootstrap replicate, for every grid point.

    Network failures are returned as messages so they cross process
    boundaries as plain strings.
    """
    spec, inputs, b = task.spec, task.inputs, task.bootstrap_index
    shape = (len(spec.p_bar_grid), task.n_outbreaks)
    final_sizes = np.zeros(shape, dtype=np.int64)
    peak_dates = np.full(shape, np.nan)
    try:
        plan = make_season_plan(
            inputs.roster,
            task.friendship,
            spec.variant,
            spawn_rng(spec.seed, PLAN_KEY, b),
            survey=inputs.survey,
            params=inputs.degree_params,
            season_length=spec.season_length,
            resample=spec.bootstrap_replicates > 1,
        )
        for g, p_bar in enumerate(spec.p_bar_grid):
            params = attr.evolve(inputs.natural_history, mean_unit_transmission=p_bar)
            for r in range(task.n_outbreaks):
                _, summary = run_outbreak(
                    plan,
                    params,
                    spec.intervention,
                    spawn_rng(spec.seed, OUTBREAK_KEY, g, b, r),
                    inputs.curves,
                    n_index_cases=spec.n_index_cases,
                )
                final_sizes[g, r] = summary.final_size
                if summary.peak_date is not None:
                    peak_dates[g, r] = summary.peak_date
    except NETWORK_FAILURES as err:
        logger.error(f"Scenario {spec.name}, bootstrap replicate {b}: {type(err).__name__}: {err}")
        return _ReplicateOutcome(b, final_sizes, peak_dates, error=f"bootstrap replicate {b}: {err}")
    logger.debug(f"Scenario {spec.name}: bootstrap replicate {b} finished {task.n_outbreaks} outbreaks per grid point")
    return _ReplicateOutcome(b, final_sizes, peak_dates)


def run_experiment(spec: ScenarioSpec, inputs: ExperimentInputs, threads: int = 1) -> ScenarioResult:
    """Simulate every grid point of ``spec`` and aggregate with the nested percentile bootstrap.

    Serial and parallel runs give identical results: every stream is keyed
    by (seed, grid point, bootstrap replicate, outbreak) and outcomes are
    collected in bootstrap-replicate order.
    """
    logger.info(
        f"Scenario {spec.name}: {spec.variant.value} / {spec.intervention.kind.value}, "
        f"{len(spec.p_bar_grid)} grid points x {spec.replicates} outbreaks over {spec.bootstrap_replicates} "
        f"bootstrap replicates"
    )
    result_kwargs = dict(name=spec.name, variant=spec.variant.value, intervention=spec.intervention.kind.value)
    try:
        friendship = resolve_friendship(spec, inputs)
    except (ValueError, FileNotFoundError) as err:
        logger.error(f"Scenario {spec.name}: {err}")
        return ScenarioResult(**result_kwargs, failed=True, message=str(err))

    tasks = [
        _ReplicateTask(spec, inputs, friendship, b, count) for b, count in enumerate(spec.allocation()) if count > 0
    ]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as executor:
            outcomes = list(executor.map(_run_bootstrap_replicate, tasks))
    else:
        outcomes = [_run_bootstrap_replicate(task) for task in tasks]
    outcomes.sort(key=lambda outcome: outcome.bootstrap_index)

    errors = [outcome.error for outcome in outcomes if outcome.error]
    if errors:
        return ScenarioResult(**result_kwargs, failed=True, message="; ".join(errors))

    points = []
    for g, p_bar in enumerate(spec.p_bar_grid):
        point = summarize_grid_point(
            p_bar,
            [outcome.final_sizes[g] for outcome in outcomes],
            [outcome.peak_dates[g] for outcome in outcomes],
            EPIDEMIC_THRESHOLD,
            [spawn_rng(spec.seed, RESAMPLE_KEY, g, outcome.bootstrap_index) for outcome in outcomes],
            spec.inner_resamples,
        )
        logger.info(
            f"Scenario {spec.name}, p_bar {p_bar}: P(epidemic) {point.p_epidemic.value:.3f} "
            f"[{point.p_epidemic.lo:.3f}, {point.p_epidemic.hi:.3f}], mean final size {point.final_size.value:.1f}"
        )
        points.append(point)
    return ScenarioResult(**result_kwargs, points=points)


def run_scenarios(
    specs: list[ScenarioSpec], inputs: ExperimentInputs, threads: int = 1
) -> tuple[list[ScenarioResult], dict[str, list[ScenarioDelta]]]:
    """Run every scenario, then compare each one that names a baseline against it."""
    results = [run_experiment(spec, inputs, threads=threads) for spec in specs]
    by_name = {result.name: result for result in results}
    deltas = {}
    for spec in specs:
        if spec.baseline is None:
            continue
        baseline, result = by_name[spec.baseline], by_name[spec.name]
        if baseline.failed or result.failed:
            logger.warning(f"Skipping comparison {spec.baseline} -> {spec.name}: a scenario failed")
            continue
        deltas[spec.name] = compare_scenarios(baseline, result)
    return results, deltas
