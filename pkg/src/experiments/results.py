"""Scenario results: per-grid-point outcome estimates, paired comparisons and result files.

Intervals come from a nested percentile bootstrap. For every survey
bootstrap replicate, its outbreaks are resampled with replacement a fixed
number of times; the statistics of all resamples are pooled and their
2.5 and 97.5 percentiles reported. Peak dates are averaged over epidemics
only.
"""

import json
import logging
from pathlib import Path
from typing import Optional

import attr
import numpy as np
import pandas as pd
from marshmallow import fields, post_load

from population.items import OrderedSchema

logger = logging.getLogger(__name__)

AGGREGATION_NOTE = (
    "nested percentile bootstrap: outer survey resamples, inner outbreak resamples, pooled 2.5/97.5 percentiles; "
    "peak date conditional on epidemic"
)
RESULT_COLUMNS = [
    "p_bar",
    "variant",
    "intervention",
    "p_epidemic",
    "p_epidemic_lo",
    "p_epidemic_hi",
    "final_size_mean",
    "final_size_lo",
    "final_size_hi",
    "peak_date_mean",
    "peak_date_lo",
    "peak_date_hi",
]
DELTA_COLUMNS = [
    "p_bar",
    "delta_p_epidemic",
    "delta_p_epidemic_lo",
    "delta_p_epidemic_hi",
    "delta_final_size",
    "delta_final_size_lo",
    "delta_final_size_hi",
    "delta_peak_date",
    "delta_peak_date_lo",
    "delta_peak_date_hi",
]
STATISTICS = ("p_epidemic", "final_size", "peak_date")


class GridMismatchError(ValueError):
    pass


@attr.s(frozen=True, auto_attribs=True)
class Estimate:
    value: Optional[float] = None
    lo: Optional[float] = None
    hi: Optional[float] = None

    @classmethod
    def from_draws(cls, point: Optional[float], draws: np.ndarray) -> "Estimate":
        """Percentile interval of ``draws``, widened so it contains ``point``; undefined without data."""
        if point is None or np.isnan(point):
            return cls()
        finite = draws[~np.isnan(draws)] if draws.size else draws
        if finite.size == 0:
            return cls(value=float(point), lo=float(point), hi=float(point))
        lo, hi = np.percentile(finite, [2.5, 97.5])
        return cls(value=float(point), lo=float(min(lo, point)), hi=float(max(hi, point)))


@attr.s(frozen=True, auto_attribs=True, eq=False)
class GridPointResult:
    p_bar: float = attr.ib(converter=float)
    p_epidemic: Estimate = attr.ib(factory=Estimate)
    final_size: Estimate = attr.ib(factory=Estimate)
    peak_date: Estimate = attr.ib(factory=Estimate)
    n_outbreaks: int = attr.ib(default=0, converter=int)
    n_epidemics: int = attr.ib(default=0, converter=int)
    # Pooled resample statistics, kept in memory for paired comparisons
    draws: dict[str, np.ndarray] = attr.ib(factory=dict, repr=False)

    @p_epidemic.validator
    def _probability(self, attribute, value):
        if value.value is not None and not 0.0 <= value.value <= 1.0:
            raise ValueError(f"p_epidemic must be within [0, 1], got {value.value}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridPointResult):
            return NotImplemented
        return (
            self.p_bar,
            self.p_epidemic,
            self.final_size,
            self.peak_date,
            self.n_outbreaks,
            self.n_epidemics,
        ) == (other.p_bar, other.p_epidemic, other.final_size, other.peak_date, other.n_outbreaks, other.n_epidemics)


@attr.s(frozen=True, auto_attribs=True)
class ScenarioResult:
    name: str
    variant: str
    intervention: str
    points: list[GridPointResult] = attr.ib(factory=list)
    failed: bool = False
    message: Optional[str] = None

    @property
    def grid(self) -> list[float]:
        return [point.p_bar for point in self.points]


def summarize_grid_point(
    p_bar: float,
    final_sizes: list[np.ndarray],
    peak_dates: list[np.ndarray],
    epidemic_threshold: int,
    resample_rngs: list[np.random.Generator],
    inner_resamples: int,
) -> GridPointResult:
    """Point estimates over all outbreaks; pooled resample draws per bootstrap replicate.

    ``final_sizes[b]`` and ``peak_dates[b]`` hold the outbreaks of bootstrap
    replicate ``b`` (peak dates as floats, NaN when undefined).
    """
    all_sizes = np.concatenate(final_sizes) if final_sizes else np.empty(0)
    all_peaks = np.concatenate(peak_dates) if peak_dates else np.empty(0)
    if all_sizes.size == 0:
        return GridPointResult(p_bar=p_bar)
    epidemic = all_sizes > epidemic_threshold

    draws = {name: [] for name in STATISTICS}
    for sizes, peaks, rng in zip(final_sizes, peak_dates, resample_rngs):
        if sizes.size == 0:
            continue
        idx = rng.integers(0, sizes.size, size=(inner_resamples, sizes.size))
        resampled_epidemic = sizes[idx] > epidemic_threshold
        draws["p_epidemic"].append(resampled_epidemic.mean(axis=1))
        draws["final_size"].append(sizes[idx].mean(axis=1))
        epidemic_peaks = np.where(resampled_epidemic, peaks[idx], np.nan)
        with np.errstate(invalid="ignore"):
            counts = resampled_epidemic.sum(axis=1)
            sums = np.nansum(epidemic_peaks, axis=1)
            draws["peak_date"].append(np.where(counts > 0, sums / np.maximum(counts, 1), np.nan))
    pooled = {name: np.concatenate(values) for name, values in draws.items()}

    peak_point = float(all_peaks[epidemic].mean()) if epidemic.any() else None
    return GridPointResult(
        p_bar=p_bar,
        p_epidemic=Estimate.from_draws(float(epidemic.mean()), pooled["p_epidemic"]),
        final_size=Estimate.from_draws(float(all_sizes.mean()), pooled["final_size"]),
        peak_date=Estimate.from_draws(peak_point, pooled["peak_date"]),
        n_outbreaks=all_sizes.size,
        n_epidemics=int(epidemic.sum()),
        draws=pooled,
    )


# ------------------------------------------------ Comparisons ------------------------------------------------


@attr.s(frozen=True, auto_attribs=True)
class ScenarioDelta:
    """Change from scenario a to scenario b (b - a); reductions are the negated deltas."""

    p_bar: float
    p_epidemic: Estimate
    final_size: Estimate
    peak_date: Estimate

    @property
    def p_epidemic_reduction(self) -> Optional[float]:
        return None if self.p_epidemic.value is None else -self.p_epidemic.value

    @property
    def final_size_reduction(self) -> Optional[float]:
        return None if self.final_size.value is None else -self.final_size.value


def _paired_delta(a: Estimate, b: Estimate, a_draws, b_draws) -> Estimate:
    if a.value is None or b.value is None:
        return Estimate()
    point = b.value - a.value
    if a_draws is None or b_draws is None or a_draws.size != b_draws.size:
        return Estimate(value=point)
    return Estimate.from_draws(point, b_draws - a_draws)


def compare_scenarios(a: ScenarioResult, b: ScenarioResult) -> list[ScenarioDelta]:
    if a.failed or b.failed:
        raise ValueError(f"cannot compare failed scenarios ({a.name}, {b.name})")
    if not np.array_equal(a.grid, b.grid):
        raise GridMismatchError(f"scenario grids differ: {a.grid} vs {b.grid}")
    deltas = []
    for pa, pb in zip(a.points, b.points):
        deltas.append(
            ScenarioDelta(
                p_bar=pa.p_bar,
                **{
                    name: _paired_delta(
                        getattr(pa, name), getattr(pb, name), pa.draws.get(name), pb.draws.get(name)
                    )
                    for name in STATISTICS
                },
            )
        )
    return deltas


# ------------------------------------------------ Files ------------------------------------------------


class EstimateSchema(OrderedSchema):
    value = fields.Float(allow_none=True)
    lo = fields.Float(allow_none=True)
    hi = fields.Float(allow_none=True)

    @post_load
    def make_estimate(self, data: dict, **kwargs) -> Estimate:
        return Estimate(**data)


class GridPointResultSchema(OrderedSchema):
    p_bar = fields.Float()
    p_epidemic = fields.Nested(EstimateSchema)
    final_size = fields.Nested(EstimateSchema)
    peak_date = fields.Nested(EstimateSchema)
    n_outbreaks = fields.Int()
    n_epidemics = fields.Int()

    @post_load
    def make_point(self, data: dict, **kwargs) -> GridPointResult:
        return GridPointResult(**data)


class ScenarioResultSchema(OrderedSchema):
    name = fields.Str()
    variant = fields.Str()
    intervention = fields.Str()
    failed = fields.Bool()
    message = fields.Str(allow_none=True)
    points = fields.List(fields.Nested(GridPointResultSchema))

    @post_load
    def make_result(self, data: dict, **kwargs) -> ScenarioResult:
        return ScenarioResult(**data)


class ResultsDocumentSchema(OrderedSchema):
    aggregation = fields.Str()
    scenarios = fields.List(fields.Nested(ScenarioResultSchema))


def results_frame(results: list[ScenarioResult]) -> pd.DataFrame:
    rows = []
    for result in results:
        for point in result.points:
            rows.append(
                {
                    "p_bar": point.p_bar,
                    "variant": result.variant,
                    "intervention": result.intervention,
                    "p_epidemic": point.p_epidemic.value,
                    "p_epidemic_lo": point.p_epidemic.lo,
                    "p_epidemic_hi": point.p_epidemic.hi,
                    "final_size_mean": point.final_size.value,
                    "final_size_lo": point.final_size.lo,
                    "final_size_hi": point.final_size.hi,
                    "peak_date_mean": point.peak_date.value,
                    "peak_date_lo": point.peak_date.lo,
                    "peak_date_hi": point.peak_date.hi,
                }
            )
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def results_to_json(results: list[ScenarioResult]) -> str:
    document = ResultsDocumentSchema().dump({"aggregation": AGGREGATION_NOTE, "scenarios": results})
    return json.dumps(document, indent=2) + "\n"


def emit_results(results: ScenarioResult | list[ScenarioResult], fmt: str, path: Path) -> None:
    results = [results] if isinstance(results, ScenarioResult) else list(results)
    for result in results:
        if result.failed:
            logger.warning(f"Scenario {result.name} failed: {result.message}")
    if fmt == "csv":
        results_frame(results).to_csv(path, index=False)
    elif fmt == "json":
        Path(path).write_text(results_to_json(results), encoding="utf-8")
    else:
        raise ValueError(f"unknown result format {fmt!r}; expected csv or json")
    logger.info(f"Wrote {len(results)} scenario results to {path}")


def load_results(path: Path) -> list[ScenarioResult]:
    """Read a JSON result file; resample draws are not stored, so loaded results compare by point estimate only."""
    document = ResultsDocumentSchema().load(json.loads(Path(path).read_text(encoding="utf-8")))
    return document["scenarios"]


def deltas_frame(deltas: list[ScenarioDelta]) -> pd.DataFrame:
    rows = [
        {
            "p_bar": d.p_bar,
            "delta_p_epidemic": d.p_epidemic.value,
            "delta_p_epidemic_lo": d.p_epidemic.lo,
            "delta_p_epidemic_hi": d.p_epidemic.hi,
            "delta_final_size": d.final_size.value,
            "delta_final_size_lo": d.final_size.lo,
            "delta_final_size_hi": d.final_size.hi,
            "delta_peak_date": d.peak_date.value,
            "delta_peak_date_lo": d.peak_date.lo,
            "delta_peak_date_hi": d.peak_date.hi,
        }
        for d in deltas
    ]
    return pd.DataFrame(rows, columns=DELTA_COLUMNS)
