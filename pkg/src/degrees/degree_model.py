"""Contact-degree distributions.

Break contacts: negative binomial regression on the number of close friends
(log link), one draw per break. Lunch contacts: negative binomial without a
predictor, fitted with a likelihood that treats reports above a cutoff as
censored, each lunch partner lasting one to five 10-minute units. Class
neighbours: a fixed categorical model, 2, 3 or 4 neighbours per class.
"""

import json
import logging
from pathlib import Path

import attr
import numpy as np
import statsmodels.api as sm
from marshmallow import fields, post_load
from scipy import optimize, stats
from scipy.special import digamma, gammaln, xlogy

from population.items import OrderedSchema, SurveySample, strict_fields

logger = logging.getLogger(__name__)

N_BREAKS = 5
LUNCH_MAX_UNITS = 5
CLASSES_PER_DAY = 7
CLASS_UNITS_PER_SHARED_CLASS = 4
DEFAULT_LUNCH_CUTOFF = 30

MIN_RECORDS = 10
LOGLIK_TOL = 1e-8
GRADIENT_TOL = 1e-5
MAX_ITER = 200
# Dispersion search range; the upper end is the Poisson limit
DISPERSION_MIN = 1e-4
DISPERSION_MAX = 1e6


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, gradient_norm: float = float("nan"), iterations: int = 0):
        super().__init__(f"{message} (gradient norm {gradient_norm:.3g} after {iterations} iterations)")
        self.gradient_norm = gradient_norm
        self.iterations = iterations


def _positive(instance, attribute, value):
    if not value > 0:
        raise ValueError(f"{attribute.name} must be > 0, got {value}")


def _as_interval(value) -> tuple[float, float]:
    lo, hi = value
    return (float(lo), float(hi))


@attr.s(frozen=True, auto_attribs=True, field_transformer=strict_fields)
class NegBinRegressionFit:
    intercept: float = attr.ib(converter=float)
    log_ratio: float = attr.ib(converter=float)
    dispersion: float = attr.ib(converter=float, validator=_positive)
    ci_log_ratio: tuple[float, float] = attr.ib(default=(float("nan"), float("nan")), converter=_as_interval)
    gradient_norm: float = attr.ib(default=0.0, converter=float)
    loglik: float = attr.ib(default=float("nan"), converter=float)
    n_obs: int = attr.ib(default=0, converter=int)

    @property
    def mean_at_zero_friends(self) -> float:
        return float(np.exp(self.intercept))

    @property
    def ratio(self) -> float:
        return float(np.exp(self.log_ratio))

    @property
    def ci_ratio(self) -> tuple[float, float]:
        return (float(np.exp(self.ci_log_ratio[0])), float(np.exp(self.ci_log_ratio[1])))

    def mean(self, n_friends) -> np.ndarray:
        return np.exp(self.intercept + self.log_ratio * np.asarray(n_friends, dtype=float))


@attr.s(frozen=True, auto_attribs=True, field_transformer=strict_fields)
class CensoredNegBinFit:
    mean: float = attr.ib(converter=float, validator=_positive)
    dispersion: float = attr.ib(converter=float, validator=_positive)
    cutoff: int = attr.ib(default=DEFAULT_LUNCH_CUTOFF, converter=int)
    n_censored: int = attr.ib(default=0, converter=int)
    loglik: float = attr.ib(default=float("nan"), converter=float)

    @cutoff.validator
    def _cutoff_positive(self, attribute, value):
        if value < 1:
            raise ValueError(f"cutoff must be >= 1, got {value}")


def _probabilities_sum_to_one(instance, attribute, value):
    if len(value) != len(instance.support) or not np.isclose(sum(value), 1.0):
        raise ValueError(f"class neighbour probabilities must match the support and sum to 1, got {value}")


@attr.s(frozen=True, auto_attribs=True)
class ClassNeighborModel:
    support: tuple[int, ...] = attr.ib(default=(2, 3, 4), converter=tuple)
    probabilities: tuple[float, ...] = attr.ib(
        default=(1 / 9, 4 / 9, 4 / 9), converter=tuple, validator=_probabilities_sum_to_one
    )
    classes_per_day: int = attr.ib(default=CLASSES_PER_DAY, converter=int)

    @property
    def mean_neighbors(self) -> float:
        return float(np.dot(self.support, self.probabilities))


@attr.s(frozen=True, auto_attribs=True)
class DegreeRealization:
    """One day's degrees. Break and lunch degrees are in 10-minute units."""

    break_units: np.ndarray
    lunch_partners: np.ndarray
    lunch_units: np.ndarray
    class_neighbor_degrees: np.ndarray

    @property
    def n(self) -> int:
        return int(self.break_units.shape[0])

    @property
    def break_lunch_units(self) -> np.ndarray:
        return self.break_units + self.lunch_units

    @property
    def class_degrees(self) -> np.ndarray:
        # Neighbour-class slots over the day
        return self.class_neighbor_degrees.sum(axis=1)


@attr.s(frozen=True, auto_attribs=True, field_transformer=strict_fields)
class DegreeParameters:
    """Fitted degree model plus the friend shares used when wiring contacts."""

    break_fit: NegBinRegressionFit
    lunch_fit: CensoredNegBinFit
    pct_to_friends: float = attr.ib(default=0.68, converter=float)
    class_friend_fraction: float = attr.ib(default=0.5, converter=float)
    class_model: ClassNeighborModel = attr.ib(factory=ClassNeighborModel)


# ------------------------------------------------ Likelihoods ------------------------------------------------


def nb_logpmf(y: np.ndarray, mu: np.ndarray, k: float) -> np.ndarray:
    """Negative binomial log-probability with mean ``mu`` and size ``k``."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return (
        gammaln(y + k)
        - gammaln(k)
        - gammaln(y + 1)
        + k * np.log1p(-mu / (k + mu))
        + xlogy(y, mu / (k + mu))
    )


def break_loglik(params, n_friends: np.ndarray, y: np.ndarray) -> float:
    """Log-likelihood of (intercept, log_ratio, dispersion)."""
    intercept, log_ratio, k = params
    mu = np.exp(intercept + log_ratio * np.asarray(n_friends, dtype=float))
    return float(nb_logpmf(y, mu, k).sum())


def break_score(params, n_friends: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Analytic gradient of `break_loglik`."""
    intercept, log_ratio, k = params
    x = np.asarray(n_friends, dtype=float)
    y = np.asarray(y, dtype=float)
    mu = np.exp(intercept + log_ratio * x)
    resid = k * (y - mu) / (k + mu)
    d_k = digamma(y + k) - digamma(k) + np.log1p(-mu / (k + mu)) + (mu - y) / (k + mu)
    return np.array([resid.sum(), (resid * x).sum(), d_k.sum()])


def _profile_dispersion(y: np.ndarray, mu: np.ndarray) -> float:
    res = optimize.minimize_scalar(
        lambda log_k: -nb_logpmf(y, mu, np.exp(log_k)).sum(),
        bounds=(np.log(DISPERSION_MIN), np.log(DISPERSION_MAX)),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(np.exp(res.x))


def _moment_dispersion(y: np.ndarray) -> float:
    m, v = y.mean(), y.var()
    if v > m > 0:
        return float(np.clip(m * m / (v - m), DISPERSION_MIN, DISPERSION_MAX))
    return 10.0


def fit_negbin_regression(n_friends: np.ndarray, y: np.ndarray, label: str = "break") -> NegBinRegressionFit:
    """Negative binomial regression of ``y`` on friend count.

    Alternates a Newton (IRLS) fit of the coefficients at fixed dispersion
    with a one-dimensional profile maximisation over the dispersion, until
    the log-likelihood improves by less than `LOGLIK_TOL`.
    """
    x = np.asarray(n_friends, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size < MIN_RECORDS:
        raise ValueError(f"{label} model needs at least {MIN_RECORDS} records, got {y.size}")
    if np.all(x == x[0]):
        raise ValueError(f"degenerate design for {label} model: friend counts are all identical")
    if np.all(y == 0):
        raise ValueError(f"degenerate response for {label} model: all counts are zero")

    exog = sm.add_constant(x, has_constant="add")
    k = _moment_dispersion(y)
    loglik_prev = -np.inf
    converged = False
    for iteration in range(1, MAX_ITER + 1):
        glm = sm.GLM(y, exog, family=sm.families.NegativeBinomial(alpha=1.0 / k))
        beta = glm.fit(tol=1e-12, maxiter=200).params
        mu = np.exp(exog @ beta)
        k = _profile_dispersion(y, mu)
        loglik = float(nb_logpmf(y, mu, k).sum())
        if loglik - loglik_prev < LOGLIK_TOL:
            converged = True
            break
        loglik_prev = loglik

    # Final coefficient step at the profiled dispersion gives consistent standard errors
    res = sm.GLM(y, exog, family=sm.families.NegativeBinomial(alpha=1.0 / k)).fit(tol=1e-12, maxiter=200)
    params = (float(res.params[0]), float(res.params[1]), k)
    score = break_score(params, x, y) / y.size
    at_bound = k >= DISPERSION_MAX * (1 - 1e-6)
    if at_bound:
        logger.warning(f"{label} dispersion reached {DISPERSION_MAX:g}; treating the fit as its Poisson limit")
        score = score[:2]
    gradient_norm = float(np.linalg.norm(score))

    if not converged or gradient_norm > GRADIENT_TOL:
        raise ConvergenceError(f"{label} model did not converge", gradient_norm, iteration)

    z = stats.norm.ppf(0.975)
    se = float(res.bse[1])
    fit = NegBinRegressionFit(
        intercept=params[0],
        log_ratio=params[1],
        dispersion=k,
        ci_log_ratio=(params[1] - z * se, params[1] + z * se),
        gradient_norm=gradient_norm,
        loglik=break_loglik(params, x, y),
        n_obs=y.size,
    )
    logger.debug(f"{label} fit converged after {iteration} iterations: {fit}")
    return fit


def fit_break_model(survey: SurveySample) -> NegBinRegressionFit:
    return fit_negbin_regression(survey.n_close_friends, survey.break_contacts, label="break")


def lunch_friend_association(survey: SurveySample) -> NegBinRegressionFit:
    """Same regression for lunch contacts; a ratio near 1 supports the predictor-free lunch model."""
    return fit_negbin_regression(survey.n_close_friends, survey.lunch_contacts, label="lunch")


def censored_nb_loglik(params, y: np.ndarray, cutoff: int) -> float:
    """Log-likelihood of (log mean, log dispersion); counts above ``cutoff`` only contribute P(Y > cutoff)."""
    mu, k = np.exp(params[0]), np.exp(params[1])
    observed = y[y <= cutoff]
    n_censored = int((y > cutoff).sum())
    ll = nb_logpmf(observed, mu, k).sum()
    if n_censored:
        ll += n_censored * stats.nbinom.logsf(cutoff, k, k / (k + mu))
    return float(ll)


def fit_lunch_model(survey: SurveySample, cutoff: int = DEFAULT_LUNCH_CUTOFF) -> CensoredNegBinFit:
    y = survey.lunch_contacts.astype(float)
    if y.size < MIN_RECORDS:
        raise ValueError(f"lunch model needs at least {MIN_RECORDS} records, got {y.size}")
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    n_censored = int((y > cutoff).sum())
    if n_censored == y.size:
        raise ValueError(f"all {y.size} lunch reports are above the cutoff {cutoff}")

    start_y = np.minimum(y, cutoff + 1)
    start = np.array([np.log(max(start_y.mean(), 1e-3)), np.log(_moment_dispersion(start_y))])
    res = optimize.minimize(
        lambda p: -censored_nb_loglik(p, y, cutoff),
        start,
        method="Powell",
        bounds=[(np.log(1e-6), np.log(1e6)), (np.log(DISPERSION_MIN), np.log(DISPERSION_MAX))],
        options={"xtol": 1e-10, "ftol": 1e-12, "maxiter": 20000},
    )
    if not res.success:
        raise ConvergenceError(f"lunch model did not converge: {res.message}", float("nan"), int(res.nit))

    fit = CensoredNegBinFit(
        mean=float(np.exp(res.x[0])),
        dispersion=float(np.exp(res.x[1])),
        cutoff=cutoff,
        n_censored=n_censored,
        loglik=-float(res.fun),
    )
    logger.debug(f"lunch fit: {fit}")
    return fit


# ------------------------------------------------ Samplers ------------------------------------------------


def draw_negative_binomial(mean, dispersion: float, rng: np.random.Generator) -> np.ndarray:
    """Negative binomial draws with the given means; mean 0 gives 0 and infinite dispersion is Poisson."""
    mean = np.asarray(mean, dtype=float)
    out = np.zeros(mean.shape, dtype=np.int64)
    positive = mean > 0
    if not positive.any():
        return out
    if np.isinf(dispersion):
        out[positive] = rng.poisson(mean[positive])
    else:
        out[positive] = rng.negative_binomial(dispersion, dispersion / (dispersion + mean[positive]))
    return out


def sample_break_degree(fit: NegBinRegressionFit, n_friends, rng: np.random.Generator):
    """Partners during one break; scalar in, scalar out."""
    draws = draw_negative_binomial(fit.mean(n_friends), fit.dispersion, rng)
    return int(draws) if draws.ndim == 0 else draws


def sample_break_units(fit: NegBinRegressionFit, n_friends: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Daily break units: one independent per-break draw for each of the five breaks."""
    means = np.repeat(fit.mean(n_friends)[:, None], N_BREAKS, axis=1)
    return draw_negative_binomial(means, fit.dispersion, rng).sum(axis=1)


def sample_lunch_units(fit: CensoredNegBinFit, rng: np.random.Generator) -> tuple[int, int]:
    partners = int(draw_negative_binomial(fit.mean, fit.dispersion, rng))
    units = int(rng.integers(1, LUNCH_MAX_UNITS + 1, size=partners).sum())
    return partners, units


def sample_lunch_units_many(fit: CensoredNegBinFit, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    partners = draw_negative_binomial(np.full(n, fit.mean), fit.dispersion, rng)
    durations = rng.integers(1, LUNCH_MAX_UNITS + 1, size=int(partners.sum()))
    owners = np.repeat(np.arange(n), partners)
    units = np.bincount(owners, weights=durations, minlength=n).astype(np.int64)
    return partners, units


def sample_class_neighbor_degrees(model: ClassNeighborModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Neighbour counts per student (rows) and class (columns)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return rng.choice(
        np.asarray(model.support, dtype=np.int64),
        size=(n, model.classes_per_day),
        p=np.asarray(model.probabilities),
    )


def sample_degree_realization(
    params: DegreeParameters, n_friends: np.ndarray, rng: np.random.Generator
) -> DegreeRealization:
    n_friends = np.asarray(n_friends)
    n = n_friends.shape[0]
    break_units = sample_break_units(params.break_fit, n_friends, rng)
    lunch_partners, lunch_units = sample_lunch_units_many(params.lunch_fit, n, rng)
    class_degrees = sample_class_neighbor_degrees(params.class_model, n, rng)
    return DegreeRealization(
        break_units=break_units,
        lunch_partners=lunch_partners,
        lunch_units=lunch_units,
        class_neighbor_degrees=class_degrees,
    )


def expected_daily_units(params: DegreeParameters, n_friends) -> np.ndarray:
    """Expected 10-minute units per student per day (breaks + lunch + class)."""
    lunch_mean_units = (LUNCH_MAX_UNITS + 1) / 2
    class_units = params.class_model.classes_per_day * params.class_model.mean_neighbors * CLASS_UNITS_PER_SHARED_CLASS
    return (
        N_BREAKS * params.break_fit.mean(n_friends)
        + lunch_mean_units * params.lunch_fit.mean
        + class_units
    )


# ------------------------------------------------ Fitting pipeline ------------------------------------------------


def fit_degree_parameters(
    survey: SurveySample,
    cutoff: int = DEFAULT_LUNCH_CUTOFF,
    class_friend_fraction: float = 0.5,
) -> DegreeParameters:
    """Fit both count models and take X, the mean share of contacts to friends, from the survey."""
    if survey.mean_pct_to_friends is None:
        raise ValueError("cannot fit degree parameters on an empty survey")
    return DegreeParameters(
        break_fit=fit_break_model(survey),
        lunch_fit=fit_lunch_model(survey, cutoff=cutoff),
        pct_to_friends=survey.mean_pct_to_friends,
        class_friend_fraction=class_friend_fraction,
    )


class DegreeParametersSchema(OrderedSchema):
    intercept = fields.Float()
    log_ratio = fields.Float()
    dispersion = fields.Float()
    lunch_mean = fields.Float()
    lunch_dispersion = fields.Float()
    cutoff = fields.Int()
    pct_to_friends = fields.Float()
    class_friend_fraction = fields.Float(load_default=0.5)

    @post_load
    def make_params(self, data: dict, **kwargs) -> DegreeParameters:
        return DegreeParameters(
            break_fit=NegBinRegressionFit(
                intercept=data["intercept"], log_ratio=data["log_ratio"], dispersion=data["dispersion"]
            ),
            lunch_fit=CensoredNegBinFit(
                mean=data["lunch_mean"], dispersion=data["lunch_dispersion"], cutoff=data["cutoff"]
            ),
            pct_to_friends=data.get("pct_to_friends", 0.68),
            class_friend_fraction=data["class_friend_fraction"],
        )


def degree_params_to_dict(params: DegreeParameters) -> dict:
    return DegreeParametersSchema().dump(
        {
            "intercept": params.break_fit.intercept,
            "log_ratio": params.break_fit.log_ratio,
            "dispersion": params.break_fit.dispersion,
            "lunch_mean": params.lunch_fit.mean,
            "lunch_dispersion": params.lunch_fit.dispersion,
            "cutoff": params.lunch_fit.cutoff,
            "pct_to_friends": params.pct_to_friends,
            "class_friend_fraction": params.class_friend_fraction,
        }
    )


def save_degree_params(params: DegreeParameters, path: Path) -> None:
    Path(path).write_text(json.dumps(degree_params_to_dict(params), indent=2) + "\n", encoding="utf-8")
    logger.info(f"Saved degree parameters to {path}")


def load_degree_params(path: Path) -> DegreeParameters:
    params = DegreeParametersSchema().load(json.loads(Path(path).read_text(encoding="utf-8")))
    logger.info(f"Loaded degree parameters from {path}")
    return params


def default_degree_params() -> DegreeParameters:
    """Bundled fixture: break mean 4.5 at zero friends, ratio 1.03 per friend; lunch mean 10.8."""
    return DegreeParameters(
        break_fit=NegBinRegressionFit(intercept=np.log(4.5), log_ratio=np.log(1.03), dispersion=2.0),
        lunch_fit=CensoredNegBinFit(mean=10.8, dispersion=1.5, cutoff=DEFAULT_LUNCH_CUTOFF),
        pct_to_friends=0.68,
        class_friend_fraction=0.5,
    )
