"""Season plans: which contact network students use on each school day.

- static: one composed day, reused every day
- dynamic: the class layer is fixed, a fresh break/lunch layer each day
- friendship_only: contacts only between friends, calibrated to the same expected total
- random_mixing: a fresh random network each day (36 partners, 41 minutes on average)

A day network depends only on the plan seed and the day index.
"""

import logging
from enum import Enum
from typing import Optional

import attr
import numpy as np

from degrees.degree_model import (
    DegreeParameters,
    expected_daily_units,
    fit_degree_parameters,
)
from networks.contact_network import (
    RANDOM_MIXING_DURATION_PMF,
    RANDOM_MIXING_PARTNERS,
    ContactNetwork,
    build_class_layer,
    compose_day,
    friendship_only_network,
    random_mixing_network,
    sample_break_lunch_layer,
)
from networks.friendship_ergm import FriendshipNetwork
from networks.stub_matcher import MultiLayer, round_half_away
from population.items import Roster, SurveySample
from population.survey_service import bootstrap_resample
from random_streams import spawn_rng, stream_seed

logger = logging.getLogger(__name__)

DEFAULT_SEASON_LENGTH = 365
# Day networks kept per plan: all early-season days, plus the latest later ones (an outbreak reads today and yesterday)
EARLY_DAYS = 60
RECENT_DAYS = 2

_CLASS_LAYER_KEY = 0
_DAY_KEY = 1
_FRIENDSHIP_ONLY_KEY = 2


class Variant(str, Enum):
    static = "static"
    dynamic = "dynamic"
    friendship_only = "friendship_only"
    random_mixing = "random_mixing"


@attr.s(frozen=True, auto_attribs=True, eq=False)
class SeasonPlan:
    variant: Variant = attr.ib(converter=Variant)
    n: int = attr.ib(converter=int)
    seed: int = attr.ib(converter=int)
    season_length: int = attr.ib(default=DEFAULT_SEASON_LENGTH, converter=int)
    roster: Optional[Roster] = None
    friendship: Optional[FriendshipNetwork] = None
    params: Optional[DegreeParameters] = None
    class_layer: Optional[ContactNetwork] = None
    fixed_network: Optional[ContactNetwork] = None
    mean_partners: float = RANDOM_MIXING_PARTNERS
    duration_pmf: dict[int, float] = attr.ib(factory=lambda: dict(RANDOM_MIXING_DURATION_PMF))
    _cache: dict[int, ContactNetwork] = attr.ib(factory=dict, init=False, repr=False)

    def __attrs_post_init__(self):
        if self.variant is Variant.dynamic and (self.class_layer is None or self.params is None):
            raise ValueError("a dynamic plan needs a class layer and degree parameters")
        if self.variant in (Variant.static, Variant.friendship_only) and self.fixed_network is None:
            raise ValueError(f"a {self.variant.value} plan needs its fixed day network")

    def break_lunch_for_day(self, day: int) -> MultiLayer:
        """Break/lunch layer of a dynamic plan; pure in (seed, day)."""
        if self.variant is not Variant.dynamic:
            raise ValueError(f"{self.variant.value} plans have no per-day break/lunch layer")
        return sample_break_lunch_layer(self.friendship, self.params, spawn_rng(self.seed, _DAY_KEY, day))

    def network_for_day(self, day: int) -> ContactNetwork:
        if day < 1:
            raise ValueError(f"school days are numbered from 1, got {day}")
        if self.variant in (Variant.static, Variant.friendship_only):
            return self.fixed_network
        cached = self._cache.get(day)
        if cached is not None:
            return cached
        if self.variant is Variant.dynamic:
            network = compose_day(self.break_lunch_for_day(day), self.class_layer, day=day)
        else:
            network = random_mixing_network(
                self.n,
                spawn_rng(self.seed, _DAY_KEY, day),
                mean_partners=self.mean_partners,
                duration_pmf=self.duration_pmf,
                day=day,
            )
        self._cache[day] = network
        late = [d for d in self._cache if d > EARLY_DAYS]
        if len(late) > RECENT_DAYS:
            del self._cache[min(late)]
        return network


def make_season_plan(
    roster: Roster,
    friendship: FriendshipNetwork,
    variant: Variant,
    rng: np.random.Generator,
    survey: Optional[SurveySample] = None,
    params: Optional[DegreeParameters] = None,
    season_length: int = DEFAULT_SEASON_LENGTH,
    resample: bool = True,
    mean_partners: float = RANDOM_MIXING_PARTNERS,
    duration_pmf: Optional[dict[int, float]] = None,
) -> SeasonPlan:
    """Build a plan for one bootstrap replicate.

    With a ``survey``, the survey is resampled (unless ``resample`` is off)
    and the degree models are refitted on it; otherwise ``params`` are used
    as given.
    """
    variant = Variant(variant)
    if friendship.n != roster.n:
        raise ValueError(f"friendship network has {friendship.n} nodes but roster has {roster.n} students")
    if season_length < 1:
        raise ValueError(f"season_length must be >= 1, got {season_length}")
    duration_pmf = dict(duration_pmf or RANDOM_MIXING_DURATION_PMF)
    plan_seed = stream_seed(rng)

    if variant is Variant.random_mixing:
        return SeasonPlan(
            variant=variant,
            n=roster.n,
            seed=plan_seed,
            season_length=season_length,
            roster=roster,
            friendship=friendship,
            mean_partners=mean_partners,
            duration_pmf=duration_pmf,
        )

    if survey is not None:
        sample = bootstrap_resample(survey, rng) if resample else survey
        params = fit_degree_parameters(
            sample,
            cutoff=params.lunch_fit.cutoff if params is not None else 30,
            class_friend_fraction=params.class_friend_fraction if params is not None else 0.5,
        )
    if params is None:
        raise ValueError("a network plan needs a survey or fitted degree parameters")
    logger.debug(
        f"Plan degree parameters: break mean {params.break_fit.mean_at_zero_friends:.3f}, "
        f"ratio {params.break_fit.ratio:.4f}, lunch mean {params.lunch_fit.mean:.3f}, X {params.pct_to_friends:.3f}"
    )

    if variant is Variant.friendship_only:
        target = round_half_away(expected_daily_units(params, friendship.degrees).sum() / 2)
        network = friendship_only_network(friendship, target, spawn_rng(plan_seed, _FRIENDSHIP_ONLY_KEY))
        return SeasonPlan(
            variant=variant,
            n=roster.n,
            seed=plan_seed,
            season_length=season_length,
            roster=roster,
            friendship=friendship,
            params=params,
            fixed_network=network,
        )

    class_layer = build_class_layer(
        friendship,
        roster,
        params.class_model,
        spawn_rng(plan_seed, _CLASS_LAYER_KEY),
        class_friend_fraction=params.class_friend_fraction,
    )
    fixed_network = None
    if variant is Variant.static:
        break_lunch = sample_break_lunch_layer(friendship, params, spawn_rng(plan_seed, _DAY_KEY, 1))
        fixed_network = compose_day(break_lunch, class_layer)

    return SeasonPlan(
        variant=variant,
        n=roster.n,
        seed=plan_seed,
        season_length=season_length,
        roster=roster,
        friendship=friendship,
        params=params,
        class_layer=class_layer,
        fixed_network=fixed_network,
    )
