import numpy as np
import pytest

from degrees.degree_model import expected_daily_units
from networks.season_plan import EARLY_DAYS, RECENT_DAYS, SeasonPlan, Variant, make_season_plan


def _plan(roster, friendship, params, variant, seed=0, **kwargs):
    return make_season_plan(roster, friendship, variant, np.random.default_rng(seed), params=params, **kwargs)


def test_static_plan_reuses_one_day(small_roster, small_friendship, light_params):
    plan = _plan(small_roster, small_friendship, light_params, Variant.static)
    assert plan.network_for_day(3) is plan.network_for_day(1)
    assert plan.network_for_day(1).total_units > 0


def test_dynamic_plan_keeps_class_layer(small_roster, small_friendship, light_params):
    plan = _plan(small_roster, small_friendship, light_params, Variant.dynamic)
    day1, day2 = plan.network_for_day(1), plan.network_for_day(2)
    assert day1 != day2
    assert plan.break_lunch_for_day(1) != plan.break_lunch_for_day(2)
    class_matrix = plan.class_layer.matrix
    for day in (day1, day2):
        # class entries survive composition: the break/lunch layer only adds units
        assert ((day.matrix - class_matrix).min()) >= 0


def test_dynamic_days_do_not_depend_on_evaluation_order(small_roster, small_friendship, light_params):
    forward = _plan(small_roster, small_friendship, light_params, Variant.dynamic, seed=3)
    direct = _plan(small_roster, small_friendship, light_params, Variant.dynamic, seed=3)
    for day in range(1, 5):
        forward.network_for_day(day)
    assert direct.network_for_day(4) == forward.network_for_day(4)


def test_same_seed_gives_same_plan(small_roster, small_friendship, light_params):
    first = _plan(small_roster, small_friendship, light_params, Variant.static, seed=8)
    second = _plan(small_roster, small_friendship, light_params, Variant.static, seed=8)
    assert first.seed == second.seed
    assert first.network_for_day(1) == second.network_for_day(1)


def test_friendship_only_plan_matches_expected_total(small_roster, small_friendship, light_params):
    plan = _plan(small_roster, small_friendship, light_params, Variant.friendship_only)
    network = plan.network_for_day(2)
    target = expected_daily_units(light_params, small_friendship.degrees).sum() / 2
    assert network.total_units == pytest.approx(target, abs=1)
    assert network.matrix.multiply(small_friendship.adjacency).sum() == network.matrix.sum()


def test_random_mixing_plan_fresh_each_day(small_roster, small_friendship):
    plan = _plan(small_roster, small_friendship, None, Variant.random_mixing)
    assert plan.network_for_day(1) != plan.network_for_day(2)
    assert plan.network_for_day(1) is plan.network_for_day(1)


def test_day_cache_stays_bounded_over_a_season(small_roster, small_friendship, light_params):
    plan = _plan(small_roster, small_friendship, light_params, Variant.dynamic)
    first_day = plan.network_for_day(1)
    for day in range(2, EARLY_DAYS + 11):
        assert plan.network_for_day(day) is plan.network_for_day(day)
        assert len(plan._cache) <= EARLY_DAYS + RECENT_DAYS
    assert plan.network_for_day(1) is first_day
    assert sorted(d for d in plan._cache if d > EARLY_DAYS) == [EARLY_DAYS + 9, EARLY_DAYS + 10]
    # evicted days are rebuilt from the same stream
    late_day = plan.network_for_day(EARLY_DAYS + 1)
    assert late_day == _plan(small_roster, small_friendship, light_params, Variant.dynamic).network_for_day(
        EARLY_DAYS + 1
    )


def test_day_numbers_start_at_one(small_roster, small_friendship, light_params):
    plan = _plan(small_roster, small_friendship, light_params, Variant.static)
    with pytest.raises(ValueError):
        plan.network_for_day(0)


def test_network_plan_needs_parameters(small_roster, small_friendship):
    with pytest.raises(ValueError, match="survey or fitted degree parameters"):
        _plan(small_roster, small_friendship, None, Variant.static)


def test_plan_rejects_bad_season_length(small_roster, small_friendship, light_params):
    with pytest.raises(ValueError):
        _plan(small_roster, small_friendship, light_params, Variant.static, season_length=0)


def test_dynamic_plan_needs_class_layer():
    with pytest.raises(ValueError):
        SeasonPlan(variant=Variant.dynamic, n=10, seed=1)


def test_static_plan_has_no_daily_break_lunch(small_roster, small_friendship, light_params):
    plan = _plan(small_roster, small_friendship, light_params, Variant.static)
    with pytest.raises(ValueError):
        plan.break_lunch_for_day(1)
