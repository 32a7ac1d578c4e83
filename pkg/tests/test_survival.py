import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delaylens.errors import UsageError
from delaylens.survival import (empirical_hazard, expand_frame, expand_person_period, kaplan_meier,
                                kaplan_meier_by, survival_from_hazard)
from conftest import delay_frame


def test_hand_product_limit():
    km = kaplan_meier([1, 2, 2, 3], [False, False, False, True])
    np.testing.assert_allclose(km.survival, [0.75, 0.25, 0.25])
    np.testing.assert_array_equal(km.n_risk, [4, 3, 1])
    np.testing.assert_array_equal(km.events, [1, 2, 0])


def test_pairs_input():
    km = kaplan_meier(np.array([[1, 0], [2, 0], [2, 0], [3, 1]]))
    np.testing.assert_allclose(km.survival, [0.75, 0.25, 0.25])


def test_all_events_week_one():
    km = kaplan_meier([1, 1, 1])
    assert km.survival[0] == 0


def test_all_censored():
    km = kaplan_meier([3, 5, 5], [True, True, True])
    np.testing.assert_array_equal(km.survival, np.ones(5))


def test_greenwood_hand_value():
    km = kaplan_meier([1, 2, 2, 3], [False, False, False, True])
    # sum d / (n (n - d)) over weeks 1, 2
    var = 0.25 ** 2 * (1 / (4 * 3) + 2 / (3 * 1))
    assert km.se[1] == pytest.approx(np.sqrt(var))


def test_horizon_truncates():
    km = kaplan_meier([1, 5, 30, 100], horizon=20)
    assert km.t[-1] == 20
    km_long = kaplan_meier([1, 5, 30, 100], horizon=100)
    assert km_long.t[-1] == 100 and km_long.survival[-1] == 0


def test_bad_input():
    with pytest.raises(UsageError):
        kaplan_meier([])
    with pytest.raises(UsageError):
        kaplan_meier([0, 1])


def test_by_type_blocks():
    frame = delay_frame([1, 2, 3, 4], event_type=["Riots", "Battles", "Riots", "Protests"])
    curves = kaplan_meier_by(frame)
    assert list(curves) == ["Battles", "Protests", "Riots"]


def test_expand_four():
    rows = expand_person_period({"event_id": "x", "delay_weeks": 4, "censored": False, "event_type": "Riots"})
    assert [r.t for r in rows] == [1, 2, 3, 4]
    assert [r.y for r in rows] == [0, 0, 0, 1]


def test_expand_one():
    rows = expand_person_period({"event_id": "x", "delay_weeks": 1, "censored": False, "event_type": "Riots"})
    assert [(r.t, r.y) for r in rows] == [(1, 1)]


def test_expand_censored():
    rows = expand_person_period({"event_id": "x", "delay_weeks": 20, "censored": True, "event_type": "Riots"})
    assert len(rows) == 20 and all(r.y == 0 for r in rows)


def test_expand_frame_matches_rowwise(rng):
    d = rng.integers(1, 25, 50)
    frame = delay_frame(np.minimum(d, 20), censored=d > 20)
    pp = expand_frame(frame)
    assert pp.n_rows == np.minimum(d, 20).sum()
    rows = [r for rec in frame.to_dict("records") for r in expand_person_period(rec)]
    np.testing.assert_array_equal(pp.t, [r.t for r in rows])
    np.testing.assert_array_equal(pp.y, [r.y for r in rows])
    np.testing.assert_array_equal(pp.rows_per_event, np.minimum(d, 20))


def test_empirical_hazard_row_inputs():
    rows = [r for d in (1, 2, 2) for r in expand_person_period(
        {"event_id": "x", "delay_weeks": d, "censored": False, "event_type": "B"})]
    weeks, h = empirical_hazard(rows)
    np.testing.assert_array_equal(weeks, [1, 2])
    np.testing.assert_allclose(h, [1 / 3, 1.0])


@st.composite
def fixtures(draw):
    n = draw(st.integers(1, 60))
    d = draw(st.lists(st.integers(1, 30), min_size=n, max_size=n))
    c = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    return np.array(d), np.array(c)


@given(fixtures())
@settings(max_examples=100, deadline=None)
def test_km_hazard_duality(fx):
    d, c = fx
    weeks = np.minimum(d, 20)
    cens = c | (d > 20)
    km = kaplan_meier(weeks, cens, horizon=20)
    pp = expand_frame(delay_frame(weeks, cens))
    t, h = empirical_hazard(pp)
    np.testing.assert_array_equal(t, km.t)
    np.testing.assert_array_equal(h, km.hazard)
    np.testing.assert_array_equal(survival_from_hazard(h), km.survival)


@given(fixtures())
@settings(max_examples=50, deadline=None)
def test_km_survival_monotone(fx):
    d, c = fx
    s = kaplan_meier(d, c).survival
    assert np.all(np.diff(s) <= 0) and np.all((s >= 0) & (s <= 1))
