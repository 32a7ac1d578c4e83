import math
from datetime import date, timedelta

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delaylens.delays import (CleaningConfig, build_delay_dataset, compute_delay, diff_releases,
                              filter_countries, filter_historical_batches, read_delays, winsor_threshold, winsorize,
                              write_delays)
from delaylens.errors import ChronologyError, UsageError
from delaylens.events import SnapshotStore, parse_snapshot
from conftest import snapshot_text


def row(eid, when, ts=None, country="Nigeria", source="Local press"):
    return (eid, when, country, 9.0, 7.0, "Battles", 0, source, ts or when)


def test_delay_within_first_week():
    assert compute_delay("2024-06-17", "2024-06-22") == (1, False)


def test_delay_rounds_up():
    assert compute_delay("2024-06-17", "2024-06-28") == (2, False)


def test_delay_exact_weeks():
    assert compute_delay("2024-06-17", "2024-06-24") == (1, False)
    assert compute_delay("2024-06-17", "2024-07-01") == (2, False)


def test_long_delay_is_censored():
    t = date(2024, 1, 1)
    assert compute_delay(t, t + timedelta(days=200), d_max=20) == (20, True)
    # 140 days is exactly 20 weeks: capped value, not censored
    assert compute_delay(t, t + timedelta(days=140)) == (20, False)
    assert compute_delay(t, t + timedelta(days=141)) == (20, True)


def test_reported_before_occurrence_raises():
    with pytest.raises(ChronologyError):
        compute_delay("2024-06-17", "2024-06-17")


@given(st.integers(1, 2000), st.integers(1, 60))
def test_delay_formula(days, d_max):
    t = date(2023, 1, 1)
    d, cens = compute_delay(t, t + timedelta(days=days), d_max)
    assert d == min(d_max, max(1, math.ceil(days / 7)))
    assert cens == (math.ceil(days / 7) > d_max)
    assert 1 <= d <= d_max


def _store(*releases):
    return SnapshotStore(parse_snapshot(snapshot_text(rows), when) for when, rows in releases)


def test_diff_identical_release_is_empty():
    store = _store(("2024-06-03", [row("A", "2024-06-01")]), ("2024-06-10", [row("A", "2024-06-01")]))
    assert diff_releases(store, store.releases[1]) == set()


def test_diff_new_event():
    store = _store(("2024-06-03", [row("A", "2024-06-01")]),
                   ("2024-06-10", [row("A", "2024-06-01"), row("B", "2024-06-05")]))
    assert diff_releases(store, store.releases[1]) == {"B"}


def test_diff_update_is_not_new():
    store = _store(("2024-06-03", [row("A", "2024-06-01")]),
                   ("2024-06-10", [row("A", "2024-06-01", ts="2024-06-08")]))
    assert diff_releases(store, store.releases[1]) == set()


def test_baseline_only_gives_empty_dataset():
    store = _store(("2024-06-03", [row("A", "2024-06-01")]))
    delays, rejects = build_delay_dataset(store)
    assert delays.empty and rejects.empty


def test_three_release_fixture():
    base = [row("A", "2024-05-20"), row("B", "2024-05-28")]
    r1 = base + [row("C", "2024-06-01"), row("D", "2024-05-01")]
    r2 = r1 + [row("E", "2024-06-06")]
    store = _store(("2024-06-03", base), ("2024-06-10", r1), ("2024-06-17", r2))
    delays, _ = build_delay_dataset(store)
    got = dict(zip(delays["event_id"], delays["delay_weeks"]))
    # C: 9 days -> 2, D: 40 days -> 6, E: 11 days -> 2
    assert got == {"C": 2, "D": 6, "E": 2}
    assert not delays["censored"].any()
    assert set(delays["first_seen"].dt.strftime("%Y-%m-%d")) == {"2024-06-10", "2024-06-17"}


def test_timestamp_delay_source():
    base = [row("A", "2024-05-20")]
    store = _store(("2024-06-03", base), ("2024-06-24", base + [row("C", "2024-06-01", ts="2024-06-05")]))
    by_release, _ = build_delay_dataset(store)
    by_stamp, _ = build_delay_dataset(store, delay_from="timestamp")
    assert by_release["delay_weeks"].tolist() == [4]
    assert by_stamp["delay_weeks"].tolist() == [1]


def test_exclude_pre_window():
    base = [row("A", "2024-05-20")]
    store = _store(("2024-06-03", base),
                   ("2024-06-10", base + [row("C", "2024-06-05"), row("D", "2024-01-05")]))
    kept, _ = build_delay_dataset(store, exclude_pre_window=True)
    assert kept["event_id"].tolist() == ["C"]
    assert len(build_delay_dataset(store)[0]) == 2


def test_chronology_violation_is_rejected():
    base = [row("A", "2024-05-20")]
    store = _store(("2024-06-03", base), ("2024-06-10", base + [row("F", "2024-06-12")]))
    delays, rejects = build_delay_dataset(store)
    assert delays.empty
    assert rejects["event_id"].tolist() == ["F"]


def test_delay_csv_round_trip(tmp_path):
    base = [row("A", "2024-05-20")]
    store = _store(("2024-06-03", base), ("2024-06-10", base + [row("C", "2024-06-01")]))
    delays, _ = build_delay_dataset(store)
    write_delays(delays, tmp_path / "d.csv")
    back = read_delays(tmp_path / "d.csv")
    pd.testing.assert_frame_equal(back[delays.columns], delays, check_dtype=False)


def batch_frame(n_batch, batch_delay=45, n_other=50):
    """Delay records with one same-day/country/source group of long delays."""
    rng = np.random.default_rng(1)
    other = pd.DataFrame({
        "event_id": [f"O{i}" for i in range(n_other)],
        "first_seen": pd.Timestamp("2024-08-05"),
        "country": "South Sudan",
        "source": "Radio Tamazuj",
        "delay_uncapped": rng.integers(1, 30, n_other),
    })
    batch = pd.DataFrame({
        "event_id": [f"B{i}" for i in range(n_batch)],
        "first_seen": pd.Timestamp("2024-08-12"),
        "country": "South Sudan",
        "source": "Archive",
        "delay_uncapped": batch_delay,
    })
    frame = pd.concat([other, batch], ignore_index=True)
    frame["delay_weeks"] = np.minimum(frame["delay_uncapped"], 20)
    frame["censored"] = frame["delay_uncapped"] > 20
    return frame


def test_large_historical_batch_removed():
    frame = batch_frame(3901)
    kept, report = filter_historical_batches(frame)
    assert len(kept) == 50
    assert not kept["event_id"].str.startswith("B").any()
    assert report == [{"first_seen": "2024-08-12", "country": "South Sudan", "source": "Archive",
                       "group_size": 3901, "long_delays": 3901, "removed": 3901,
                       "reason": ">= 100 records delayed more than 40 weeks"}]


def test_small_group_kept():
    frame = batch_frame(5)
    kept, report = filter_historical_batches(frame)
    assert len(kept) == len(frame) and report == []


def test_batch_at_threshold_boundaries():
    assert len(filter_historical_batches(batch_frame(100))[1]) == 1
    assert filter_historical_batches(batch_frame(99))[1] == []
    # exactly 40 weeks is not "more than 40"
    assert filter_historical_batches(batch_frame(200, batch_delay=40))[1] == []


def test_no_long_delays_unchanged():
    frame = batch_frame(0)
    kept, report = filter_historical_batches(frame)
    pd.testing.assert_frame_equal(kept, frame)
    assert report == []


def test_batch_removes_only_long_delays_by_default():
    frame = batch_frame(120)
    frame.loc[frame.index[-1], "delay_uncapped"] = 3
    kept, report = filter_historical_batches(frame)
    assert report[0]["removed"] == 119
    assert "B119" in set(kept["event_id"])
    kept_all, _ = filter_historical_batches(frame, CleaningConfig(remove_whole_group=True))
    assert "B119" not in set(kept_all["event_id"])


def test_country_filter_threshold():
    frame = pd.DataFrame({"country": ["A", "B", "C", "Mayotte"], "x": range(4)})
    counts = {"A": 9, "B": 10, "C": 500, "Mayotte": 50}
    kept = filter_countries(frame, counts, CleaningConfig(country_exclusions=("Mayotte",)))
    assert kept["country"].tolist() == ["B", "C"]


def test_country_filter_missing_reference():
    frame = pd.DataFrame({"country": ["A", "Z"]})
    with pytest.warns(UserWarning):
        assert filter_countries(frame, {"A": 20})["country"].tolist() == ["A"]
    with pytest.raises(UsageError):
        filter_countries(frame, {"A": 20}, CleaningConfig(on_missing_country="error"))


def test_winsorize_upper_oracle():
    x = np.arange(1, 101, dtype=float)
    out = winsorize(x, "upper", 99)
    # rank 1 + 99 * 0.99 = 99.01 -> 99 + 0.01 * (100 - 99)
    assert out.max() == pytest.approx(99.01, abs=1e-12)
    np.testing.assert_array_equal(out[:99], x[:99])


def test_winsorize_lower_oracle():
    x = np.arange(1, 101, dtype=float)
    out = winsorize(x, "lower", 1)
    assert out.min() == pytest.approx(1.99, abs=1e-12)
    np.testing.assert_array_equal(out[1:], x[1:])


def test_winsorize_rejects_bad_input():
    with pytest.raises(UsageError):
        winsorize([], "upper", 99)
    with pytest.raises(UsageError):
        winsorize([1.0], "upper", 100)
    with pytest.raises(UsageError):
        winsorize([1.0], "middle", 50)


def test_winsorize_constant_vector():
    x = np.full(7, 3.5)
    np.testing.assert_array_equal(winsorize(x, "upper", 99), x)


def _percentile_oracle(x, p):
    s = np.sort(x)
    h = (len(s) - 1) * p / 100
    lo = int(np.floor(h))
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=80), st.floats(0.5, 99.5),
       st.sampled_from(["lower", "upper"]))
@settings(max_examples=200)
def test_winsorize_properties(values, p, side):
    x = np.array(values)
    once = winsorize(x, side, p)
    q = _percentile_oracle(x, p)
    np.testing.assert_array_equal(winsorize(once, side, p, threshold=winsor_threshold(x, p)), once)
    expected = np.minimum(x, q) if side == "upper" else np.maximum(x, q)
    np.testing.assert_allclose(once, expected, rtol=1e-12, atol=1e-9)
