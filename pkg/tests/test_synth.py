import json

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from delaylens.delays import CleaningConfig, build_delay_dataset, filter_historical_batches
from delaylens.errors import UsageError
from delaylens.events import SnapshotStore
from delaylens.synth import (SimConfig, ledger_frame, parsed_releases, read_truth, simulate, simulate_delays,
                             simulate_releases, write_simulation)


def pipeline_delays(sim):
    store = SnapshotStore(parsed_releases(sim))
    delays, rejects = build_delay_dataset(store, config=CleaningConfig(d_max=sim.config.d_max))
    return delays, rejects


@pytest.fixture(scope="module")
def small_sim():
    return simulate_releases(SimConfig(seed=11, n_events=1500, n_countries=8, historical_batch=150))


@pytest.fixture(scope="module")
def small_delays(small_sim):
    return pipeline_delays(small_sim)


def test_unit_hazard_gives_unit_delays():
    frame, _ = simulate_delays(SimConfig(seed=1, n_events=500, n_countries=5, constant_hazard=1.0))
    assert (frame["delay_weeks"] == 1).all()
    assert not frame["censored"].any()


def test_constant_hazard_is_geometric():
    frame, _ = simulate_delays(SimConfig(seed=2, n_events=10000, n_countries=10, constant_hazard=0.5))
    d = frame["delay_uncapped"].to_numpy()
    bins = np.arange(1, 8)
    observed = np.array([np.sum(d == k) for k in bins] + [np.sum(d >= 8)])
    p = np.r_[0.5 ** bins, 0.5 ** 7]
    chi2, pval = stats.chisquare(observed, len(d) * p)
    assert pval > 0.01


def test_same_seed_same_output():
    a = simulate_releases(SimConfig(seed=3, n_events=400, n_countries=4))
    b = simulate_releases(SimConfig(seed=3, n_events=400, n_countries=4))
    assert a.releases == b.releases
    assert a.truth == b.truth
    c = simulate_releases(SimConfig(seed=4, n_events=400, n_countries=4))
    assert a.releases != c.releases


def test_round_trip_matches_ledger(small_sim, small_delays):
    delays, rejects = small_delays
    assert rejects.empty
    batch = set(small_sim.truth["batch_ids"])
    delays = delays[~delays["event_id"].isin(batch)]
    led = ledger_frame(small_sim).set_index("event_id").loc[delays["event_id"]]
    np.testing.assert_array_equal(delays["delay_uncapped"].to_numpy(), led["true_delay"].to_numpy())
    np.testing.assert_array_equal(delays["delay_weeks"].to_numpy(), led["delay_weeks"].to_numpy())
    np.testing.assert_array_equal(delays["censored"].to_numpy(), led["censored"].to_numpy())
    assert len(delays) == small_sim.config.n_events


def test_batch_removed_exactly(small_sim, small_delays):
    delays, _ = small_delays
    kept, report = filter_historical_batches(delays)
    removed = set(delays["event_id"]) - set(kept["event_id"])
    assert removed == set(small_sim.truth["batch_ids"])
    assert len(kept) == small_sim.config.n_events
    assert [g["removed"] for g in report] == [150]


def test_releases_are_cumulative(small_sim):
    ids = [set(r.records["event_id"]) for r in parsed_releases(small_sim)]
    assert all(a <= b for a, b in zip(ids, ids[1:]))
    assert len(ids[0]) == small_sim.config.n_baseline_events


def test_calibrated_share_reported():
    _, sim = simulate_delays(SimConfig.calibrated(seed=5, n_events=20000))
    assert sim.truth["share_reported_within_d_max"] == pytest.approx(0.84, abs=0.01)


def test_truth_file_round_trip(small_sim, tmp_path):
    write_simulation(small_sim, tmp_path)
    truth = read_truth(tmp_path / "truth.json")
    assert truth["batch_ids"] == small_sim.truth["batch_ids"]
    assert len(truth["events"]) == small_sim.config.n_events + 150
    assert SimConfig.from_dict(truth["config"]) == small_sim.config
    names = sorted(p.name for p in (tmp_path / "snapshots").iterdir())
    assert len(names) == small_sim.truth["n_releases"]


def test_config_validation():
    with pytest.raises(UsageError):
        SimConfig(constant_hazard=0.0)
    with pytest.raises(UsageError):
        SimConfig(max_delay_weeks=10)
    with pytest.raises(UsageError):
        SimConfig(target_reported=1.0)


def test_write_requires_releases(tmp_path):
    with pytest.raises(UsageError):
        write_simulation(simulate(SimConfig(n_events=50, n_countries=2)), tmp_path)
