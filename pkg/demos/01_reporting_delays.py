"""
From weekly snapshots to reporting delays
=========================================

A simulated event dataset is released once a week. Each release is a
full cumulative download, so an event's reporting delay is read off the
first release that contains it.
"""

import numpy as np

from delaylens.delays import CleaningConfig, build_delay_dataset, filter_historical_batches
from delaylens.events import SnapshotStore
from delaylens.survival import kaplan_meier, kaplan_meier_by
from delaylens.synth import SimConfig, parsed_releases, simulate_releases

# 3000 events over 26 weeks, plus a bulk upload of 120 old events
sim = simulate_releases(SimConfig(seed=1, n_events=3000, n_countries=12, historical_batch=120))
store = SnapshotStore(parsed_releases(sim))
print(f"{len(store)} releases, {len(store.index)} distinct events")

###############################################################################
# Diffing consecutive releases gives one delay record per new event. The
# first release is the baseline: whatever it already contains is not new.

delays, rejects = build_delay_dataset(store)
print(delays[["event_id", "event_date", "first_seen", "delay_weeks", "censored"]].head())

###############################################################################
# The bulk upload shows up as a single (day, country, source) group full of
# delays beyond 40 weeks. It says nothing about routine reporting.

delays, batches = filter_historical_batches(delays, CleaningConfig())
for b in batches:
    print(b["first_seen"], b["country"], b["source"], "removed", b["removed"])

###############################################################################
# Delays are capped at 20 weeks. The Kaplan-Meier curve gives the share not
# yet reported after each week.

km = kaplan_meier(delays["delay_weeks"], delays["censored"], horizon=20)
print("not yet reported after 1, 4, 10 weeks:", np.round(km.survival[[0, 3, 9]], 3))
print("reported within 20 weeks:", round(1 - km.survival[-1], 3))

by_type = kaplan_meier_by(delays, horizon=20)
for event_type, curve in sorted(by_type.items()):
    print(f"{event_type:28s} unreported after 20 weeks: {curve.survival[-1]:.3f}")
