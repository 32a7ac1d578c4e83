"""
Correcting recent counts
========================

Recent weeks look quiet because their events are not all reported yet.
Dividing each week's count by the probability of having been reported
by now undoes most of that dip.
"""

import numpy as np
import pandas as pd

from delaylens.nowcast import correct_counts, empirical_cdf, weekly_counts
from delaylens.synth import SimConfig, simulate_delays

frame, _ = simulate_delays(SimConfig(seed=4, n_events=6000, n_countries=10, occurrence_weeks=26))
as_of = pd.Timestamp(frame["event_date"].min()).normalize() + pd.Timedelta(weeks=26)

###############################################################################
# Only events reported by the cut-off count. The reporting CDF comes from the
# Kaplan-Meier hazards of events that are old enough to be fully observed.

observed = weekly_counts(frame, as_of)
history = frame[frame["event_date"] < as_of - pd.Timedelta(weeks=20)]
cdf = empirical_cdf(history)
print("F(1..5):", np.round(cdf.F[:5], 3))

###############################################################################
# Observed, corrected and true counts of the last eight weeks.

now = correct_counts(observed, as_of, cdf, interval=True)
truth = weekly_counts(frame.assign(first_seen=as_of), as_of).set_index("occurrence_week")["observed"]
now["truth"] = now["occurrence_week"].map(truth)
print(now[["occurrence_week", "elapsed_weeks", "observed", "corrected", "ci_low", "ci_high", "truth"]]
      .tail(8).round(1).to_string(index=False))
