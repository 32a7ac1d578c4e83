"""
A smooth discrete-time hazard model
===================================

Each event contributes one Bernoulli row per week it stays unreported.
The weekly hazard has a complementary log-log link, a smooth baseline
per event type, smooth country covariates and two categorical effects.
Smoothing parameters are chosen by GCV.
"""

import warnings

import numpy as np

from delaylens.gam import (ModelSpec, baseline_hazard_curve, coefficient_table, fit_model,
                           partial_effect)
from delaylens.synth import SimConfig, centered_truth, simulate_delays, smooth_truths

frame, sim = simulate_delays(SimConfig.calibrated(seed=3, n_events=8000, n_countries=40))
print(f"{len(frame)} events, {frame['censored'].mean():.1%} still unreported after 20 weeks")

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    fit = fit_model(ModelSpec.m1(), frame)
print(f"{fit.n_rows} person-weeks, deviance {fit.deviance:.1f}")

###############################################################################
# Regime and internet effects on the cloglog scale, next to the values
# used to simulate the data.

table = coefficient_table(fit)
table["truth"] = [-0.2, 0.25, 0.15]
print(table[["block", "term", "estimate", "se", "truth"]].round(3))

###############################################################################
# Effective degrees of freedom show how much wiggle GCV allowed each smooth.

for name, edf in fit.edf.items():
    if name.startswith("s("):
        print(f"{name:40s} {edf:5.2f}")

###############################################################################
# Baseline weekly hazard of battles with its pointwise 95% band.

curve = baseline_hazard_curve(fit, "Battles")
print(curve[["t", "hazard", "lower", "upper"]].iloc[::4].round(3))

###############################################################################
# The estimated effect of log population against the simulated sine curve,
# both centered over the data.

x = frame["logPOP"].to_numpy()
grid = np.linspace(*np.percentile(x, [5, 95]), 7)
est = partial_effect(fit, "logPOP", grid=grid)
truth = [s for s in smooth_truths(sim.truth) if s.variable == "logPOP"][0]
target = centered_truth(truth, grid, x, np.minimum(frame["delay_weeks"], 20))
for g, e, s, t in zip(grid, est.estimate, est.se, target):
    print(f"logPOP {g:6.2f}  estimate {e:+.3f} (se {s:.3f})  truth {t:+.3f}")
