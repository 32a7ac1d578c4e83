"""Inverse-probability correction of recent counts for not-yet-reported events.

An event that occurred ``d`` weeks before the cut-off date has been
reported with probability ``F(d) = 1 - prod_{t<=d} (1 - pi_t)``, so the
observed count of an occurrence week is scaled by ``1 / F(d)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats

from .errors import DataError, UsageError
from .survival import kaplan_meier

F_FLOOR = 0.05
NOWCAST_COLUMNS = ["occurrence_week", "observed", "elapsed_weeks", "F", "multiplier", "corrected"]


@dataclass(frozen=True)
class ReportingCDF:
    """``F[d - 1]`` is the probability of being reported within ``d`` weeks."""

    F: np.ndarray

    @property
    def d_max(self):
        return len(self.F)

    def at(self, d):
        """``F(d)``, taken as 1 from ``d_max`` on and 0 for ``d < 1``."""
        d = np.asarray(d, dtype=np.int64)
        idx = np.clip(d, 1, self.d_max) - 1
        out = np.where(d >= self.d_max, 1.0, self.F[idx])
        return np.where(d < 1, 0.0, out)


def reporting_cdf(hazards) -> ReportingCDF:
    """``F(d) = 1 - prod_{t<=d} (1 - pi_t)`` from per-week hazards."""
    h = np.asarray(hazards, dtype=float)
    if h.ndim != 1 or h.size == 0:
        raise UsageError("hazards must be a nonempty vector")
    if np.any((h < 0) | (h > 1)):
        raise UsageError("hazards must lie in [0, 1]")
    if np.all(h == 0):
        raise DataError("all hazards are zero: degenerate reporting distribution, no correction possible")
    return ReportingCDF(1.0 - np.cumprod(1.0 - h))


def empirical_cdf(delays: pd.DataFrame, d_max=20) -> ReportingCDF:
    """Reporting CDF from the Kaplan-Meier hazards of a cleaned delay table."""
    km = kaplan_meier(delays["delay_weeks"].to_numpy(), delays["censored"].to_numpy(bool), horizon=d_max)
    h = np.zeros(d_max)
    h[:len(km.hazard)] = km.hazard
    return reporting_cdf(h)


def weekly_counts(delays: pd.DataFrame, as_of) -> pd.DataFrame:
    """Events reported by ``as_of`` per occurrence week counted back from ``as_of``.

    An event ``days`` before ``as_of`` has ``elapsed_weeks = ceil(days / 7)``
    and belongs to the week starting ``as_of - 7 * elapsed_weeks``. Events
    dated on or after ``as_of`` are ignored.
    """
    as_of = pd.Timestamp(as_of).normalize()
    seen = delays[(pd.to_datetime(delays["first_seen"]) <= as_of) & (pd.to_datetime(delays["event_date"]) < as_of)]
    days = (as_of - pd.to_datetime(seen["event_date"])).dt.days.to_numpy()
    elapsed = -(-days // 7)
    counts = pd.Series(elapsed).value_counts().sort_index()
    return pd.DataFrame({
        "occurrence_week": [as_of - pd.Timedelta(days=7 * int(e)) for e in counts.index],
        "observed": counts.to_numpy().astype(np.int64),
        "elapsed_weeks": counts.index.to_numpy().astype(np.int64),
    }).sort_values("occurrence_week", kind="mergesort").reset_index(drop=True)


def correct_counts(observed, as_of, cdf: ReportingCDF, *, floor=F_FLOOR, interval=False, level=0.95):
    """Scale observed counts by ``1 / F(d_w)``.

    Parameters
    ----------
    observed : DataFrame or mapping
        ``occurrence_week`` (week start) and ``observed`` columns, or a
        mapping week start -> count.
    as_of : date
    cdf : ReportingCDF
    floor : float
        Weeks with ``F(d_w) < floor`` get no point correction (NaN) and a
        warning.
    interval : bool
        Add ``ci_low, ci_high`` from the binomial delta approximation
        ``Var(N) ~ N (1 - F) / F``.

    Returns
    -------
    DataFrame
        :data:`NOWCAST_COLUMNS` (plus the interval columns).
    """
    if isinstance(observed, pd.DataFrame):
        frame = observed[["occurrence_week", "observed"]].copy()
    else:
        frame = pd.DataFrame({"occurrence_week": list(observed.keys()), "observed": list(observed.values())})
    as_of = pd.Timestamp(as_of).normalize()
    frame["occurrence_week"] = pd.to_datetime(frame["occurrence_week"])
    if np.any(frame["observed"].to_numpy() < 0):
        raise DataError("observed counts must be nonnegative")
    frame["elapsed_weeks"] = ((as_of - frame["occurrence_week"]).dt.days // 7).astype(np.int64)
    if np.any(frame["elapsed_weeks"] < 1):
        raise UsageError("every occurrence week must have at least one elapsed week by as_of")
    F = cdf.at(frame["elapsed_weeks"].to_numpy())
    low = F < floor
    if low.any():
        weeks = ", ".join(str(w.date()) for w in frame.loc[low, "occurrence_week"])
        warnings.warn(f"F below {floor} for week(s) {weeks}: correction refused", RuntimeWarning, stacklevel=2)
    with np.errstate(divide="ignore"):
        mult = np.where(low, np.nan, 1.0 / np.where(F > 0, F, np.nan))
    mult = np.where(frame["elapsed_weeks"].to_numpy() >= cdf.d_max, 1.0, mult)
    frame["F"] = F
    frame["multiplier"] = mult
    frame["corrected"] = frame["observed"].to_numpy() * mult
    if interval:
        z = stats.norm.ppf(0.5 + level / 2)
        n_hat = frame["corrected"].to_numpy()
        with np.errstate(invalid="ignore", divide="ignore"):
            half = z * np.sqrt(n_hat * (1 - F) / F)
        frame["ci_low"] = np.maximum(n_hat - half, frame["observed"].to_numpy())
        frame["ci_high"] = n_hat + half
    return frame.reset_index(drop=True)


def write_nowcast(frame: pd.DataFrame, path):
    cols = NOWCAST_COLUMNS + [c for c in ("ci_low", "ci_high") if c in frame]
    out = frame[cols].copy()
    out["occurrence_week"] = pd.to_datetime(out["occurrence_week"]).dt.strftime("%Y-%m-%d")
    out.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
