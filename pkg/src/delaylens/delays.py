"""Reporting delays from a release history, and the cleaning rules applied to them.

Delays are counted in weeks as ``ceil(days / 7)`` with a floor of one week,
then capped at ``d_max``: anything longer is recorded as ``d_max`` and
flagged censored. The uncapped value is kept in ``delay_uncapped`` so long
horizons stay available for Kaplan-Meier summaries.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from datetime import date

import numpy as np
import pandas as pd

from .errors import ChronologyError, SchemaError, UsageError
from .events import SnapshotRelease, SnapshotStore, _as_date

DELAY_COLUMNS = [
    "event_id", "event_date", "first_seen", "delay_weeks", "censored", "country",
    "event_type", "sub_event_type", "fatalities", "source", "lat", "lon",
]

DEFAULT_WINSOR_RULES = (
    ("dist_capital_km", "upper", 99.0),
    ("pop50km", "lower", 1.0),
    ("gdp_pc", "lower", 5.0),
)


@dataclass(frozen=True)
class DelayRecord:
    event_id: str
    occurrence_date: date
    first_seen_date: date
    delay_weeks: int
    censored: bool
    country: str
    event_type: str
    sub_event_type: str
    fatalities: int
    source: str
    lat: float
    lon: float
    delay_uncapped: int | None = None

    def __post_init__(self):
        if self.first_seen_date <= self.occurrence_date:
            raise ChronologyError(f"{self.event_id}: first seen on or before occurrence")
        if self.delay_weeks < 1:
            raise ValueError("delay_weeks must be >= 1")


@dataclass
class CleaningConfig:
    d_max: int = 20
    historical_delay_threshold: int = 40
    historical_batch_min: int = 100
    country_min_events: int = 10
    country_exclusions: tuple = ()
    winsor_rules: tuple = DEFAULT_WINSOR_RULES
    # drop only the long-delay records of a flagged batch (False: whole group)
    remove_whole_group: bool = False
    on_missing_country: str = "drop"

    def __post_init__(self):
        for name in ("d_max", "historical_delay_threshold", "historical_batch_min", "country_min_events"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive")
        for var, side, p in self.winsor_rules:
            if side not in ("lower", "upper"):
                raise UsageError(f"winsor side must be lower or upper, got {side!r}")
            if not 0 < p < 100:
                raise UsageError(f"winsor percentile must be in (0, 100), got {p}")
        if self.on_missing_country not in ("drop", "keep", "error"):
            raise UsageError("on_missing_country must be drop, keep or error")
        self.country_exclusions = tuple(self.country_exclusions)
        self.winsor_rules = tuple(tuple(r) for r in self.winsor_rules)


def compute_delay(occurred, reported, d_max=20):
    """Weekly delay between occurrence and first appearance.

    Returns
    -------
    (delay_weeks, censored) : (int, bool)
        ``min(d_max, max(1, ceil(days / 7)))`` and whether the uncapped
        value exceeds ``d_max``.

    Raises
    ------
    ChronologyError
        If ``reported <= occurred``.
    """
    days = (_as_date(reported) - _as_date(occurred)).days
    if days <= 0:
        raise ChronologyError(f"reported {reported} is not after occurrence {occurred}")
    weeks = max(1, math.ceil(days / 7))
    return min(d_max, weeks), weeks > d_max


def weeks_between(occurred, reported):
    """Vectorized uncapped delay in weeks; NaN where ``reported <= occurred``."""
    days = (pd.to_datetime(reported) - pd.to_datetime(occurred)).dt.days.to_numpy(dtype=float)
    weeks = np.maximum(1.0, np.ceil(days / 7.0))
    weeks[~(days > 0)] = np.nan
    return weeks


def diff_releases(store: SnapshotStore, release: SnapshotRelease) -> set:
    """Event ids in ``release`` absent from every earlier release of ``store``."""
    earlier = [r for r in store.releases if r.release_date < release.release_date]
    if not earlier:
        return set(release.event_ids)
    seen = pd.Index(pd.concat([r.event_ids for r in earlier], ignore_index=True).unique())
    ids = release.event_ids
    return set(ids[~ids.isin(seen)])


def build_delay_dataset(store: SnapshotStore, window=None, config: CleaningConfig | None = None,
                        *, delay_from="release", exclude_pre_window=False):
    """One delay record per event first seen after the baseline release.

    Parameters
    ----------
    store : SnapshotStore
    window : (start, end), optional
        The baseline is the latest release dated on or before ``start``;
        events first seen strictly after it and on or before ``end`` are
        kept. Defaults to the first and last stored releases.
    config : CleaningConfig, optional
        Only ``d_max`` is used here.
    delay_from : {"release", "timestamp"}
        Measure the delay to the first release date containing the event
        (default) or to its earliest recorded modification timestamp.
    exclude_pre_window : bool
        Drop events that occurred before the window start.

    Returns
    -------
    delays : DataFrame
        Columns :data:`DELAY_COLUMNS` plus ``delay_uncapped``.
    rejects : DataFrame
        Events whose first appearance does not follow their occurrence.
    """
    config = config or CleaningConfig()
    if len(store) == 0:
        raise UsageError("snapshot store is empty")
    if delay_from not in ("release", "timestamp"):
        raise UsageError("delay_from must be 'release' or 'timestamp'")
    start, end = window if window is not None else (store.release_dates[0], store.release_dates[-1])
    start, end = _as_date(start), _as_date(end)
    baseline = [r for r in store.releases if r.release_date <= start]
    if not baseline:
        raise UsageError(f"no baseline release on or before {start}")
    base_date = baseline[-1].release_date

    index = store.index
    parts = []
    for release in store.releases:
        if not base_date < release.release_date <= end:
            continue
        rec = release.records
        first = index.loc[rec["event_id"].to_numpy(), "first_seen"].to_numpy()
        new = rec[first == np.datetime64(pd.Timestamp(release.release_date))]
        if len(new):
            new = new.assign(first_seen=pd.Timestamp(release.release_date))
            parts.append(new)
    if not parts:
        empty = pd.DataFrame({c: pd.Series(dtype=object) for c in DELAY_COLUMNS + ["delay_uncapped"]})
        return empty, pd.DataFrame(columns=["event_id", "event_date", "first_seen", "reason"])
    frame = pd.concat(parts, ignore_index=True)
    frame["earliest_timestamp"] = index.loc[frame["event_id"].to_numpy(), "timestamp"].to_numpy()
    if exclude_pre_window:
        frame = frame[frame["event_date"] >= pd.Timestamp(start)].reset_index(drop=True)

    reported = frame["first_seen"] if delay_from == "release" else frame["earliest_timestamp"]
    weeks = weeks_between(frame["event_date"], reported)
    bad = np.isnan(weeks)
    rejects = frame.loc[bad, ["event_id", "event_date", "first_seen"]].assign(
        reason="first appearance is not after occurrence"
    )
    frame = frame[~bad].reset_index(drop=True)
    weeks = weeks[~bad].astype(np.int64)

    out = pd.DataFrame({
        "event_id": frame["event_id"],
        "event_date": frame["event_date"],
        "first_seen": frame["first_seen"] if delay_from == "release" else frame["earliest_timestamp"],
        "delay_weeks": np.minimum(weeks, config.d_max),
        "censored": weeks > config.d_max,
        "country": frame["country"],
        "event_type": frame["event_type"],
        "sub_event_type": frame["sub_event_type"],
        "fatalities": frame["fatalities"].astype(np.int64),
        "source": frame["source"],
        "lat": frame["latitude"],
        "lon": frame["longitude"],
        "delay_uncapped": weeks,
    })
    out = out.sort_values(["first_seen", "event_id"], kind="mergesort").reset_index(drop=True)
    return out, rejects.reset_index(drop=True)


def filter_historical_batches(records: pd.DataFrame, config: CleaningConfig | None = None):
    """Remove bulk uploads of very old events.

    A group is the set of records sharing ``(first_seen, country, source)``.
    A group is flagged when at least ``historical_batch_min`` of its records
    have an uncapped delay above ``historical_delay_threshold``. The long
    delays of a flagged group are removed (the whole group when
    ``config.remove_whole_group``).

    Returns
    -------
    kept : DataFrame
    report : list of dict
        One entry per flagged group with its key, size and number removed.
    """
    config = config or CleaningConfig()
    if records.empty:
        return records.copy(), []
    long = records["delay_uncapped"] > config.historical_delay_threshold
    keys = ["first_seen", "country", "source"]
    n_long = long.groupby([records[k] for k in keys]).transform("sum")
    flagged = n_long >= config.historical_batch_min
    drop = flagged if config.remove_whole_group else (flagged & long)
    report = []
    if flagged.any():
        grouped = records[flagged].assign(_drop=drop[flagged], _long=long[flagged]).groupby(keys, sort=True)
        for (fs, country, source), g in grouped:
            report.append({
                "first_seen": pd.Timestamp(fs).strftime("%Y-%m-%d"),
                "country": country,
                "source": source,
                "group_size": int(len(g)),
                "long_delays": int(g["_long"].sum()),
                "removed": int(g["_drop"].sum()),
                "reason": f">= {config.historical_batch_min} records delayed more than "
                          f"{config.historical_delay_threshold} weeks",
            })
    return records[~drop].reset_index(drop=True), report


def filter_countries(records: pd.DataFrame, reference_counts, config: CleaningConfig | None = None):
    """Drop countries with too few reference-year events or on the exclusion list.

    A country is kept when its reference count is at least
    ``country_min_events``. Countries absent from ``reference_counts`` are
    handled per ``config.on_missing_country``.
    """
    config = config or CleaningConfig()
    counts = dict(reference_counts)
    countries = records["country"]
    missing = sorted(set(countries) - set(counts))
    if missing:
        if config.on_missing_country == "error":
            raise UsageError(f"countries missing from reference counts: {', '.join(missing)}")
        warnings.warn(
            f"countries missing from reference counts ({config.on_missing_country}): {', '.join(missing)}",
            stacklevel=2,
        )
    keep_missing = config.on_missing_country == "keep"
    ref = countries.map(counts)
    keep = (ref >= config.country_min_events) | (ref.isna() & keep_missing)
    keep &= ~countries.isin(config.country_exclusions)
    return records[keep.to_numpy(dtype=bool)].reset_index(drop=True)


def winsor_threshold(values, percentile):
    """Percentile by linear interpolation at rank ``1 + (n - 1) * p / 100``."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise UsageError("cannot winsorize an empty vector")
    if not 0 < percentile < 100:
        raise UsageError("percentile must be in (0, 100)")
    return float(np.percentile(x, percentile, method="linear"))


def winsorize(values, side, percentile, *, threshold=None):
    """Clamp values beyond the given percentile on one side.

    The clamp point is :func:`winsor_threshold` of ``values`` unless
    ``threshold`` is given. Clamping at a fixed threshold is idempotent;
    recomputing the percentile on already clamped data generally moves it
    inward, so a rule fitted once should be reapplied with ``threshold``.
    """
    x = np.asarray(values, dtype=float)
    q = winsor_threshold(x, percentile) if threshold is None else float(threshold)
    if side == "upper":
        return np.where(x > q, q, x)
    if side == "lower":
        return np.where(x < q, q, x)
    raise UsageError(f"side must be 'lower' or 'upper', got {side!r}")


def read_delays(path) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype={"event_id": str, "country": str, "source": str,
                                     "event_type": str, "sub_event_type": str},
                        keep_default_na=False)
    for col in ("event_id", "event_date", "first_seen", "delay_weeks", "censored"):
        if col not in frame:
            raise SchemaError(col, f"{path}: missing required column {col!r}")
    for col in ("event_date", "first_seen"):
        frame[col] = pd.to_datetime(frame[col]).astype("datetime64[ns]")
    frame["censored"] = frame["censored"].astype(str).str.lower().isin(["true", "1"])
    if "delay_uncapped" not in frame:
        frame["delay_uncapped"] = frame["delay_weeks"]
    return frame


def write_delays(frame: pd.DataFrame, path):
    out = frame[DELAY_COLUMNS + ["delay_uncapped"]].copy()
    for col in ("event_date", "first_seen"):
        out[col] = pd.to_datetime(out[col]).dt.strftime("%Y-%m-%d")
    out["censored"] = out["censored"].map({True: "true", False: "false"})
    out.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")


def to_records(frame: pd.DataFrame) -> list[DelayRecord]:
    return [
        DelayRecord(
            event_id=r.event_id, occurrence_date=r.event_date.date(), first_seen_date=r.first_seen.date(),
            delay_weeks=int(r.delay_weeks), censored=bool(r.censored), country=r.country,
            event_type=r.event_type, sub_event_type=r.sub_event_type, fatalities=int(r.fatalities),
            source=r.source, lat=float(r.lat), lon=float(r.lon), delay_uncapped=int(r.delay_uncapped),
        )
        for r in frame.itertuples(index=False)
    ]
