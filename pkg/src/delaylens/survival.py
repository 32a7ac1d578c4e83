"""Kaplan-Meier estimation and person-period expansion for weekly delays.

Time is genuinely discrete (weeks), so ties need no correction: the
product-limit estimate at week t is ``S_t = prod_{u<=t} (1 - d_u / n_u)``
where ``n_u`` counts delays recorded at ``u`` or later. A censored record
stays in the risk set through its recorded week.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import UsageError


@dataclass
class KMCurve:
    """Product-limit estimate for weeks ``t = 1..T`` (``S_0 = 1`` implicitly)."""

    t: np.ndarray
    n_risk: np.ndarray
    events: np.ndarray
    hazard: np.ndarray
    survival: np.ndarray
    se: np.ndarray | None = None

    def to_frame(self, include_se=True):
        data = {"t": self.t, "n_risk": self.n_risk, "events": self.events,
                "hazard": self.hazard, "survival": self.survival}
        if include_se and self.se is not None:
            data["se"] = self.se
        return pd.DataFrame(data)


@dataclass(frozen=True)
class PersonPeriodRow:
    event_id: str
    t: int
    y: int
    event_type: str | None = None
    covariates: dict | None = None


def survival_from_hazard(hazard):
    """``S_t = prod_{u<=t} (1 - h_u)``."""
    h = np.asarray(hazard, dtype=float)
    return np.cumprod(1.0 - h)


def kaplan_meier(weeks, censored=None, horizon=None, greenwood=True) -> KMCurve:
    """Kaplan-Meier curve of weekly delays.

    Parameters
    ----------
    weeks : array-like of int
        Recorded week of each delay (>= 1). A sequence of ``(week, censored)``
        pairs is also accepted when ``censored`` is omitted.
    censored : array-like of bool, optional
    horizon : int, optional
        Last week reported. The curve stops earlier if nobody is at risk.
    greenwood : bool
        Include Greenwood standard errors.
    """
    weeks = np.asarray(weeks)
    if censored is None:
        if weeks.ndim == 2:
            weeks, censored = weeks[:, 0], weeks[:, 1].astype(bool)
        else:
            censored = np.zeros(weeks.shape, dtype=bool)
    weeks = np.asarray(weeks, dtype=np.int64)
    censored = np.asarray(censored, dtype=bool)
    if weeks.size == 0:
        raise UsageError("kaplan_meier needs at least one delay")
    if weeks.min() < 1:
        raise UsageError("delays must be at least one week")
    last = int(weeks.max())
    if horizon is not None:
        last = min(last, int(horizon))
    exits = np.bincount(weeks, minlength=last + 2)
    # n_t: number still recorded at week t or later
    n_risk = (len(weeks) - np.concatenate([[0], np.cumsum(exits)[:-1]]))[1:last + 1]
    events = np.bincount(weeks[~censored], minlength=last + 1)[1:last + 1]
    hazard = events / n_risk
    surv = survival_from_hazard(hazard)
    se = None
    if greenwood:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(n_risk > events, events / (n_risk * (n_risk - events)), np.inf)
            cum = np.cumsum(terms)
            se = np.where(surv > 0, surv * np.sqrt(cum), 0.0)
    return KMCurve(np.arange(1, last + 1), n_risk.astype(np.int64), events.astype(np.int64), hazard, surv, se)


def kaplan_meier_by(delays: pd.DataFrame, by="event_type", horizon=None, uncapped=False):
    """One curve per level of ``by`` (levels in sorted order)."""
    col = "delay_uncapped" if uncapped else "delay_weeks"
    out = {}
    for level, g in delays.groupby(by, sort=True):
        cens = np.zeros(len(g), dtype=bool) if uncapped else g["censored"].to_numpy(bool)
        out[level] = kaplan_meier(g[col].to_numpy(), cens, horizon=horizon)
    return out


def expand_person_period(record, d_max=20) -> list[PersonPeriodRow]:
    """Weekly Bernoulli rows of one delay record.

    An uncensored delay ``d`` gives ``t = 1..d`` with ``y = 0, ..., 0, 1``;
    a censored one gives ``min(d, d_max)`` rows with ``y = 0``. Covariates
    are copied onto every row.
    """
    get = record.get if isinstance(record, dict) else lambda k, default=None: getattr(record, k, default)
    d = int(min(get("delay_weeks"), d_max))
    censored = bool(get("censored")) or get("delay_weeks") > d_max
    eid = get("event_id")
    etype = get("event_type")
    cov = get("covariates")
    return [PersonPeriodRow(eid, t, int(t == d and not censored), etype, cov) for t in range(1, d + 1)]


@dataclass
class PersonPeriodData:
    """Person-period expansion of an event table.

    ``events`` has one row per event; ``event_index``, ``t`` and ``y`` have
    one entry per person-period row, with rows grouped by event in input
    order and ``t`` increasing within each event.
    """

    events: pd.DataFrame
    event_index: np.ndarray
    t: np.ndarray
    y: np.ndarray
    d_max: int

    @property
    def n_rows(self):
        return len(self.y)

    @property
    def rows_per_event(self):
        return np.bincount(self.event_index, minlength=len(self.events))


def expand_frame(delays: pd.DataFrame, d_max=20) -> PersonPeriodData:
    """Vectorized :func:`expand_person_period` over a delay table."""
    events = delays.reset_index(drop=True)
    d = np.minimum(events["delay_weeks"].to_numpy(dtype=np.int64), d_max)
    if np.any(d < 1):
        raise UsageError("delays must be at least one week")
    censored = events["censored"].to_numpy(dtype=bool) | (events["delay_weeks"].to_numpy() > d_max)
    event_index = np.repeat(np.arange(len(events)), d)
    starts = np.concatenate([[0], np.cumsum(d)[:-1]])
    t = np.arange(len(event_index)) - np.repeat(starts, d) + 1
    y = np.zeros(len(event_index), dtype=np.int64)
    ends = np.cumsum(d) - 1
    y[ends[~censored]] = 1
    return PersonPeriodData(events, event_index, t.astype(np.int64), y, int(d_max))


def empirical_hazard(rows, y=None):
    """Per-week hazard ``#(t, y=1) / #(t)``; weeks with no rows are omitted.

    Parameters
    ----------
    rows : sequence of PersonPeriodRow, PersonPeriodData, or array of t
    y : array, optional
        Responses when ``rows`` is an array of week indices.

    Returns
    -------
    weeks, hazard : ndarray
    """
    if isinstance(rows, PersonPeriodData):
        t, y = rows.t, rows.y
    elif y is None:
        rows = list(rows)
        t = np.array([r.t for r in rows], dtype=np.int64)
        y = np.array([r.y for r in rows], dtype=np.int64)
    else:
        t = np.asarray(rows, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if t.size == 0:
        return np.array([], dtype=np.int64), np.array([])
    n = np.bincount(t)
    d = np.bincount(t, weights=y, minlength=len(n)).astype(np.int64)
    weeks = np.flatnonzero(n)
    return weeks, d[weeks] / n[weeks]
