"""Event records, dated releases and the append-only snapshot store.

A release is a full download of the dataset on one day. It is parsed from
delimited text into a :class:`SnapshotRelease`; rows that fail validation
are kept in a rejects report instead of being dropped silently. A
:class:`SnapshotStore` holds releases in date order together with an index
from event id to its first release date and earliest modification
timestamp.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd

from .errors import DuplicateKeyError, OrderingError, RejectError, SchemaError, UsageError

EVENT_TYPES = (
    "Battles",
    "Explosions/Remote violence",
    "Protests",
    "Riots",
    "Strategic developments",
    "Violence against civilians",
)

# header name in the file -> field name on EventRecord
REQUIRED_COLUMNS = {
    "event_id_cnty": "event_id",
    "event_date": "event_date",
    "country": "country",
    "latitude": "latitude",
    "longitude": "longitude",
    "event_type": "event_type",
    "sub_event_type": "sub_event_type",
    "fatalities": "fatalities",
    "source": "source",
    "timestamp": "timestamp_date",
}

RECORD_FIELDS = tuple(REQUIRED_COLUMNS.values())

_DATE_IN_NAME = re.compile(r"(\d{4}-\d{2}-\d{2})")


@dataclass(frozen=True)
class EventRecord:
    event_id: str
    event_date: date
    country: str
    latitude: float
    longitude: float
    event_type: str
    sub_event_type: str
    fatalities: int
    source: str
    timestamp_date: date


@dataclass(frozen=True)
class Reject:
    row: int  # 1-based data row number, header excluded
    event_id: str
    field: str
    reason: str

    def to_dict(self):
        return {"row": self.row, "event_id": self.event_id, "field": self.field, "reason": self.reason}


@dataclass
class SnapshotRelease:
    """All records of one dated download.

    ``records`` is a DataFrame with one column per :class:`EventRecord`
    field; dates are ``datetime64`` at day resolution. ``raw`` keeps the
    content exactly as received so a store can persist it untouched.
    """

    release_date: date
    records: pd.DataFrame
    rejects: list = field(default_factory=list)
    raw: bytes | None = None

    def __len__(self):
        return len(self.records)

    @property
    def event_ids(self):
        return self.records["event_id"]

    def iter_records(self) -> Iterator[EventRecord]:
        for row in self.records.itertuples(index=False):
            yield EventRecord(
                event_id=row.event_id,
                event_date=row.event_date.date(),
                country=row.country,
                latitude=float(row.latitude),
                longitude=float(row.longitude),
                event_type=row.event_type,
                sub_event_type=row.sub_event_type,
                fatalities=int(row.fatalities),
                source=row.source,
                timestamp_date=row.timestamp_date.date(),
            )


def _as_date(value) -> date:
    if isinstance(value, datetime):
        return value.date()
    if isinstance(value, date):
        return value
    if isinstance(value, pd.Timestamp):
        return value.date()
    return date.fromisoformat(str(value))


def _detect_delimiter(header_line: str) -> str:
    return "|" if header_line.count("|") > header_line.count(",") else ","


def _parse_timestamp(values: pd.Series) -> pd.Series:
    """ISO dates or Unix epoch seconds (UTC) -> datetime64 day, NaT if neither."""
    iso = pd.to_datetime(values, format="%Y-%m-%d", errors="coerce")
    is_epoch = values.str.fullmatch(r"-?\d+(\.\d+)?") & iso.isna()
    if is_epoch.any():
        secs = pd.to_numeric(values[is_epoch], errors="coerce")
        conv = pd.to_datetime(secs, unit="s", utc=True, errors="coerce").dt.tz_localize(None).dt.normalize()
        iso = iso.copy()
        iso[is_epoch] = conv
    return iso


def parse_snapshot(content, release_date, *, strict=False) -> SnapshotRelease:
    """Parse one release from delimited text.

    Parameters
    ----------
    content : bytes or str
        UTF-8 text with a header row. Comma or pipe delimited; the delimiter
        is detected from the header. Columns are located by name, so their
        order is free and extra columns are ignored.
    release_date : date or str
        Download date of the release.
    strict : bool
        Raise :class:`RejectError` if any row fails validation.

    Returns
    -------
    SnapshotRelease

    Raises
    ------
    SchemaError
        A required column is missing.
    DuplicateKeyError
        An event id occurs more than once.
    """
    release_date = _as_date(release_date)
    raw = content.encode("utf-8") if isinstance(content, str) else bytes(content)
    text = raw.decode("utf-8-sig")
    header_line = text.split("\n", 1)[0]
    if not header_line.strip():
        raise SchemaError("event_id_cnty", "snapshot has no header row")
    sep = _detect_delimiter(header_line)
    frame = pd.read_csv(
        io.StringIO(text), sep=sep, dtype=str, keep_default_na=False, na_filter=False,
        quoting=csv.QUOTE_MINIMAL,
    )
    frame.columns = [c.strip() for c in frame.columns]
    for col in REQUIRED_COLUMNS:
        if col not in frame.columns:
            raise SchemaError(col)
    frame = frame[list(REQUIRED_COLUMNS)].rename(columns=REQUIRED_COLUMNS)
    for col in frame.columns:
        frame[col] = frame[col].str.strip()

    ids = frame["event_id"]
    dup = ids[(ids != "") & ids.duplicated(keep=False)]
    if len(dup):
        raise DuplicateKeyError(set(dup))

    n = len(frame)
    reason = pd.Series([""] * n, index=frame.index, dtype=object)
    bad_field = pd.Series([""] * n, index=frame.index, dtype=object)

    def flag(mask, fieldname, why):
        mask = mask & (reason == "")
        reason[mask] = why
        bad_field[mask] = fieldname

    flag(ids == "", "event_id", "empty event id")
    event_date = pd.to_datetime(frame["event_date"], format="%Y-%m-%d", errors="coerce")
    flag(event_date.isna(), "event_date", "unparseable date")
    lat = pd.to_numeric(frame["latitude"], errors="coerce")
    lon = pd.to_numeric(frame["longitude"], errors="coerce")
    flag(lat.isna(), "latitude", "not a number")
    flag((lat < -90) | (lat > 90), "latitude", "latitude outside [-90, 90]")
    flag(lon.isna(), "longitude", "not a number")
    flag((lon < -180) | (lon > 180), "longitude", "longitude outside [-180, 180]")
    flag(~frame["event_type"].isin(EVENT_TYPES), "event_type", "unknown event type")
    fat = pd.to_numeric(frame["fatalities"], errors="coerce")
    flag(fat.isna() | (fat != np.floor(fat)), "fatalities", "not an integer")
    flag(fat < 0, "fatalities", "negative fatalities")
    ts = _parse_timestamp(frame["timestamp_date"])
    flag(ts.isna(), "timestamp", "unparseable date")

    bad = reason != ""
    rejects = [
        Reject(int(i) + 1, frame.at[i, "event_id"], bad_field[i], reason[i])
        for i in frame.index[bad]
    ]
    if strict and rejects:
        raise RejectError(rejects)

    ok = ~bad
    records = pd.DataFrame({
        "event_id": ids[ok].astype(str),
        "event_date": event_date[ok].astype("datetime64[ns]"),
        "country": frame["country"][ok],
        "latitude": lat[ok].astype(float),
        "longitude": lon[ok].astype(float),
        "event_type": frame["event_type"][ok],
        "sub_event_type": frame["sub_event_type"][ok],
        "fatalities": fat[ok].astype(np.int64),
        "source": frame["source"][ok],
        "timestamp_date": ts[ok].astype("datetime64[ns]"),
    }).reset_index(drop=True)
    return SnapshotRelease(release_date, records, rejects, raw)


def serialize_release(release: SnapshotRelease, sep=",") -> str:
    """Write accepted records back to delimited text (timestamps as ISO dates)."""
    inverse = {v: k for k, v in REQUIRED_COLUMNS.items()}
    out = release.records.copy()
    out["event_date"] = out["event_date"].dt.strftime("%Y-%m-%d")
    out["timestamp_date"] = out["timestamp_date"].dt.strftime("%Y-%m-%d")
    out = out.rename(columns=inverse)[list(REQUIRED_COLUMNS)]
    return out.to_csv(index=False, sep=sep, lineterminator="\n")


def records_frame(records) -> pd.DataFrame:
    """Build the records DataFrame used by :class:`SnapshotRelease` from EventRecords."""
    rows = [r.__dict__ if isinstance(r, EventRecord) else dict(r) for r in records]
    frame = pd.DataFrame(rows, columns=list(RECORD_FIELDS))
    frame["event_date"] = pd.to_datetime(frame["event_date"]).astype("datetime64[ns]")
    frame["timestamp_date"] = pd.to_datetime(frame["timestamp_date"]).astype("datetime64[ns]")
    frame["fatalities"] = frame["fatalities"].astype(np.int64)
    frame["latitude"] = frame["latitude"].astype(float)
    frame["longitude"] = frame["longitude"].astype(float)
    return frame


def release_from_records(records, release_date) -> SnapshotRelease:
    release = SnapshotRelease(_as_date(release_date), records_frame(records))
    release.raw = serialize_release(release).encode("utf-8")
    return release


def _empty_index():
    return pd.DataFrame(
        {"first_seen": pd.Series(dtype="datetime64[ns]"),
         "timestamp": pd.Series(dtype="datetime64[ns]")},
        index=pd.Index([], dtype=object, name="event_id"),
    )


def _fold_index(index: pd.DataFrame, release: SnapshotRelease) -> pd.DataFrame:
    rec = release.records
    ts = pd.Series(rec["timestamp_date"].to_numpy(), index=pd.Index(rec["event_id"], name="event_id"))
    seen = ts.index.isin(index.index)
    if seen.any():
        old = ts[seen]
        current = index.loc[old.index, "timestamp"]
        index.loc[old.index, "timestamp"] = np.minimum(current.to_numpy(), old.to_numpy())
    new = ts[~seen]
    if len(new):
        add = pd.DataFrame(
            {"first_seen": pd.Timestamp(release.release_date), "timestamp": new.to_numpy()},
            index=new.index,
        ).astype("datetime64[ns]")
        index = add if index.empty else pd.concat([index, add])
    return index


def rebuild_index(releases) -> pd.DataFrame:
    """Index from scratch: event id -> (first release date, earliest timestamp)."""
    index = _empty_index()
    for release in releases:
        index = _fold_index(index, release)
    return index


class SnapshotStore:
    """Date-ordered releases plus the first-appearance index.

    A single writer appends releases; readers may share a built store.
    """

    def __init__(self, releases=()):
        self.releases: list[SnapshotRelease] = []
        self.index = _empty_index()
        for release in releases:
            self.append(release)

    def __len__(self):
        return len(self.releases)

    @property
    def release_dates(self):
        return [r.release_date for r in self.releases]

    def append(self, release: SnapshotRelease) -> "SnapshotStore":
        if self.releases and release.release_date <= self.releases[-1].release_date:
            raise OrderingError(
                f"release {release.release_date} is not after the last stored "
                f"release {self.releases[-1].release_date}"
            )
        self.releases.append(release)
        self.index = _fold_index(self.index, release)
        return self

    def release_at(self, when) -> SnapshotRelease:
        when = _as_date(when)
        for release in self.releases:
            if release.release_date == when:
                return release
        raise KeyError(when)

    def first_seen(self, event_id):
        row = self.index.loc[event_id]
        return row["first_seen"].date(), row["timestamp"].date()

    # persistence -----------------------------------------------------

    def save(self, path):
        """Write ``releases/<date>.csv`` for each release and ``index.json``.

        Release files that already exist are left untouched.
        """
        path = Path(path)
        rel_dir = path / "releases"
        rel_dir.mkdir(parents=True, exist_ok=True)
        for release in self.releases:
            target = rel_dir / f"{release.release_date.isoformat()}.csv"
            if target.exists():
                continue
            data = release.raw if release.raw is not None else serialize_release(release).encode("utf-8")
            target.write_bytes(data)
        index = self.index.sort_index()
        payload = {
            "releases": [d.isoformat() for d in self.release_dates],
            "index": {
                eid: [fs.strftime("%Y-%m-%d"), ts.strftime("%Y-%m-%d")]
                for eid, fs, ts in zip(index.index, index["first_seen"], index["timestamp"])
            },
        }
        (path / "index.json").write_text(json.dumps(payload, indent=0, sort_keys=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path, *, strict=False) -> "SnapshotStore":
        path = Path(path)
        rel_dir = path / "releases"
        if not rel_dir.is_dir():
            raise UsageError(f"{path} is not a snapshot store (no releases/ directory)")
        files = sorted(rel_dir.glob("*.csv"), key=lambda p: release_date_from_name(p.name))
        return cls(parse_snapshot(f.read_bytes(), release_date_from_name(f.name), strict=strict) for f in files)

    @staticmethod
    def read_index(path):
        """Load ``index.json`` as a DataFrame (same layout as ``store.index``)."""
        payload = json.loads((Path(path) / "index.json").read_text(encoding="utf-8"))
        items = payload["index"]
        frame = pd.DataFrame.from_dict(items, orient="index", columns=["first_seen", "timestamp"])
        frame.index.name = "event_id"
        for col in frame.columns:
            frame[col] = pd.to_datetime(frame[col]).astype("datetime64[ns]")
        return frame


def release_date_from_name(name) -> date:
    m = _DATE_IN_NAME.search(str(name))
    if not m:
        raise UsageError(f"no YYYY-MM-DD release date in file name {name!r}")
    return date.fromisoformat(m.group(1))


def append_release(store: SnapshotStore, release: SnapshotRelease) -> SnapshotStore:
    return store.append(release)
