"""Event-level and country-level covariates.

Distances are great circles on a sphere of radius 6371 km. Border distance
is the distance to the nearest vertex of densified border polylines, and
buffer population sums raster cells whose centroids lie within the radius
(boundary inclusive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from .delays import CleaningConfig, winsorize
from .errors import GeoDomainError, MissingReferenceError, SchemaError

EARTH_RADIUS_KM = 6371.0

REGIMES = ("Closed Autocracy", "Electoral Autocracy", "Democracy")

COVARIATE_FIELDS = (
    "logGDP", "logPOP", "logFATALITY_cum", "GOVCENSOR", "SELFCENSOR", "internet", "regime",
    "logBORDER", "logPOP50km", "logDISTANCE", "logFATALITY_wk",
)

# variables defined per country: percentiles are taken over countries, not events
COUNTRY_LEVEL = ("gdp_pc", "population", "govcensor", "selfcensor")


def _check_coords(lat, lon):
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if np.any(~np.isfinite(lat)) or np.any(np.abs(lat) > 90) or np.any(~np.isfinite(lon)) or np.any(np.abs(lon) > 180):
        raise GeoDomainError("coordinates outside [-90, 90] x [-180, 180]")
    return lat, lon


def haversine_km(lat1, lon1, lat2, lon2):
    """Vectorized great-circle distance in km (broadcasting)."""
    lat1, lon1 = _check_coords(lat1, lon1)
    lat2, lon2 = _check_coords(lat2, lon2)
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(lon2 - lon1)
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def great_circle_km(a, b):
    """Distance in km between two ``(lat, lon)`` points."""
    return float(haversine_km(a[0], a[1], b[0], b[1]))


def _unit_vectors(lat, lon):
    phi, lmb = np.radians(lat), np.radians(lon)
    return np.column_stack([np.cos(phi) * np.cos(lmb), np.cos(phi) * np.sin(lmb), np.sin(phi)])


def _chord(km):
    return 2.0 * np.sin(np.asarray(km, dtype=float) / (2.0 * EARTH_RADIUS_KM))


def densify_polyline(vertices, max_km=1.0):
    """Insert great-circle points so consecutive vertices are at most ``max_km`` apart."""
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return pts.copy()
    out = [pts[:1]]
    for (la0, lo0), (la1, lo1) in zip(pts[:-1], pts[1:]):
        d = great_circle_km((la0, lo0), (la1, lo1))
        n = max(1, math.ceil(d / max_km))
        if d == 0:
            continue
        u0, u1 = _unit_vectors(la0, lo0)[0], _unit_vectors(la1, lo1)[0]
        omega = d / EARTH_RADIUS_KM
        f = np.arange(1, n + 1)[:, None] / n
        seg = (np.sin((1 - f) * omega) * u0 + np.sin(f * omega) * u1) / np.sin(omega)
        lat = np.degrees(np.arcsin(np.clip(seg[:, 2], -1, 1)))
        lon = np.degrees(np.arctan2(seg[:, 1], seg[:, 0]))
        out.append(np.column_stack([lat, lon]))
    return np.vstack(out)


@dataclass
class PopulationRaster:
    """Raster consumed as a list of cell centroids with population counts."""

    lon: np.ndarray
    lat: np.ndarray
    pop: np.ndarray
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.lon = np.asarray(self.lon, dtype=float)
        self.lat = np.asarray(self.lat, dtype=float)
        self.pop = np.asarray(self.pop, dtype=float)
        _check_coords(self.lat, self.lon)
        if np.any(self.pop < 0):
            raise ValueError("raster population must be nonnegative")

    @property
    def tree(self):
        if self._tree is None:
            self._tree = cKDTree(_unit_vectors(self.lat, self.lon))
        return self._tree

    @classmethod
    def read_csv(cls, path):
        frame = pd.read_csv(path)
        return cls(frame["lon"].to_numpy(), frame["lat"].to_numpy(), frame["pop"].to_numpy())

    @classmethod
    def from_esri_ascii(cls, path):
        """Read an ESRI ASCII grid into cell centroids (nodata cells skipped)."""
        header = {}
        with open(path, encoding="utf-8") as fh:
            for _ in range(6):
                pos = fh.tell()
                line = fh.readline()
                key, _, value = line.strip().partition(" ")
                if key.lower() not in ("ncols", "nrows", "xllcorner", "yllcorner", "xllcenter",
                                       "yllcenter", "cellsize", "nodata_value"):
                    fh.seek(pos)
                    break
                header[key.lower()] = float(value)
            grid = np.loadtxt(fh, ndmin=2)
        ncols, nrows, size = int(header["ncols"]), int(header["nrows"]), header["cellsize"]
        if "xllcenter" in header:
            x0, y0 = header["xllcenter"], header["yllcenter"]
        else:
            x0, y0 = header["xllcorner"] + size / 2, header["yllcorner"] + size / 2
        rows, cols = np.mgrid[0:nrows, 0:ncols]
        lon = x0 + cols * size
        lat = y0 + (nrows - 1 - rows) * size
        keep = np.ones_like(grid, dtype=bool)
        if "nodata_value" in header:
            keep = grid != header["nodata_value"]
        return cls(lon[keep], lat[keep], np.maximum(grid[keep], 0))

    def to_csv(self, path):
        pd.DataFrame({"lon": self.lon, "lat": self.lat, "pop": self.pop}).to_csv(
            path, index=False, lineterminator="\n", float_format="%.10g")


@dataclass
class GeoReference:
    capitals: dict
    borders: list
    country_table: pd.DataFrame
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)
    _vertices: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def vertices(self):
        if self._vertices is None:
            self._vertices = np.vstack(self.borders) if self.borders else np.empty((0, 2))
        return self._vertices

    @property
    def border_tree(self):
        if self._tree is None:
            if len(self.vertices) == 0:
                raise MissingReferenceError("no border polylines loaded")
            self._tree = cKDTree(_unit_vectors(self.vertices[:, 0], self.vertices[:, 1]))
        return self._tree

    @classmethod
    def load(cls, directory, densify_km=1.0):
        """Read ``capitals.csv``, ``borders.csv`` and ``country_covariates.csv``."""
        directory = Path(directory)
        caps = pd.read_csv(directory / "capitals.csv", dtype={"country": str})
        capitals = {c: (float(la), float(lo)) for c, la, lo in zip(caps["country"], caps["lat"], caps["lon"])}
        borders = []
        path = directory / "borders.csv"
        if path.exists():
            frame = pd.read_csv(path).sort_values(["polyline_id", "seq"], kind="mergesort")
            for _, g in frame.groupby("polyline_id", sort=True):
                borders.append(densify_polyline(g[["lat", "lon"]].to_numpy(), densify_km))
        table = read_country_table(directory / "country_covariates.csv")
        return cls(capitals, borders, table)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(
            [(c, la, lo) for c, (la, lo) in sorted(self.capitals.items())], columns=["country", "lat", "lon"]
        ).to_csv(directory / "capitals.csv", index=False, lineterminator="\n", float_format="%.10g")
        rows = [(i, j, la, lo) for i, line in enumerate(self.borders) for j, (la, lo) in enumerate(line)]
        pd.DataFrame(rows, columns=["polyline_id", "seq", "lat", "lon"]).to_csv(
            directory / "borders.csv", index=False, lineterminator="\n", float_format="%.10g")
        write_country_table(self.country_table, directory / "country_covariates.csv")


def read_country_table(path) -> pd.DataFrame:
    table = pd.read_csv(path, dtype={"country": str}).set_index("country")
    table["internet"] = table["internet"].astype(int)
    table["regime"] = [REGIMES[int(r)] if str(r).isdigit() else str(r) for r in table["regime"]]
    bad = set(table["regime"]) - set(REGIMES)
    if bad:
        raise ValueError(f"unknown regime codes: {sorted(bad)}")
    return table


def write_country_table(table: pd.DataFrame, path):
    out = table.copy()
    out["regime"] = [REGIMES.index(r) for r in out["regime"]]
    out = out.reset_index()[["country", "gdp_pc", "population", "govcensor", "selfcensor", "internet", "regime"]]
    out.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")


# --- single-event operations -------------------------------------------

def _event_latlon(event):
    if isinstance(event, dict):
        return event["lat"], event["lon"]
    if hasattr(event, "lat"):
        return event.lat, event.lon
    return event.latitude, event.longitude


def dist_to_capital(event, georef: GeoReference):
    country = event["country"] if isinstance(event, dict) else event.country
    if country not in georef.capitals:
        raise MissingReferenceError(f"no capital for country {country!r}")
    return great_circle_km(_event_latlon(event), georef.capitals[country])


def dist_to_border(event, georef: GeoReference):
    lat, lon = _event_latlon(event)
    return float(border_distance_km([lat], [lon], georef)[0])


def buffer_population(event, raster: PopulationRaster, radius_km=50.0):
    lat, lon = _event_latlon(event)
    return float(buffer_population_many([lat], [lon], raster, radius_km)[0])


# --- vectorized versions -------------------------------------------------

def border_distance_km(lat, lon, georef: GeoReference):
    lat, lon = _check_coords(lat, lon)
    _, idx = georef.border_tree.query(_unit_vectors(lat, lon), k=1)
    v = georef.vertices[idx]
    return haversine_km(lat, lon, v[:, 0], v[:, 1])


def buffer_population_many(lat, lon, raster: PopulationRaster, radius_km=50.0):
    lat, lon = _check_coords(lat, lon)
    if len(raster.pop) == 0:
        return np.zeros(len(lat))
    # chord search with slack, then the exact great-circle test
    r = float(_chord(radius_km)) * (1 + 1e-9) + 1e-12
    hits = raster.tree.query_ball_point(_unit_vectors(lat, lon), r, return_sorted=False)
    out = np.zeros(len(lat))
    for i, cand in enumerate(hits):
        if not cand:
            continue
        cand = np.asarray(cand)
        d = haversine_km(lat[i], lon[i], raster.lat[cand], raster.lon[cand])
        out[i] = raster.pop[cand][d <= radius_km].sum()
    return out


def cumulative_fatalities(records: pd.DataFrame, country, sub_event_type, as_of, since="2024-01-01"):
    """Fatalities of matching events dated within ``[since, as_of]``."""
    as_of, since = pd.Timestamp(as_of), pd.Timestamp(since)
    m = (
        (records["country"] == country) & (records["sub_event_type"] == sub_event_type)
        & (records["event_date"] >= since) & (records["event_date"] <= as_of)
    )
    return int(records.loc[m, "fatalities"].sum())


def cumulative_fatalities_all(records: pd.DataFrame, since="2024-01-01"):
    """Per record: cumulative fatalities of its (country, sub-event type) up to its date.

    Same-day events are all included, so every record counts its own deaths.
    """
    since = pd.Timestamp(since)
    dates = pd.to_datetime(records["event_date"])
    frame = pd.DataFrame({
        "country": records["country"].to_numpy(), "sub": records["sub_event_type"].to_numpy(),
        "date": dates.to_numpy(),
        "fat": np.where(dates >= since, records["fatalities"].to_numpy(), 0),
    })
    daily = frame.groupby(["country", "sub", "date"], sort=True)["fat"].sum()
    cum = daily.groupby(level=[0, 1]).cumsum()
    keys = pd.MultiIndex.from_arrays([frame["country"], frame["sub"], frame["date"]])
    out = cum.reindex(keys).to_numpy()
    return np.where(frame["date"] >= since, out, 0).astype(np.int64)


def _iso_week_keys(dates):
    iso = pd.to_datetime(dates).dt.isocalendar()
    return iso["year"].to_numpy(), iso["week"].to_numpy()


def weekly_fatalities(records: pd.DataFrame, event):
    """Fatalities of events in the event's country during its ISO week."""
    ev_date = pd.Timestamp(event["event_date"] if isinstance(event, dict) else event.event_date)
    country = event["country"] if isinstance(event, dict) else event.country
    y, w = ev_date.isocalendar()[:2]
    ry, rw = _iso_week_keys(records["event_date"])
    m = (records["country"].to_numpy() == country) & (ry == y) & (rw == w)
    return int(records["fatalities"].to_numpy()[m].sum())


def weekly_totals(records: pd.DataFrame):
    """Per record: (fatalities, event count) in its country and ISO week."""
    y, w = _iso_week_keys(records["event_date"])
    key = pd.DataFrame({"c": records["country"].to_numpy(), "y": y, "w": w})
    fat = pd.Series(records["fatalities"].to_numpy()).groupby([key["c"], key["y"], key["w"]]).transform("sum")
    cnt = fat.groupby([key["c"], key["y"], key["w"]]).transform("size")
    return fat.to_numpy().astype(np.int64), cnt.to_numpy().astype(np.int64)


def assemble_covariates(records: pd.DataFrame, georef: GeoReference, raster: PopulationRaster | None = None,
                        config: CleaningConfig | None = None, *, radius_km=50.0, since="2024-01-01"):
    """Attach the covariate vector to delay records.

    Raw quantities are kept (``dist_capital_km``, ``dist_border_km``,
    ``pop50km``, ``fatalities_cum``, ``fatalities_wk``, ``events_wk``,
    ``gdp_pc``, ``population``). Winsor rules from ``config`` are applied to
    the raw values; logs follow (``log1p`` for counts and distances, ``log``
    for GDP per capita).

    Returns
    -------
    covariates : DataFrame
        Input columns plus raw quantities and :data:`COVARIATE_FIELDS`.
    rejects : DataFrame
        Records whose country lacks a capital or country-table entry.
    """
    config = config or CleaningConfig()
    frame = records.reset_index(drop=True).copy()
    known = frame["country"].isin(set(georef.capitals) & set(georef.country_table.index))
    rejects = frame.loc[~known, ["event_id", "country"]].assign(reason="missing country reference")
    # aggregates use all records, including rejected ones
    fat_cum = cumulative_fatalities_all(frame, since=since)
    fat_wk, n_wk = weekly_totals(frame)
    frame = frame.assign(fatalities_cum=fat_cum, fatalities_wk=fat_wk, events_wk=n_wk)
    frame = frame[known.to_numpy()].reset_index(drop=True)

    cap = np.array([georef.capitals[c] for c in frame["country"]]).reshape(-1, 2)
    frame["dist_capital_km"] = haversine_km(frame["lat"], frame["lon"], cap[:, 0], cap[:, 1])
    frame["dist_border_km"] = border_distance_km(frame["lat"], frame["lon"], georef) if georef.borders else np.nan
    if raster is not None:
        frame["pop50km"] = buffer_population_many(frame["lat"], frame["lon"], raster, radius_km)
    else:
        frame["pop50km"] = np.nan
    table = georef.country_table.loc[frame["country"]]
    for col in ("gdp_pc", "population", "govcensor", "selfcensor", "internet", "regime"):
        frame[col] = table[col].to_numpy()

    for var, side, p in config.winsor_rules:
        if var not in frame or frame[var].isna().all() or frame.empty:
            continue
        if var in COUNTRY_LEVEL:
            per_country = frame.groupby("country", sort=True)[var].first()
            clamped = pd.Series(winsorize(per_country.to_numpy(), side, p), index=per_country.index)
            frame[var] = frame["country"].map(clamped).to_numpy()
        else:
            frame[var] = winsorize(frame[var].to_numpy(), side, p)

    frame["logGDP"] = np.log(frame["gdp_pc"].astype(float))
    frame["logPOP"] = np.log1p(frame["population"].astype(float))
    frame["logFATALITY_cum"] = np.log1p(frame["fatalities_cum"].astype(float))
    frame["GOVCENSOR"] = frame["govcensor"].astype(float)
    frame["SELFCENSOR"] = frame["selfcensor"].astype(float)
    frame["internet"] = frame["internet"].astype(int)
    frame["logBORDER"] = np.log1p(frame["dist_border_km"].astype(float))
    frame["logPOP50km"] = np.log1p(frame["pop50km"].astype(float))
    frame["logDISTANCE"] = np.log1p(frame["dist_capital_km"].astype(float))
    frame["logFATALITY_wk"] = np.log1p(frame["fatalities_wk"].astype(float))
    frame["logEVENTS_wk"] = np.log1p(frame["events_wk"].astype(float))
    return frame, rejects.reset_index(drop=True)


def read_covariates(path) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype={"event_id": str, "country": str, "source": str, "event_type": str,
                                     "sub_event_type": str, "regime": str}, keep_default_na=False,
                        na_values={c: [""] for c in ("logBORDER", "logPOP50km", "dist_border_km", "pop50km")})
    for col in ("event_id", "country", "delay_weeks", "censored"):
        if col not in frame:
            raise SchemaError(col, f"{path}: missing required column {col!r}")
    for col in ("event_date", "first_seen"):
        if col in frame:
            frame[col] = pd.to_datetime(frame[col]).astype("datetime64[ns]")
    if "censored" in frame:
        frame["censored"] = frame["censored"].astype(str).str.lower().isin(["true", "1"])
    return frame


def write_covariates(frame: pd.DataFrame, path):
    out = frame.copy()
    for col in ("event_date", "first_seen"):
        if col in out:
            out[col] = pd.to_datetime(out[col]).dt.strftime("%Y-%m-%d")
    if "censored" in out:
        out["censored"] = out["censored"].map({True: "true", False: "false"})
    out.to_csv(path, index=False, lineterminator="\n", float_format="%.12g")
