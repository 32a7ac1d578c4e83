"""Seeded synthetic snapshot sequences with known reporting hazards.

Events, locations and fatalities are drawn first; covariates are then
computed with :func:`delaylens.geo.assemble_covariates`, exactly as the
pipeline computes them, and each event's reporting week is drawn by
sequential Bernoulli trials under the cloglog hazard

    pi_it = 1 - exp(-exp(b(t, type_i) + x_i' beta + sum_j f_j(x_ij)))

Weeks beyond ``d_max`` keep the week-``d_max`` hazard until
``max_delay_weeks``, when reporting is forced. An event occurring on day
``T`` with delay ``d`` appears in the first weekly release dated after
``T + 7 (d - 1)``, so the pipeline's ``ceil(days / 7)`` rule recovers ``d``
exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

from .delays import CleaningConfig
from .errors import UsageError
from .events import EVENT_TYPES, REQUIRED_COLUMNS, parse_snapshot
from .geo import REGIMES, GeoReference, PopulationRaster, assemble_covariates

SUB_EVENT_TYPES = {
    "Battles": ("Armed clash", "Government regains territory", "Non-state actor overtakes territory"),
    "Explosions/Remote violence": ("Air/drone strike", "Shelling/artillery/missile attack",
                                   "Remote explosive/landmine/IED"),
    "Protests": ("Peaceful protest", "Protest with intervention", "Excessive force against protesters"),
    "Riots": ("Violent demonstration", "Mob violence"),
    "Strategic developments": ("Arrests", "Looting/property destruction", "Disrupted weapons use"),
    "Violence against civilians": ("Attack", "Abduction/forced disappearance", "Sexual violence"),
}
TYPE_SHARES = (0.20, 0.10, 0.35, 0.12, 0.08, 0.15)
FATAL_MEAN = {"Battles": 4.0, "Explosions/Remote violence": 3.0, "Protests": 0.05, "Riots": 0.4,
              "Strategic developments": 0.1, "Violence against civilians": 2.0}
SHAPES = ("constant", "decreasing", "U", "reverse_U")
SMOOTH_KINDS = ("zero", "linear", "sine", "quadratic")


@dataclass(frozen=True)
class BaselineShape:
    """``level + amplitude * g(u)`` on the linear-predictor scale, ``u = (t - 1) / (d_max - 1)``.

    ``g`` is 0 (constant), ``-u`` (decreasing), ``(2u - 1)^2`` (U) or
    ``-(2u - 1)^2`` (reverse_U).
    """

    kind: str = "decreasing"
    level: float = -1.5
    amplitude: float = 0.5

    def __post_init__(self):
        if self.kind not in SHAPES:
            raise UsageError(f"unknown baseline shape {self.kind!r}")

    def eta(self, t, d_max):
        u = (np.minimum(np.asarray(t, dtype=float), d_max) - 1) / max(d_max - 1, 1)
        g = {"constant": 0 * u, "decreasing": -u, "U": (2 * u - 1) ** 2, "reverse_U": -(2 * u - 1) ** 2}[self.kind]
        return self.level + self.amplitude * g


@dataclass(frozen=True)
class SmoothTruth:
    """Effect ``f(z)`` of a standardized covariate ``z = (x - center) / scale``.

    ``linear``: ``a z``; ``sine``: ``a sin(z)``; ``quadratic``: ``a (z^2 - 1)``.
    Center and scale default to the mean and standard deviation of the
    generated covariate.
    """

    variable: str
    kind: str = "linear"
    amplitude: float = 0.1
    center: float | None = None
    scale: float | None = None

    def __post_init__(self):
        if self.kind not in SMOOTH_KINDS:
            raise UsageError(f"unknown smooth truth {self.kind!r}")

    def __call__(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.scale
        return {"zero": 0 * z, "linear": self.amplitude * z, "sine": self.amplitude * np.sin(z),
                "quadratic": self.amplitude * (z ** 2 - 1)}[self.kind]


def _default_baselines():
    return {
        "Battles": BaselineShape("decreasing", -1.6, 0.5),
        "Explosions/Remote violence": BaselineShape("decreasing", -1.0, 1.2),
        "Protests": BaselineShape("decreasing", -0.7, 1.0),
        "Riots": BaselineShape("U", -1.3, 0.6),
        "Strategic developments": BaselineShape("decreasing", -1.1, 1.4),
        "Violence against civilians": BaselineShape("reverse_U", -1.5, 0.4),
    }


@dataclass
class SimConfig:
    """Generator settings. A fixed seed gives byte-identical output.

    Parameters
    ----------
    constant_hazard : float, optional
        Replace the model hazard by this value in ``(0, 1]`` for every
        event and week.
    target_reported : float, optional
        Shift every baseline so that, averaged over the generated events,
        this share is reported within ``d_max`` weeks.
    historical_batch : int
        Size of an injected bulk upload of old events (0 disables it).
    """

    seed: int = 0
    n_countries: int = 40
    n_events: int = 10000
    start: str = "2024-01-06"
    occurrence_weeks: int = 26
    max_delay_weeks: int = 52
    d_max: int = 20
    n_baseline_events: int = 200
    baselines: dict = field(default_factory=_default_baselines)
    country_baselines: dict = field(default_factory=dict)
    linear_effects: dict = field(default_factory=lambda: {
        "regime": {"Electoral Autocracy": -0.2, "Democracy": 0.25}, "internet": 0.15})
    smooth_effects: tuple = ()
    constant_hazard: float | None = None
    target_reported: float | None = None
    historical_batch: int = 0
    historical_delay_weeks: tuple = (41, 90)
    reference_year_events: int | None = None

    def __post_init__(self):
        if self.n_countries < 1 or self.n_events < 1:
            raise UsageError("need at least one country and one event")
        if self.constant_hazard is not None and not 0 < self.constant_hazard <= 1:
            raise UsageError("constant_hazard must be in (0, 1]")
        if self.target_reported is not None and not 0 < self.target_reported < 1:
            raise UsageError("target_reported must be in (0, 1)")
        if self.max_delay_weeks < self.d_max:
            raise UsageError("max_delay_weeks must be at least d_max")
        self.baselines = {k: v if isinstance(v, BaselineShape) else BaselineShape(**v)
                          for k, v in self.baselines.items()}
        self.country_baselines = {c: {k: v if isinstance(v, BaselineShape) else BaselineShape(**v)
                                      for k, v in m.items()} for c, m in self.country_baselines.items()}
        self.smooth_effects = tuple(s if isinstance(s, SmoothTruth) else SmoothTruth(**s)
                                    for s in self.smooth_effects)

    @classmethod
    def calibrated(cls, seed=0, n_events=20000, **kw):
        """Model M1 truth with about 84% of events reported within 20 weeks."""
        kw.setdefault("n_countries", 60)
        kw.setdefault("smooth_effects", (
            SmoothTruth("logGDP", "linear", 0.05),
            SmoothTruth("logPOP", "sine", 0.25),
            SmoothTruth("logFATALITY_cum", "linear", -0.12),
            SmoothTruth("GOVCENSOR", "quadratic", 0.1),
            SmoothTruth("SELFCENSOR", "linear", -0.1),
        ))
        kw.setdefault("target_reported", 0.84)
        return cls(seed=seed, n_events=n_events, **kw)

    def to_dict(self):
        d = asdict(self)
        d["smooth_effects"] = [asdict(s) for s in self.smooth_effects]
        d["historical_delay_weeks"] = list(self.historical_delay_weeks)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "historical_delay_weeks" in d:
            d["historical_delay_weeks"] = tuple(d["historical_delay_weeks"])
        return cls(**d)


@dataclass
class Simulation:
    """Generated world: geography, events (with covariates) and the truth ledger."""

    config: SimConfig
    georef: GeoReference
    raster: PopulationRaster
    events: pd.DataFrame
    truth: dict
    eta_offset: np.ndarray | None = None
    batch: pd.DataFrame | None = None
    baseline_events: pd.DataFrame | None = None
    releases: list | None = None

    @property
    def release_dates(self):
        start = date.fromisoformat(self.config.start)
        return [start + timedelta(days=7 * k) for k in range(self.truth["n_releases"])]


# -- world -----------------------------------------------------------------

def _country_names(n):
    return [f"Country {i + 1:02d}" for i in range(n)]


def _country_code(i):
    a, b = divmod(i, 26)
    return "X" + chr(65 + a % 26) + chr(65 + b)


def _geography(config, rng):
    """Countries as 4-degree squares on a grid with capitals near their centres."""
    n = config.n_countries
    names = _country_names(n)
    per_row = int(np.ceil(np.sqrt(n)))
    rows, cols = np.divmod(np.arange(n), per_row)
    lat0 = -30.0 + 4.0 * rows
    lon0 = -10.0 + 4.0 * cols
    boxes = np.column_stack([lat0, lon0, lat0 + 4.0, lon0 + 4.0])
    cap_lat = lat0 + 2.0 + rng.uniform(-1, 1, n)
    cap_lon = lon0 + 2.0 + rng.uniform(-1, 1, n)
    capitals = {c: (float(round(la, 6)), float(round(lo, 6))) for c, la, lo in zip(names, cap_lat, cap_lon)}
    borders = [np.array([[b[0], b[1]], [b[0], b[3]], [b[2], b[3]], [b[2], b[1]], [b[0], b[1]]]) for b in boxes]
    table = pd.DataFrame({
        "country": names,
        "gdp_pc": np.round(np.exp(rng.normal(7.8, 1.0, n)), 2),
        "population": np.round(np.exp(rng.normal(16.0, 1.2, n))),
        "govcensor": np.round(rng.normal(0.0, 1.3, n), 4),
        "selfcensor": np.round(rng.normal(0.0, 1.3, n), 4),
        "internet": rng.binomial(1, 0.6, n),
        "regime": rng.choice(REGIMES, n, p=(0.3, 0.4, 0.3)),
    }).set_index("country")
    # population raster: half-degree cells, denser near capitals
    glat = np.arange(-30.0 + 0.25, lat0.max() + 4.0, 0.5)
    glon = np.arange(-10.0 + 0.25, lon0.max() + 4.0, 0.5)
    LA, LO = np.meshgrid(glat, glon, indexing="ij")
    LA, LO = LA.ravel(), LO.ravel()
    pop = np.exp(rng.normal(9.0, 1.0, len(LA)))
    d2 = np.min((LA[:, None] - cap_lat[None, :]) ** 2 + (LO[:, None] - cap_lon[None, :]) ** 2, axis=1)
    pop *= 1 + 30 * np.exp(-d2 / 0.5)
    raster = PopulationRaster(LO, LA, np.round(pop))
    georef = GeoReference(capitals, [b.astype(float) for b in borders], table)
    return names, boxes, georef, raster


def _draw_events(config, rng, names, boxes, n, day_lo, day_hi, start, prefix_offset=0):
    """Occurrence attributes of ``n`` events on days ``[day_lo, day_hi)`` from ``start``."""
    k = config.n_countries
    weights = np.exp(rng.normal(0, 0.8, k))
    floor = min(15, n // k)
    alloc = np.full(k, floor) + rng.multinomial(n - floor * k, weights / weights.sum())
    country_idx = np.repeat(np.arange(k), alloc)
    country_idx = country_idx[rng.permutation(n)]
    type_idx = rng.choice(len(EVENT_TYPES), n, p=TYPE_SHARES)
    types = np.array(EVENT_TYPES, dtype=object)[type_idx]
    sub = np.empty(n, dtype=object)
    fat = np.zeros(n, dtype=np.int64)
    u_sub = rng.random(n)
    u_zero = rng.random(n)
    counts = rng.negative_binomial(1, 0.5, n) + 1
    for j, t in enumerate(EVENT_TYPES):
        m = type_idx == j
        options = SUB_EVENT_TYPES[t]
        sub[m] = np.array(options, dtype=object)[np.minimum((u_sub[m] * len(options)).astype(int), len(options) - 1)]
        mean = FATAL_MEAN[t]
        p_nonzero = min(1.0, mean / 2)
        fat[m] = np.where(u_zero[m] < p_nonzero, np.round(counts[m] * (mean / p_nonzero) / 2), 0).astype(np.int64)
    day = rng.integers(day_lo, day_hi, n)
    b = boxes[country_idx]
    lat = b[:, 0] + 0.2 + 3.6 * rng.random(n)
    lon = b[:, 1] + 0.2 + 3.6 * rng.random(n)
    source = np.array([f"Source {_country_code(c)}-{s}" for c, s in zip(country_idx, rng.integers(1, 4, n))],
                      dtype=object)
    seq = np.arange(n) + prefix_offset
    ids = np.array([f"{_country_code(c)}{s:06d}" for c, s in zip(country_idx, seq)], dtype=object)
    return pd.DataFrame({
        "event_id": ids,
        "event_date": pd.to_datetime(start) + pd.to_timedelta(day, unit="D"),
        "country": np.array(names, dtype=object)[country_idx],
        "event_type": types,
        "sub_event_type": sub,
        "fatalities": fat,
        "source": source,
        "lat": np.round(lat, 5),
        "lon": np.round(lon, 5),
    })


# -- hazards -----------------------------------------------------------------

def _resolve_smooths(config, cov):
    out = []
    for s in config.smooth_effects:
        if s.variable not in cov:
            raise UsageError(f"smooth truth on unknown covariate {s.variable!r}")
        x = cov[s.variable].to_numpy(dtype=float)
        center = float(np.mean(x)) if s.center is None else s.center
        scale = float(np.std(x)) if s.scale is None else s.scale
        out.append(SmoothTruth(s.variable, s.kind, s.amplitude, center, scale if scale > 0 else 1.0))
    return out


def _covariate_offset(config, cov, smooths):
    off = np.zeros(len(cov))
    for var, eff in config.linear_effects.items():
        if isinstance(eff, dict):
            labels = cov[var].astype(str).to_numpy()
            off += np.array([eff.get(v, 0.0) for v in labels])
        else:
            off += float(eff) * cov[var].to_numpy(dtype=float)
    for s in smooths:
        off += s(cov[s.variable].to_numpy(dtype=float))
    return off


def _baseline_matrix(config, countries, types, weeks):
    """Baseline linear predictor of each event for weeks ``1..weeks``."""
    t = np.arange(1, weeks + 1)
    curves = {k: v.eta(t, config.d_max) for k, v in config.baselines.items()}
    B = np.empty((len(types), weeks))
    for k, curve in curves.items():
        B[types == k] = curve
    for c, override in config.country_baselines.items():
        for k, shape in override.items():
            B[(countries == c) & (types == k)] = shape.eta(t, config.d_max)
    missing = set(types) - set(curves)
    if missing:
        raise UsageError(f"no baseline shape for event types {sorted(missing)}")
    return B


def _hazards(eta):
    return np.clip(-np.expm1(-np.exp(np.minimum(eta, 50.0))), 1e-12, 1.0)


def _calibration_shift(eta_base, target, d_max):
    """Common shift making the mean probability of reporting within ``d_max`` equal ``target``."""
    lo, hi = -15.0, 15.0
    for _ in range(80):
        mid = (lo + hi) / 2
        surv = np.prod(1 - _hazards(eta_base[:, :d_max] + mid), axis=1)
        if np.mean(1 - surv) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _draw_delays(pi, rng, max_weeks):
    """Sequential Bernoulli trials; forced report at ``max_weeks + 1``."""
    n = len(pi)
    d = np.full(n, max_weeks + 1, dtype=np.int64)
    open_ = np.ones(n, dtype=bool)
    for t in range(max_weeks):
        hit = open_ & (rng.random(n) < pi[:, t])
        d[hit] = t + 1
        open_ &= ~hit
    return d


# -- generation ----------------------------------------------------------------

def simulate(config: SimConfig) -> Simulation:
    """Generate the world, covariates and delays (no snapshot files)."""
    rng = np.random.default_rng(config.seed)
    start = pd.Timestamp(config.start)
    names, boxes, georef, raster = _geography(config, rng)
    events = _draw_events(config, rng, names, boxes, config.n_events, 0, 7 * config.occurrence_weeks, start)
    cov, _ = assemble_covariates(events, georef, raster, CleaningConfig(d_max=config.d_max))
    smooths = _resolve_smooths(config, cov)
    offset = _covariate_offset(config, cov, smooths)
    weeks = config.max_delay_weeks
    countries = cov["country"].to_numpy()
    types = cov["event_type"].to_numpy()
    base = _baseline_matrix(config, countries, types, weeks)
    eta0 = base + offset[:, None]
    shift = 0.0
    if config.constant_hazard is not None:
        pi = np.full((len(cov), weeks), float(config.constant_hazard))
    else:
        if config.target_reported is not None:
            shift = _calibration_shift(eta0, config.target_reported, config.d_max)
        pi = _hazards(eta0 + shift)
    delay = _draw_delays(pi, rng, weeks)

    # release k is dated start + 7k; report lands in the first release after T + 7(d - 1)
    occ_day = (cov["event_date"] - start).dt.days.to_numpy()
    k = (occ_day + 7 * (delay - 1)) // 7 + 1
    cov["true_delay"] = delay
    cov["release_index"] = k
    cov["injected_batch"] = False

    n_rel = int(k.max()) + 1
    batch = None
    if config.historical_batch:
        kb = max(1, n_rel // 2)
        lo_w, hi_w = config.historical_delay_weeks
        b = _draw_events(config, rng, names, boxes, config.historical_batch, 0, 1, start,
                         prefix_offset=config.n_events + config.n_baseline_events)
        back = rng.integers(7 * lo_w + 1, 7 * hi_w, len(b))
        rel_day = 7 * kb
        b["event_date"] = start + pd.to_timedelta(rel_day - back, unit="D")
        b["country"] = names[0]
        b["lat"] = np.round(boxes[0, 0] + 0.2 + 3.6 * rng.random(len(b)), 5)
        b["lon"] = np.round(boxes[0, 1] + 0.2 + 3.6 * rng.random(len(b)), 5)
        b["source"] = "Archive upload"
        b["event_id"] = [f"{_country_code(0)}{config.n_events + config.n_baseline_events + i:06d}"
                         for i in range(len(b))]
        b["true_delay"] = -(-back // 7)
        b["release_index"] = kb
        b["injected_batch"] = True
        batch = b
    baseline_events = _draw_events(config, rng, names, boxes, config.n_baseline_events,
                                   -7 * config.max_delay_weeks, 0, start, prefix_offset=config.n_events)
    baseline_events["release_index"] = 0

    truth = {
        "config": config.to_dict(),
        "n_releases": n_rel,
        "start": config.start,
        "d_max": config.d_max,
        "calibration_shift": shift,
        "share_reported_within_d_max": float(np.mean(delay <= config.d_max)),
        "baseline_curves": {t: (config.baselines[t].eta(np.arange(1, config.d_max + 1), config.d_max)
                                + shift).tolist() for t in config.baselines},
        "country_baseline_curves": {c: {t: (s.eta(np.arange(1, config.d_max + 1), config.d_max) + shift).tolist()
                                        for t, s in m.items()} for c, m in config.country_baselines.items()},
        "linear_effects": config.linear_effects,
        "smooth_effects": [asdict(s) for s in smooths],
        "batch_ids": sorted(batch["event_id"]) if batch is not None else [],
    }
    return Simulation(config, georef, raster, cov, truth, offset + shift, batch, baseline_events)


def ledger_frame(sim: Simulation) -> pd.DataFrame:
    """Per-event truth: id, true (uncapped) delay, capped delay, censoring, batch flag, eta offset."""
    d_max = sim.config.d_max
    parts = [sim.events[["event_id", "true_delay", "injected_batch"]].assign(eta_offset=sim.eta_offset)]
    if sim.batch is not None:
        parts.append(sim.batch[["event_id", "true_delay", "injected_batch"]].assign(eta_offset=np.nan))
    led = pd.concat(parts, ignore_index=True)
    led["delay_weeks"] = np.minimum(led["true_delay"], d_max)
    led["censored"] = led["true_delay"] > d_max
    return led.sort_values("event_id", kind="mergesort").reset_index(drop=True)


def simulate_delays(config: SimConfig):
    """Delay table with covariates as the pipeline would produce it, plus the truth ledger.

    Baseline-release events and injected batches are left out; use
    :func:`simulate_releases` for the full snapshot sequence.
    """
    sim = simulate(config)
    ev = sim.events
    start = pd.Timestamp(config.start)
    out = ev.assign(
        first_seen=start + pd.to_timedelta(7 * ev["release_index"], unit="D"),
        delay_weeks=np.minimum(ev["true_delay"], config.d_max),
        censored=ev["true_delay"] > config.d_max,
        delay_uncapped=ev["true_delay"],
    )
    return out.drop(columns=["release_index", "injected_batch"]), sim


def _timestamps(frame, start, rng):
    """Modification timestamp between the reporting date and the release date."""
    rel_day = 7 * frame["release_index"].to_numpy()
    occ_day = (frame["event_date"] - start).dt.days.to_numpy()
    earliest = np.where(frame["release_index"].to_numpy() == 0, occ_day + 1,
                        occ_day + 7 * (frame["true_delay"].to_numpy() - 1) + 1)
    earliest = np.minimum(earliest, rel_day)
    # baseline events may have occurred long before the first release
    span = rel_day - earliest
    back = np.floor(rng.random(len(frame)) * (span + 1)).astype(np.int64)
    return start + pd.to_timedelta(rel_day - back, unit="D")


def _snapshot_lines(frame):
    cols = list(REQUIRED_COLUMNS)
    data = pd.DataFrame({
        "event_id_cnty": frame["event_id"],
        "event_date": frame["event_date"].dt.strftime("%Y-%m-%d"),
        "country": frame["country"],
        "latitude": frame["lat"].map(lambda v: f"{v:.5f}"),
        "longitude": frame["lon"].map(lambda v: f"{v:.5f}"),
        "event_type": frame["event_type"],
        "sub_event_type": frame["sub_event_type"],
        "fatalities": frame["fatalities"].astype(str),
        "source": frame["source"],
        "timestamp": ((frame["timestamp"] - pd.Timestamp("1970-01-01")) // pd.Timedelta(seconds=1)).astype(str),
    })[cols]
    return ",".join(cols), data.agg(",".join, axis=1).tolist()


def simulate_releases(config: SimConfig):
    """Weekly cumulative snapshots and the truth ledger.

    Returns
    -------
    Simulation
        ``releases`` holds one ``(release_date, bytes)`` pair per week;
        release ``k`` contains every event with reporting release ``<= k``.
    """
    sim = simulate(config)
    rng = np.random.default_rng([config.seed, 1])
    start = pd.Timestamp(config.start)
    parts = [sim.baseline_events.assign(true_delay=0), sim.events]
    if sim.batch is not None:
        parts.append(sim.batch)
    allev = pd.concat([p[["event_id", "event_date", "country", "event_type", "sub_event_type", "fatalities",
                          "source", "lat", "lon", "true_delay", "release_index"]] for p in parts],
                      ignore_index=True)
    allev["timestamp"] = _timestamps(allev, start, rng)
    allev = allev.sort_values(["release_index", "event_id"], kind="mergesort").reset_index(drop=True)
    header, lines = _snapshot_lines(allev)
    ends = np.searchsorted(allev["release_index"].to_numpy(), np.arange(sim.truth["n_releases"]), side="right")
    releases = []
    for k, end in enumerate(ends):
        text = header + "\n" + "".join(line + "\n" for line in lines[:end])
        when = (start + pd.Timedelta(days=7 * k)).date()
        releases.append((when, text.encode("utf-8")))
    sim.releases = releases
    return sim


def parsed_releases(sim: Simulation):
    """Parse the raw release bytes of a simulation."""
    return [parse_snapshot(raw, when) for when, raw in sim.releases]


def write_simulation(sim: Simulation, out_dir):
    """Write ``snapshots/``, ``georef/``, ``raster.csv``, ``reference_counts.csv`` and ``truth.json``."""
    out = Path(out_dir)
    snap = out / "snapshots"
    snap.mkdir(parents=True, exist_ok=True)
    if sim.releases is None:
        raise UsageError("simulation has no releases; use simulate_releases")
    for when, raw in sim.releases:
        (snap / f"release_{when.isoformat()}.csv").write_bytes(raw)
    sim.georef.save(out / "georef")
    sim.raster.to_csv(out / "raster.csv")
    counts = sim.events.groupby("country", sort=True).size()
    if sim.config.reference_year_events is not None:
        counts[:] = sim.config.reference_year_events
    counts.rename("count").reset_index().to_csv(out / "reference_counts.csv", index=False, lineterminator="\n")
    led = ledger_frame(sim)
    truth = dict(sim.truth)
    truth["events"] = {
        eid: {"true_delay": int(d), "delay_weeks": int(dw), "censored": bool(c), "injected_batch": bool(b)}
        for eid, d, dw, c, b in zip(led["event_id"], led["true_delay"], led["delay_weeks"], led["censored"],
                                    led["injected_batch"])
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return out


def read_truth(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def smooth_truths(truth):
    return [SmoothTruth(**s) for s in truth["smooth_effects"]]


def centered_truth(fn, grid, x_data, weights=None):
    """True effect on ``grid`` shifted to have zero weighted mean over ``x_data``."""
    return fn(grid) - np.average(fn(x_data), weights=weights)
