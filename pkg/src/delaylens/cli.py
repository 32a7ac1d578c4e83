"""Command-line interface.

Every subcommand reads an optional ``--config`` file of ``key = value``
lines (keys are option names without the leading dashes); options given on
the command line win. Each run records its inputs, settings and library
versions in ``run-manifest.json`` next to its outputs.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import urllib.error
import urllib.request
import warnings
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from . import __version__
from .delays import (CleaningConfig, build_delay_dataset, filter_countries, filter_historical_batches,
                     read_delays, write_delays)
from .errors import DataError, DelayLensError, UsageError
from .events import SnapshotStore, parse_snapshot, release_date_from_name
from .gam import (FitResult, ModelSpec, baseline_event_types, baseline_hazard_curve, coefficient_table,
                  fit_model, partial_effect, predict_hazard)
from .geo import GeoReference, PopulationRaster, assemble_covariates, read_covariates, write_covariates
from .nowcast import correct_counts, empirical_cdf, reporting_cdf, weekly_counts, write_nowcast
from .report import write_summary
from .survival import kaplan_meier
from .synth import SimConfig, simulate_releases, write_simulation

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 0, 2, 3, 4
SNAPSHOT_SUFFIXES = (".csv", ".tsv", ".txt")
MANIFEST = "run-manifest.json"


# -- helpers -----------------------------------------------------------------
def _bool(text):
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _date(text):
    try:
        return date.fromisoformat(str(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file {path} not found")
    values = {}
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key = value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _config_defaults(sub: argparse.ArgumentParser, values: dict) -> dict:
    """Convert config strings with the matching option's type."""
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    out = {}
    for key, raw in values.items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r} for this command")
        action = actions[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            out[key] = _bool(raw)
            continue
        convert = action.type or str
        items = raw.replace(",", " ").split() if action.nargs in ("*", "+") or isinstance(
            action, argparse._AppendAction) else [raw]
        try:
            converted = [convert(v) for v in items]
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"config key {key}: {exc}") from None
        out[key] = converted if len(converted) != 1 or action.nargs in ("*", "+") or isinstance(
            action, argparse._AppendAction) else converted[0]
    return out


def _hash_path(path: Path):
    path = Path(path)
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(p for p in path.rglob("*") if p.is_file() and p.name != MANIFEST):
            h.update(str(f.relative_to(path)).encode("utf-8"))
            h.update(f.read_bytes())
    elif path.is_file():
        h.update(path.read_bytes())
    else:
        return None
    return h.hexdigest()


def _versions():
    return {"delaylens": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pandas": pd.__version__}


def write_manifest(out_dir, command, settings: dict, inputs, outputs):
    """Merge this run's record into ``run-manifest.json`` in ``out_dir``."""
    out_dir = Path(out_dir)
    path = out_dir / MANIFEST
    manifest = {"runs": {}}
    if path.is_file():
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            pass
    clean = {k: (str(v) if isinstance(v, (Path, date)) else
                 [str(x) for x in v] if isinstance(v, list) else v)
             for k, v in sorted(settings.items()) if k not in ("func", "command")}
    manifest.setdefault("runs", {})[command] = {
        "config": clean,
        "inputs": {str(p): _hash_path(p) for p in inputs if p is not None},
        "outputs": sorted(str(Path(p).name) for p in outputs),
        "versions": _versions(),
    }
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _require_file(path, what, hint=""):
    if path is None:
        raise UsageError(f"{what} not given{hint}")
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{what} {path} not found{hint}")
    return path


def _out_dir(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cleaning(args) -> CleaningConfig:
    return CleaningConfig(
        d_max=args.dmax,
        historical_delay_threshold=getattr(args, "historical_threshold", 40),
        historical_batch_min=getattr(args, "historical_min", 100),
        country_min_events=getattr(args, "min_country_events", 10),
        country_exclusions=tuple(getattr(args, "exclude_country", None) or ()),
        remove_whole_group=getattr(args, "remove_whole_group", False),
        on_missing_country=getattr(args, "on_missing_country", "drop"),
        winsor_rules=() if getattr(args, "no_winsor", False) else CleaningConfig().winsor_rules,
    )


def _csv(frame, path, fmt="%.10g"):
    frame.to_csv(path, index=False, lineterminator="\n", float_format=fmt)


# -- commands ----------------------------------------------------------------
def cmd_ingest(args):
    """Parse a directory of dated snapshot files into a store."""
    src = _require_file(args.snapshots, "snapshot directory")
    if not src.is_dir():
        raise UsageError(f"{src} is not a directory")
    files = [p for p in src.iterdir() if p.is_file() and p.suffix.lower() in SNAPSHOT_SUFFIXES]
    if not files:
        raise UsageError(f"no snapshot files ({', '.join(SNAPSHOT_SUFFIXES)}) in {src}")
    files.sort(key=lambda p: (release_date_from_name(p.name), p.name))
    dates = [release_date_from_name(p.name) for p in files]
    if len(set(dates)) != len(dates):
        raise UsageError("two snapshot files carry the same release date")
    store_dir = Path(args.store)
    store = SnapshotStore.load(store_dir, strict=args.strict) if (store_dir / "releases").is_dir() \
        else SnapshotStore()
    known = set(store.release_dates)
    rejects = []
    for f, when in zip(files, dates):
        if when in known:
            continue
        release = parse_snapshot(f.read_bytes(), when, strict=args.strict)
        store.append(release)
        rejects += [dict(release_date=when.isoformat(), **r.to_dict()) for r in release.rejects]
    store.save(store_dir)
    _csv(pd.DataFrame(rejects, columns=["release_date", "row", "event_id", "field", "reason"]),
         store_dir / "rejects.csv")
    write_manifest(store_dir, "ingest", vars(args), [src], ["index.json", "rejects.csv"])
    print(f"store {store_dir}: {len(store)} releases, {len(store.index)} events, {len(rejects)} rejected rows")
    return store


def cmd_delays(args):
    """Diff the store into weekly delays and apply the cleaning rules."""
    store_path = _require_file(args.store, "snapshot store")
    store = SnapshotStore.load(store_path)
    config = _cleaning(args)
    window = None
    if args.start or args.end:
        window = (args.start or store.release_dates[0], args.end or store.release_dates[-1])
    delays, rejects = build_delay_dataset(store, window, config, delay_from=args.delay_from,
                                          exclude_pre_window=args.exclude_pre_window)
    batches = []
    if not args.keep_historical:
        delays, batches = filter_historical_batches(delays, config)
    ref = None
    if args.reference_counts:
        ref = _require_file(args.reference_counts, "reference counts file")
        counts = pd.read_csv(ref, dtype={"country": str}, keep_default_na=False)
        if not {"country", "count"} <= set(counts.columns):
            raise UsageError(f"{ref} needs columns country,count")
        delays = filter_countries(delays, zip(counts["country"], counts["count"]), config)
    elif config.country_exclusions:
        delays = delays[~delays["country"].isin(config.country_exclusions)].reset_index(drop=True)
    delays = delays.sort_values(["first_seen", "event_id"], kind="mergesort").reset_index(drop=True)
    out = _out_dir(args.out)
    write_delays(delays, out / "delays.csv")
    _csv(rejects, out / "delay_rejects.csv")
    (out / "batches.json").write_text(json.dumps(batches, indent=1) + "\n", encoding="utf-8")
    write_manifest(out, "delays", vars(args), [store_path, ref],
                   ["delays.csv", "delay_rejects.csv", "batches.json"])
    print(f"{len(delays)} delay records ({int(delays['censored'].sum())} censored), "
          f"{sum(b['removed'] for b in batches)} removed in {len(batches)} historical batch(es)")
    return delays


def _load_raster(path):
    path = _require_file(path, "population raster")
    return PopulationRaster.from_esri_ascii(path) if path.suffix.lower() == ".asc" else PopulationRaster.read_csv(path)


def cmd_covariates(args):
    """Attach country and spatial covariates to a delay table."""
    delays_path = _require_file(args.delays, "delay table", " (run `delaylens delays` first)")
    georef_path = _require_file(args.georef, "geographic reference directory")
    delays = read_delays(delays_path)
    raster = _load_raster(args.raster) if args.raster else None
    frame, rejects = assemble_covariates(delays, GeoReference.load(georef_path), raster, _cleaning(args),
                                         radius_km=args.radius, since=args.since)
    out = _out_dir(args.out)
    write_covariates(frame, out / "covariates.csv")
    _csv(rejects, out / "covariate_rejects.csv")
    write_manifest(out, "covariates", vars(args), [delays_path, georef_path, args.raster],
                   ["covariates.csv", "covariate_rejects.csv"])
    print(f"{len(frame)} records with covariates, {len(rejects)} rejected")
    return frame


def cmd_km(args):
    """Kaplan-Meier curve of the delays, pooled or per event type."""
    delays_path = _require_file(args.delays, "delay table")
    delays = read_delays(delays_path)
    if delays.empty:
        raise DataError("delay table is empty")
    col = "delay_uncapped" if args.uncapped else "delay_weeks"
    horizon = args.horizon if args.horizon is not None else (None if args.uncapped else args.dmax)
    groups = delays.groupby("event_type", sort=True) if args.by_type else [("all", delays)]
    parts = []
    for level, g in groups:
        cens = np.zeros(len(g), dtype=bool) if args.uncapped else g["censored"].to_numpy(bool)
        km = kaplan_meier(g[col].to_numpy(), cens, horizon=horizon)
        parts.append(km.to_frame().assign(event_type=level))
    frame = pd.concat(parts, ignore_index=True)
    frame = frame[["event_type"] + [c for c in frame.columns if c != "event_type"]]
    out = _out_dir(args.out)
    _csv(frame, out / "km.csv", "%.12g")
    write_manifest(out, "km", vars(args), [delays_path], ["km.csv"])
    return frame


def _model_spec(args) -> ModelSpec:
    kw = dict(k=args.k, penalty_order=args.penalty_order, shared_baseline_lambda=args.shared_baseline_lambda,
              fixed_lambda=args.fixed_lambda, d_max=args.dmax)
    if args.model == "m1":
        return ModelSpec.m1(**kw)
    if args.model == "m2":
        return ModelSpec.m2(weekly_events=args.weekly_events, **kw)
    raise UsageError(f"unknown model {args.model!r}; use m1 or m2")


def cmd_fit(args):
    """Fit M1 (all countries) or M2 (one country) and write fit.json and table.csv."""
    cov_path = _require_file(args.covariates, "covariate file", " (run `delaylens covariates` first)")
    spec = _model_spec(args)
    if spec.name == "M2" and not args.country:
        raise UsageError("model m2 is fitted within one country: pass --country")
    data = read_covariates(cov_path)
    if args.country:
        data = data[data["country"] == args.country].reset_index(drop=True)
        if data.empty:
            raise DataError(f"no records for country {args.country!r}")
    if data.empty:
        raise DataError("covariate file has no records")
    fit = fit_model(spec, data, method=args.method)
    out = _out_dir(args.out)
    fit.save(out / "fit.json")
    _csv(coefficient_table(fit, include_intercept=True), out / "table.csv", "%.8g")
    edf = pd.DataFrame({"term": list(fit.edf), "edf": list(fit.edf.values())})
    _csv(edf, out / "edf.csv", "%.6g")
    write_manifest(out, "fit", vars(args), [cov_path], ["fit.json", "table.csv", "edf.csv"])
    print(f"{spec.name}: {fit.n_events} events, {fit.n_rows} person-weeks, GCV {fit.gcv:.6f}")
    return fit


def _load_fit(path):
    return FitResult.load(_require_file(path, "fit file", " (run `delaylens fit` first)"))


def cmd_curves(args):
    """Baseline hazards and smooth partial effects as CSV."""
    fit_path = _require_file(args.fit, "fit file", " (run `delaylens fit` first)")
    fit = FitResult.load(fit_path)
    out = _out_dir(args.out)
    parts = [baseline_hazard_curve(fit, et).assign(event_type=et) for et in baseline_event_types(fit)]
    base = pd.concat(parts, ignore_index=True)
    _csv(base[["event_type", "t", "eta", "se", "hazard", "lower", "upper"]], out / "baseline.csv", "%.10g")
    written = ["baseline.csv"]
    for term in fit.terms:
        if term.kind in ("smooth", "linear") and term.variable != "t":
            curve = partial_effect(fit, term, n=args.points).to_frame()[["x", "estimate", "se"]]
            name = f"effect_{term.variable}.csv"
            _csv(curve, out / name, "%.10g")
            written.append(name)
    write_manifest(out, "curves", vars(args), [fit_path], written)
    return written


def _profile(fit, covariates, overrides, event_type):
    """One covariate row: medians / most frequent levels, then overrides."""
    row = {}
    for var in fit.spec.variables():
        if var not in covariates:
            continue
        col = covariates[var]
        if pd.api.types.is_numeric_dtype(col) and var != "internet":
            row[var] = float(col.median())
        else:
            row[var] = col.value_counts().sort_index(kind="mergesort").idxmax()
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"profile entries are key=value, got {item!r}")
        try:
            row[key] = float(value)
        except ValueError:
            row[key] = value
    if event_type:
        row[fit.spec.baseline.by_factor] = event_type
    return row


def cmd_nowcast(args):
    """Correct recent occurrence-week counts for events not yet reported."""
    delays = read_delays(_require_file(args.delays, "delay table")) if args.delays else None
    if args.counts:
        counts = pd.read_csv(_require_file(args.counts, "counts file"))
        if not {"occurrence_week", "observed"} <= set(counts.columns):
            raise UsageError("counts file needs columns occurrence_week,observed")
    elif delays is not None:
        counts = weekly_counts(delays, args.as_of)
    else:
        raise UsageError("give --counts or --delays")
    if args.fit:
        fit = _load_fit(args.fit)
        cov = read_covariates(_require_file(args.covariates, "covariate file")) if args.covariates else pd.DataFrame()
        row = _profile(fit, cov, args.profile, args.event_type)
        t = np.arange(1, fit.spec.d_max + 1)
        pi, _ = predict_hazard(fit, pd.DataFrame([row] * len(t)), t)
        cdf = reporting_cdf(pi)
    elif delays is not None:
        cdf = empirical_cdf(delays, args.dmax)
    else:
        raise UsageError("the reporting CDF needs --delays or --fit")
    frame = correct_counts(counts, args.as_of, cdf, floor=args.floor, interval=args.interval)
    out = _out_dir(args.out)
    write_nowcast(frame, out / "nowcast.csv")
    write_manifest(out, "nowcast", vars(args), [args.delays, args.counts, args.fit, args.covariates],
                   ["nowcast.csv"])
    return frame


def cmd_simulate(args):
    """Synthetic snapshots with a known reporting process."""
    kw = dict(seed=args.seed)
    for key in ("n_events", "n_countries", "constant_hazard", "target_reported", "occurrence_weeks",
                "max_delay_weeks"):
        if getattr(args, key) is not None:
            kw[key] = getattr(args, key)
    kw["historical_batch"] = args.historical_batch
    kw["d_max"] = args.dmax
    config = SimConfig.calibrated(**kw) if args.preset == "calibrated" else SimConfig(**kw)
    sim = simulate_releases(config)
    out = write_simulation(sim, _out_dir(args.out))
    write_manifest(out, "simulate", vars(args), [], ["snapshots", "georef", "raster.csv", "truth.json"])
    print(f"{len(sim.releases)} releases, {len(sim.events)} events written to {out}")
    return sim


def cmd_report(args):
    """Summary-statistics table of a pipeline output directory."""
    src = _require_file(args.outputs, "output directory")
    for name in ("covariates.csv", "delays.csv"):
        if (src / name).is_file():
            path = src / name
            break
    else:
        raise UsageError(f"{src} has neither covariates.csv nor delays.csv")
    frame = read_covariates(path) if path.name == "covariates.csv" else read_delays(path)
    out = _out_dir(args.out or src)
    table = write_summary(frame, out / "summary.md")
    write_manifest(out, "report", vars(args), [path], ["summary.md"])
    return table


def cmd_fetch(args):
    """Download dated releases from a URL template into a snapshot directory."""
    if "{date}" not in args.url_template:
        raise UsageError("the URL template needs a {date} placeholder")
    out = _out_dir(args.out)
    token = os.environ.get("DELAYLENS_TOKEN")
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    when, fetched = args.start, []
    while when <= args.end:
        target = out / f"release_{when.isoformat()}.csv"
        if not target.exists():
            url = args.url_template.format(date=when.isoformat())
            try:
                with urllib.request.urlopen(urllib.request.Request(url, headers=headers),
                                            timeout=args.timeout) as resp:
                    target.write_bytes(resp.read())
            except (urllib.error.URLError, OSError) as exc:
                raise DataError(f"download of {when} failed: {exc}") from None
            fetched.append(target.name)
        when += timedelta(days=args.every)
    write_manifest(out, "fetch", {k: v for k, v in vars(args).items()}, [], fetched)
    print(f"fetched {len(fetched)} release(s) into {out}")
    return fetched


# -- parser ------------------------------------------------------------------
def _add_cleaning(p):
    p.add_argument("--historical-threshold", type=int, default=40,
                   help="delay in weeks above which a record counts toward a historical batch")
    p.add_argument("--historical-min", type=int, default=100, help="minimum long delays in a batch")
    p.add_argument("--remove-whole-group", action="store_true",
                   help="drop every record of a flagged batch, not only the long delays")


def build_parser():
    parser = argparse.ArgumentParser(prog="delaylens", description="Reporting delays of versioned event datasets.")
    parser.add_argument("--version", action="version", version=f"delaylens {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers = {}

    def sub(name, func, help_):
        p = subs.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="key = value settings file (command-line options win)")
        p.set_defaults(func=func)
        subparsers[name] = p
        return p

    p = sub("ingest", cmd_ingest, "parse dated snapshot files into a store")
    p.add_argument("snapshots", help="directory of snapshot files with YYYY-MM-DD in their names")
    p.add_argument("--store", required=True, help="store directory (created or extended)")
    p.add_argument("--strict", action="store_true", help="fail on any invalid row")

    p = sub("delays", cmd_delays, "weekly reporting delays with cleaning")
    p.add_argument("--store", required=True)
    p.add_argument("--out", default=".")
    p.add_argument("--start", type=_date, help="window start (baseline release on or before it)")
    p.add_argument("--end", type=_date, help="window end")
    p.add_argument("--dmax", type=int, default=20, help="censoring cap in weeks")
    p.add_argument("--keep-historical", action="store_true", help="skip the historical-batch filter")
    p.add_argument("--reference-counts", help="CSV country,count from a fully reported year")
    p.add_argument("--min-country-events", type=int, default=10)
    p.add_argument("--exclude-country", action="append", default=None)
    p.add_argument("--on-missing-country", choices=("drop", "keep", "error"), default="drop")
    p.add_argument("--delay-from", choices=("release", "timestamp"), default="release")
    p.add_argument("--exclude-pre-window", action="store_true", help="drop events that occurred before the window")
    _add_cleaning(p)

    p = sub("covariates", cmd_covariates, "attach country and spatial covariates")
    p.add_argument("--delays", required=True)
    p.add_argument("--georef", required=True, help="directory with capitals.csv, borders.csv, country_covariates.csv")
    p.add_argument("--raster", help="population raster: lon,lat,pop CSV or ESRI ASCII grid (.asc)")
    p.add_argument("--radius", type=float, default=50.0, help="buffer radius in km")
    p.add_argument("--since", default="2024-01-01", help="start of the cumulative-fatality count")
    p.add_argument("--no-winsor", action="store_true")
    p.add_argument("--dmax", type=int, default=20)
    p.add_argument("--out", default=".")

    p = sub("km", cmd_km, "Kaplan-Meier reporting curves")
    p.add_argument("--delays", required=True)
    p.add_argument("--horizon", type=int, help="last week (default: dmax, or all weeks with --uncapped)")
    p.add_argument("--dmax", type=int, default=20)
    p.add_argument("--by-type", action="store_true", help="one block per event type")
    p.add_argument("--uncapped", action="store_true", help="use delays before the censoring cap")
    p.add_argument("--out", default=".")

    p = sub("fit", cmd_fit, "fit the survival GAM")
    p.add_argument("model", choices=("m1", "m2"))
    p.add_argument("--covariates", help="covariates.csv from `delaylens covariates`")
    p.add_argument("--country", help="restrict rows to one country (required for m2)")
    p.add_argument("--k", type=int, default=10, help="basis dimension of every smooth")
    p.add_argument("--penalty-order", type=int, default=2)
    p.add_argument("--fixed-lambda", type=float, nargs="+", help="skip selection, one value per penalty")
    p.add_argument("--shared-baseline-lambda", action="store_true")
    p.add_argument("--method", choices=("newton", "exact"), default="newton", help="GCV search strategy")
    p.add_argument("--weekly-events", action="store_true", help="m2 only: add a smooth of logEVENTS_wk")
    p.add_argument("--dmax", type=int, default=20)
    p.add_argument("--out", default=".")

    p = sub("curves", cmd_curves, "baseline and partial-effect curves")
    p.add_argument("--fit", required=True)
    p.add_argument("--points", type=int, default=100, help="grid size of each partial effect")
    p.add_argument("--out", default=".")

    p = sub("nowcast", cmd_nowcast, "delay-corrected weekly counts")
    p.add_argument("--as-of", type=_date, required=True)
    p.add_argument("--delays", help="delay table (counts and empirical CDF)")
    p.add_argument("--counts", help="CSV occurrence_week,observed")
    p.add_argument("--fit", help="use the model CDF at a covariate profile")
    p.add_argument("--covariates", help="covariate table supplying the default profile")
    p.add_argument("--profile", nargs="*", help="key=value overrides of the covariate profile")
    p.add_argument("--event-type")
    p.add_argument("--floor", type=float, default=0.05, help="refuse correction where F is below this")
    p.add_argument("--interval", action="store_true", help="add a 95%% binomial interval")
    p.add_argument("--dmax", type=int, default=20)
    p.add_argument("--out", default=".")

    p = sub("simulate", cmd_simulate, "synthetic snapshots with known truth")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=("default", "calibrated"), default="default")
    p.add_argument("--n-events", type=int)
    p.add_argument("--n-countries", type=int)
    p.add_argument("--occurrence-weeks", type=int)
    p.add_argument("--max-delay-weeks", type=int)
    p.add_argument("--constant-hazard", type=float)
    p.add_argument("--target-reported", type=float)
    p.add_argument("--historical-batch", type=int, default=0, help="size of an injected bulk upload")
    p.add_argument("--dmax", type=int, default=20)

    p = sub("report", cmd_report, "summary-statistics table")
    p.add_argument("outputs", help="directory holding covariates.csv or delays.csv")
    p.add_argument("--out", help="where to write summary.md (default: the outputs directory)")

    p = sub("fetch", cmd_fetch, "download releases from a URL template")
    p.add_argument("--url-template", required=True, help="URL with a {date} placeholder")
    p.add_argument("--start", type=_date, required=True)
    p.add_argument("--end", type=_date, required=True)
    p.add_argument("--every", type=int, default=7, help="days between releases")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--out", required=True)

    return parser, subparsers


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv=None):
    parser, subparsers = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    command = next((tok for tok in argv if tok in subparsers), None)
    config = _config_path(argv)
    # config values become defaults before parsing, so they satisfy required options
    if command is not None and config is not None:
        sub = subparsers[command]
        defaults = _config_defaults(sub, read_config(config))
        for action in sub._actions:
            if action.dest in defaults:
                action.required = False
        sub.set_defaults(**defaults)
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        raise UsageError("no command given")
    return args


def main(argv=None) -> int:
    warnings.simplefilter("default")
    try:
        args = parse_args(argv)
        args.func(args)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except argparse.ArgumentTypeError as exc:
        print(f"delaylens: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DelayLensError as exc:
        kind = {EXIT_DATA: "data error: ", EXIT_CONVERGENCE: "non-convergence: "}.get(exc.exit_code, "")
        print(f"delaylens: {kind}{exc}", file=sys.stderr)
        return exc.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
