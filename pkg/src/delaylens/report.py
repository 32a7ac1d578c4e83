"""Dataset summary table in Markdown."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError

SUMMARY_COLUMNS = ["Variable", "N", "Min", "Q1", "Median", "Mean", "Q3", "Max"]

# (label, column, level); country-level rows count each country once
SUMMARY_ROWS = (
    ("Delay (weeks)", "delay_weeks", "event"),
    ("Fatalities", "fatalities", "event"),
    ("Population (50 km)", "pop50km", "event"),
    ("Distance to capital (km)", "dist_capital_km", "event"),
    ("Distance to border (km)", "dist_border_km", "event"),
    ("GDP per capita", "gdp_pc", "country"),
)


def _stats(values):
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    q1, med, q3 = np.percentile(x, [25, 50, 75], method="linear")
    return [len(x), x.min(), q1, med, x.mean(), q3, x.max()]


def summary_table(frame: pd.DataFrame, rows=SUMMARY_ROWS) -> pd.DataFrame:
    """Count, extremes, quartiles and mean of each available variable.

    Quartiles interpolate linearly between order statistics. Rows whose
    column is absent or entirely missing are skipped.

    Raises
    ------
    DataError
        If ``frame`` has no rows or none of the variables is present.
    """
    if frame.empty:
        raise DataError("cannot summarize an empty dataset")
    out = []
    for label, col, level in rows:
        if col not in frame or frame[col].isna().all():
            continue
        values = frame.groupby("country", sort=True)[col].first() if level == "country" else frame[col]
        out.append([label] + _stats(values))
    if not out:
        raise DataError("none of the summary variables are present")
    table = pd.DataFrame(out, columns=SUMMARY_COLUMNS)
    table["N"] = table["N"].astype(np.int64)
    return table


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:,.2f}"


def to_markdown(table: pd.DataFrame) -> str:
    lines = ["| " + " | ".join(SUMMARY_COLUMNS) + " |",
             "|" + "|".join(["---"] + ["---:"] * (len(SUMMARY_COLUMNS) - 1)) + "|"]
    for row in table.itertuples(index=False):
        lines.append("| " + " | ".join([row[0]] + [_fmt(v) for v in row[1:]]) + " |")
    return "\n".join(lines) + "\n"


def write_summary(frame: pd.DataFrame, path, title="Summary statistics"):
    table = summary_table(frame)
    text = f"# {title}\n\n" + to_markdown(table)
    Path(path).write_text(text, encoding="utf-8")
    return table
