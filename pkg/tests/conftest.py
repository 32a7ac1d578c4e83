import numpy as np
import pandas as pd
import pytest

HEADER = "event_id_cnty,event_date,country,latitude,longitude,event_type,sub_event_type,fatalities,source,timestamp"


def snapshot_text(rows):
    """Snapshot CSV from tuples (id, event_date, country, lat, lon, type, fatalities, source, timestamp)."""
    lines = [HEADER]
    for eid, when, country, lat, lon, etype, fat, source, ts in rows:
        lines.append(f"{eid},{when},{country},{lat},{lon},{etype},{etype} sub,{fat},{source},{ts}")
    return "\n".join(lines) + "\n"


def delay_frame(delays, censored=None, event_type=None, **extra):
    """Minimal delay table for survival and model code."""
    d = np.asarray(delays, dtype=np.int64)
    n = len(d)
    frame = pd.DataFrame({
        "event_id": [f"E{i:05d}" for i in range(n)],
        "delay_weeks": d,
        "censored": np.zeros(n, bool) if censored is None else np.asarray(censored, bool),
        "event_type": ["Battles"] * n if event_type is None else list(event_type),
    })
    for k, v in extra.items():
        frame[k] = v
    return frame


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        title, ok, detail = RESULTS[number]
        terminalreporter.write_line(f"{number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
