"""Parsers for news-record and incident-record files.

News rows (tab-delimited, no header) come in two layouts: a knowledge-graph
export carrying themes + tone + locations, and an event-table export
carrying an action base code + tone + action location.  Incident files are
comma-separated with a header.  Parsing is forgiving row by row: bad rows
increment a counter and are skipped, never fatal.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import LocationDataset
from .registry import FeatureRegistry, load_states, state_name_index

# column positions in the knowledge-graph layout
_GKG_DATE = 1
_GKG_THEMES = 8
_GKG_LOCATIONS = 10
_GKG_TONE = 15
_GKG_MIN_COLS = 16

# column positions in the 61-column event-table layout
_EVT_DATE = 1
_EVT_BASE_CODE = 27
_EVT_TONE = 34
_EVT_GEO_FULLNAME = 52
_EVT_GEO_ADM1 = 54
_EVT_MIN_COLS = 55

NEWS_FORMATS = ("gkg", "events")


@dataclass(frozen=True)
class NewsRecord:
    publish_date: dt.date
    state: str
    themes: tuple[str, ...] = ()
    cameo_base_code: str | None = None
    tone: float = 0.0


@dataclass(frozen=True)
class IncidentRecord:
    state: str
    date: dt.date
    attack_type: str = "Unknown"
    weapon_type: str = "Unknown"
    target_type: str = "Unknown"
    group_name: str = "Unknown"
    success: bool = True


@dataclass
class ParseCounts:
    """Row accounting for one parsed file."""

    total_rows: int = 0
    parsed: int = 0
    skipped_malformed: int = 0
    skipped_unrecognized: int = 0

    def as_dict(self) -> dict:
        return {"total_rows": self.total_rows, "parsed": self.parsed,
                "skipped_malformed": self.skipped_malformed,
                "skipped_unrecognized": self.skipped_unrecognized}


def _parse_yyyymmdd(text: str) -> dt.date:
    return dt.date(int(text[0:4]), int(text[4:6]), int(text[6:8]))


def _states_from_locations(blob: str, codes: set[str],
                           names: dict[str, str]) -> list[str]:
    """Distinct state codes mentioned in a location field.

    Blocks are ';'-separated, fields within a block '#'-separated; the
    administrative code (field 4) is 'US' + state code for domestic
    places.  Rows lacking a usable code fall back to matching a state
    name inside the block's full place name.
    """
    found: list[str] = []
    for block in blob.split(";"):
        if not block:
            continue
        fields = block.split("#")
        code = None
        if len(fields) > 3:
            adm1 = fields[3].strip()
            if len(adm1) == 4 and adm1[:2] == "US" and adm1[2:] in codes:
                code = adm1[2:]
        if code is None and len(fields) > 1:
            for part in fields[1].split(","):
                key = part.strip().lower()
                if key in names:
                    code = names[key]
                    break
        if code is not None and code not in found:
            found.append(code)
    return found


def parse_news_file(path, fmt: str):
    """Parse one news file -> (records, counts).

    A knowledge-graph row mentioning several states yields one record per
    state (each carries the full theme list and tone).  Unrecognized
    themes and base codes survive parsing; the feature builder ignores
    them against the fixed registry.
    """
    if fmt not in NEWS_FORMATS:
        raise ValueError(f"unknown news format {fmt!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    codes = set(load_states())
    names = state_name_index()
    records: list[NewsRecord] = []
    counts = ParseCounts()
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            counts.total_rows += 1
            cols = line.split("\t")
            try:
                if fmt == "gkg":
                    rec_states, rec = _parse_gkg_row(cols, codes, names)
                else:
                    rec_states, rec = _parse_events_row(cols, codes, names)
            except (ValueError, IndexError):
                counts.skipped_malformed += 1
                continue
            if not rec_states:
                counts.skipped_unrecognized += 1
                continue
            counts.parsed += 1
            for st in rec_states:
                records.append(NewsRecord(publish_date=rec["date"], state=st,
                                          themes=rec["themes"],
                                          cameo_base_code=rec["code"],
                                          tone=rec["tone"]))
    return records, counts


def _parse_gkg_row(cols, codes, names):
    if len(cols) < _GKG_MIN_COLS:
        raise ValueError("short row")
    date = _parse_yyyymmdd(cols[_GKG_DATE])
    themes = tuple(
        chunk.split(",")[0].strip()
        for chunk in cols[_GKG_THEMES].split(";")
        if chunk.split(",")[0].strip())
    tone = float(cols[_GKG_TONE].split(",")[0])
    states = _states_from_locations(cols[_GKG_LOCATIONS], codes, names)
    return states, {"date": date, "themes": themes, "code": None, "tone": tone}


def _parse_events_row(cols, codes, names):
    if len(cols) < _EVT_MIN_COLS:
        raise ValueError("short row")
    date = _parse_yyyymmdd(cols[_EVT_DATE])
    code = cols[_EVT_BASE_CODE].strip()
    if not code:
        raise ValueError("empty base code")
    tone = float(cols[_EVT_TONE])
    states: list[str] = []
    adm1 = cols[_EVT_GEO_ADM1].strip()
    if len(adm1) == 4 and adm1[:2] == "US" and adm1[2:] in codes:
        states = [adm1[2:]]
    else:
        for part in cols[_EVT_GEO_FULLNAME].split(","):
            key = part.strip().lower()
            if key in names:
                states = [names[key]]
                break
    return states, {"date": date, "themes": (), "code": code, "tone": tone}


def build_daily_features(records, state: str, dates,
                         registry: FeatureRegistry) -> np.ndarray:
    """Aggregate one state's records into an n x m daily matrix.

    Counts are raw record counts per key per day; sentiments are the mean
    tone of the contributing records, 0 on days with none.  Records dated
    outside `dates` are skipped.
    """
    n = len(dates)
    day_index = {d: i for i, d in enumerate(dates)}
    theme_pos = registry.theme_position   # str -> block column or None
    cameo_pos = registry.cameo_position
    nt, nc = len(registry.themes), len(registry.cameo_codes)

    t_count = np.zeros((n, nt))
    t_tone = np.zeros((n, nt))
    c_count = np.zeros((n, nc))
    c_tone = np.zeros((n, nc))

    for rec in records:
        if rec.state != state:
            continue
        i = day_index.get(rec.publish_date)
        if i is None:
            continue
        for theme in rec.themes:
            j = theme_pos(theme)
            if j is not None:
                t_count[i, j] += 1
                t_tone[i, j] += rec.tone
        if rec.cameo_base_code is not None:
            j = cameo_pos(rec.cameo_base_code)
            if j is not None:
                c_count[i, j] += 1
                c_tone[i, j] += rec.tone

    with np.errstate(invalid="ignore", divide="ignore"):
        t_sent = np.where(t_count > 0, t_tone / np.where(t_count > 0, t_count, 1), 0.0)
        c_sent = np.where(c_count > 0, c_tone / np.where(c_count > 0, c_count, 1), 0.0)
    return np.concatenate([t_count, t_sent, c_count, c_sent], axis=1)


def parse_incidents(path, extra_codes=()):
    """Parse the comma-separated incident table -> (records, counts).

    Rows with an unknown day of month (iday 0) are unusable at daily
    resolution and are skipped; so are rows whose state cannot be
    resolved.  Duplicate (state, date) rows are all returned.
    extra_codes admits location codes beyond the shipped registry
    (synthetic datasets name their states outside it).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    codes = set(load_states()) | {c.upper() for c in extra_codes}
    names = state_name_index()
    records: list[IncidentRecord] = []
    counts = ParseCounts()
    with open(path, newline="", encoding="utf-8", errors="replace") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            counts.total_rows += 1
            try:
                year = int(row["iyear"])
                month = int(row["imonth"])
                day = int(row["iday"])
                if month < 1 or day < 1:
                    raise ValueError("unknown month or day")
                date = dt.date(year, month, day)
            except (ValueError, KeyError, TypeError):
                counts.skipped_malformed += 1
                continue
            prov = (row.get("provstate") or "").strip()
            state = None
            if prov.upper() in codes:
                state = prov.upper()
            else:
                state = names.get(prov.lower())
            if state is None:
                counts.skipped_unrecognized += 1
                continue
            counts.parsed += 1
            records.append(IncidentRecord(
                state=state, date=date,
                attack_type=(row.get("attacktype1_txt") or "Unknown").strip() or "Unknown",
                weapon_type=(row.get("weaptype1_txt") or "Unknown").strip() or "Unknown",
                target_type=(row.get("targtype1_txt") or "Unknown").strip() or "Unknown",
                group_name=(row.get("gname") or "Unknown").strip() or "Unknown",
                success=str(row.get("success", "1")).strip() not in ("0", "false", "False")))
    return records, counts


def label_vector(incidents, state: str, dates) -> np.ndarray:
    """Binary labels: 1 on days with at least one incident in the state."""
    day_index = {d: i for i, d in enumerate(dates)}
    y = np.zeros(len(dates), dtype=np.int64)
    for rec in incidents:
        if rec.state != state:
            continue
        i = day_index.get(rec.date)
        if i is not None:
            y[i] = 1
    return y


def build_dataset(news_records, incidents, state: str, dates,
                  registry: FeatureRegistry) -> LocationDataset:
    X = build_daily_features(news_records, state, dates, registry)
    y = label_vector(incidents, state, dates)
    return LocationDataset(state=state, dates=list(dates), X=X, y=y,
                           feature_ids=list(registry.feature_ids))
