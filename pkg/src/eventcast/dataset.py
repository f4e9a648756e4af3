"""Per-state daily dataset container and its on-disk CSV form.

One file per state: a header row of feature ids, then one row per day
holding date, label, and the m feature values.  Floats are written with
repr() so a write-read cycle reproduces the matrix bit for bit.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .registry import FeatureId

DATE_FMT = "%Y-%m-%d"


def parse_date(text: str) -> dt.date:
    return dt.datetime.strptime(text, DATE_FMT).date()


def date_range(start: dt.date, end: dt.date) -> list[dt.date]:
    """Every calendar day from start to end inclusive."""
    if end < start:
        raise ValueError(f"date range {start}..{end} is reversed")
    n = (end - start).days + 1
    return [start + dt.timedelta(days=i) for i in range(n)]


@dataclass
class LocationDataset:
    """Daily feature matrix and event labels for one state.

    dates must ascend with a constant step (step_days, normally 1 for a
    gap-free daily series; coarser after date aggregation); X rows align
    with dates; y is binary with y[i] = 1 meaning an event occurred on
    dates[i] (or within its aggregated block).
    """

    state: str
    dates: list[dt.date]
    X: np.ndarray
    y: np.ndarray
    feature_ids: list = field(default_factory=list)
    step_days: int = 1

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        n = len(self.dates)
        if self.X.shape != (n, len(self.feature_ids)):
            raise ValueError(
                f"X shape {self.X.shape} does not match {n} dates x "
                f"{len(self.feature_ids)} features")
        if self.y.shape != (n,):
            raise ValueError("y length must match dates")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise ValueError("labels must be 0/1")
        if self.step_days < 1:
            raise ValueError("step_days must be positive")
        for i in range(1, n):
            if (self.dates[i] - self.dates[i - 1]).days != self.step_days:
                raise ValueError(
                    f"dates must ascend in steps of {self.step_days} days; "
                    f"break after {self.dates[i - 1]}")

    @property
    def n(self) -> int:
        return len(self.dates)

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.y.sum())

    @property
    def imbalance(self) -> float:
        """Fraction of days labeled positive."""
        return self.n_events / self.n if self.n else 0.0

    def save(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{self.state}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "y"] + [str(f) for f in self.feature_ids])
            for i, d in enumerate(self.dates):
                row = [d.strftime(DATE_FMT), int(self.y[i])]
                row.extend(repr(float(v)) for v in self.X[i])
                writer.writerow(row)
        return path

    @classmethod
    def load(cls, path) -> "LocationDataset":
        path = Path(path)
        state = path.stem
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:2] != ["date", "y"]:
                raise ValueError(f"unrecognized dataset header in {path}")
            fids = [_parse_feature_col(c) for c in header[2:]]
            dates, ys, rows = [], [], []
            for rec in reader:
                dates.append(parse_date(rec[0]))
                ys.append(int(rec[1]))
                rows.append([float(v) for v in rec[2:]])
        X = np.asarray(rows, dtype=float).reshape(len(dates), len(fids))
        step = (dates[1] - dates[0]).days if len(dates) > 1 else 1
        return cls(state=state, dates=dates, X=X,
                   y=np.asarray(ys, dtype=np.int64), feature_ids=fids,
                   step_days=step)


def _parse_feature_col(text: str):
    try:
        return FeatureId.parse(text)
    except ValueError:
        return text  # synthetic features use plain names


def load_state_dir(in_dir, states=None) -> dict[str, LocationDataset]:
    """Read every per-state CSV in a directory, keyed by state code."""
    in_dir = Path(in_dir)
    out = {}
    for path in sorted(in_dir.glob("*.csv")):
        if states is not None and path.stem not in states:
            continue
        ds = LocationDataset.load(path)
        out[ds.state] = ds
    if not out:
        raise FileNotFoundError(f"no per-state CSVs found under {in_dir}")
    return out
