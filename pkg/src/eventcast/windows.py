"""Observation-window representations of daily feature matrices.

A prediction for day i may only look at days before i.  Every transform
here encodes that rule the same way: output row i is built from rows
i-dt .. i-1, and rows without a full history are marked invalid (NaN)
rather than padded, so no fabricated pre-range history enters a model.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .registry import FeatureId
from .stats import ks_two_sample

WINDOW_KINDS = ("fixed", "ks", "stacked")


@dataclass(frozen=True)
class WindowSpec:
    """Which representation to build and how many prior days it may see.

    kind "fixed":   per-feature unweighted mean of the previous dt days
    kind "ks":      per-feature window lengths chosen by ks_fit, capped at dt
    kind "stacked": raw day-vectors of the previous dt days, oldest first
    """

    kind: str
    dt: int

    def __post_init__(self):
        if self.kind not in WINDOW_KINDS:
            raise ValueError(f"unknown window kind {self.kind!r}")
        if self.dt < 1:
            raise ValueError("window length must be >= 1")

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.dt}"

    @property
    def effective(self) -> int:
        # largest lookback any row of this representation can have; for
        # "ks" the fitted t_j may be smaller but never exceed dt
        return self.dt

    @classmethod
    def parse(cls, text: str) -> "WindowSpec":
        kind, _, num = text.partition(":")
        if not num:
            raise ValueError(f"window spec {text!r} is not kind:days")
        return cls(kind=kind.strip(), dt=int(num))


def moving_average(column, dt: int) -> np.ndarray:
    """Mean of the previous dt days; first dt entries NaN.

    out[i] = mean(column[i-dt : i]).  dt=1 is yesterday's value verbatim.
    """
    col = np.asarray(column, dtype=float)
    if col.ndim != 1:
        raise ValueError("moving_average works on a single column")
    n = col.shape[0]
    if dt < 1:
        raise ValueError("window length must be >= 1")
    if dt >= n:
        raise ValueError(f"window {dt} leaves no valid rows out of {n}")
    out = np.full(n, np.nan)
    means = np.lib.stride_tricks.sliding_window_view(col, dt).mean(axis=1)
    out[dt:] = means[:-1]
    return out


def moving_average_matrix(X, dt: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    n = X.shape[0]
    if dt < 1:
        raise ValueError("window length must be >= 1")
    if dt >= n:
        raise ValueError(f"window {dt} leaves no valid rows out of {n}")
    out = np.full(X.shape, np.nan)
    means = np.lib.stride_tricks.sliding_window_view(X, dt, axis=0).mean(axis=2)
    out[dt:, :] = means[:-1, :]
    return out


@dataclass(frozen=True)
class FittedWindows:
    """Per-feature window lengths and the p-values that selected them."""

    windows: np.ndarray   # int, one t_j per feature, 1 <= t_j <= max_window
    p_values: np.ndarray  # min two-sample K-S p reached at t_j, in (0, 1]
    max_window: int

    def __post_init__(self):
        w = np.asarray(self.windows)
        if w.size and (w.min() < 1 or w.max() > self.max_window):
            raise ValueError("fitted windows out of [1, max_window]")

    @property
    def m(self) -> int:
        return int(self.windows.shape[0])

    @property
    def valid_from(self) -> int:
        return int(self.windows.max())

    def write_csv(self, path, feature_ids=None) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature_id", "t_j", "p_min_j"])
            for j in range(self.m):
                fid = str(feature_ids[j]) if feature_ids is not None else str(j)
                writer.writerow([fid, int(self.windows[j]),
                                 repr(float(self.p_values[j]))])

    @classmethod
    def read_csv(cls, path) -> tuple["FittedWindows", list[FeatureId]]:
        wins, ps, fids = [], [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:3] != ["feature_id", "t_j", "p_min_j"]:
                raise ValueError(f"unrecognized window table header {header}")
            for row in reader:
                fids.append(FeatureId.parse(row[0]) if ":" in row[0] else row[0])
                wins.append(int(row[1]))
                ps.append(float(row[2]))
        wins = np.asarray(wins, dtype=np.int64)
        return cls(windows=wins, p_values=np.asarray(ps),
                   max_window=int(wins.max()) if wins.size else 1), fids


def ks_fit(X, y, max_window: int, rows=None) -> FittedWindows:
    """Choose each feature's window length by minimizing the K-S p-value.

    For every candidate t in 1..max_window the feature's moving average is
    recomputed over the whole column, rows the candidate invalidates are
    dropped, and the remaining values are split into event and non-event
    samples for a two-sample K-S test.  The t with the smallest p wins;
    ties go to the smaller t.  `rows` restricts the class split to a subset
    of row indices (a training fold) without changing how the averages see
    the column.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or y.shape[0] != X.shape[0]:
        raise ValueError("X must be 2-d with one label per row")
    n, m = X.shape
    if max_window < 1:
        raise ValueError("max_window must be >= 1")
    if max_window >= n:
        raise ValueError(f"max_window {max_window} leaves no valid rows")

    if rows is None:
        rows = np.arange(n)
    else:
        rows = np.asarray(rows, dtype=np.int64)

    usable = rows[rows >= 1]  # t=1 already invalidates row 0
    pos_any = np.any(y[usable] == 1)
    neg_any = np.any(y[usable] == 0)
    if not (pos_any and neg_any):
        warnings.warn(
            "a class is empty on the fitting rows; falling back to "
            "previous-day windows (t_j = 1 for every feature)",
            RuntimeWarning, stacklevel=2)
        return FittedWindows(windows=np.ones(m, dtype=np.int64),
                             p_values=np.ones(m), max_window=max_window)

    best_t = np.ones(m, dtype=np.int64)
    best_p = np.ones(m)
    for t in range(1, max_window + 1):
        sel = rows[rows >= t]
        y_sel = y[sel]
        pos = sel[y_sel == 1]
        neg = sel[y_sel == 0]
        if pos.size == 0 or neg.size == 0:
            continue
        ma = moving_average_matrix(X, t)
        for j in range(m):
            p = ks_two_sample(ma[neg, j], ma[pos, j]).p
            if p < best_p[j]:
                best_p[j] = p
                best_t[j] = t
    return FittedWindows(windows=best_t, p_values=best_p,
                         max_window=max_window)


def ks_transform(X, fitted: FittedWindows) -> np.ndarray:
    """Apply per-feature learned windows; rows before max t_j are invalid."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    if X.shape[1] != fitted.m:
        raise ValueError(
            f"matrix has {X.shape[1]} features, fitted windows have {fitted.m}")
    out = np.empty(X.shape)
    for j in range(fitted.m):
        out[:, j] = moving_average(X[:, j], int(fitted.windows[j]))
    out[:fitted.valid_from, :] = np.nan
    return out


def stack(X, dt: int) -> np.ndarray:
    """Sequences of the previous dt day-vectors, oldest first.

    Returns shape (n, dt, m) aligned with the input rows; rows with
    incomplete history (the first dt) are NaN.  Mean over the middle axis
    reproduces the fixed moving average.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    n = X.shape[0]
    if dt < 1:
        raise ValueError("window length must be >= 1")
    if dt >= n:
        raise ValueError(f"window {dt} leaves no valid rows out of {n}")
    out = np.full((n, dt, X.shape[1]), np.nan)
    view = np.lib.stride_tricks.sliding_window_view(X, dt, axis=0)
    out[dt:] = np.moveaxis(view, 2, 1)[:-1]
    return out


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature train minimum and range for [0,1] scaling."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        if np.any(self.maxs < self.mins):
            raise ValueError("per-feature max must be >= min")


def minmax_fit(X_train) -> MinMaxScaler:
    X = np.asarray(X_train, dtype=float)
    if X.ndim == 3:  # sequence tensors scale per feature across all steps
        X = X.reshape(-1, X.shape[-1])
    if X.shape[0] == 0:
        raise ValueError("cannot fit a scaler on zero rows")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mins = np.nanmin(X, axis=0)
        maxs = np.nanmax(X, axis=0)
    return MinMaxScaler(mins=mins, maxs=maxs)


def minmax_apply(X, scaler: MinMaxScaler) -> np.ndarray:
    """Scale into the train [0,1] box; test values may land outside it.

    Constant training columns map to 0 everywhere by convention.
    """
    X = np.asarray(X, dtype=float)
    span = scaler.maxs - scaler.mins
    flat = span == 0
    safe = np.where(flat, 1.0, span)
    out = (X - scaler.mins) / safe
    if np.any(flat):
        nan_mask = np.isnan(X)
        out[..., flat] = 0.0
        out[nan_mask] = np.nan
    return out


def propagate_labels(y, dp: int) -> np.ndarray:
    """Mark the dp days ending at each positive as positive.

    y'[i] = 1 iff some y[i+k] = 1 for k in 0..dp-1 (labels pushed
    backward in time so earlier days inherit the upcoming event).
    """
    y = np.asarray(y)
    if dp < 1:
        raise ValueError("prediction window must be >= 1")
    out = np.zeros(y.shape[0], dtype=np.int64)
    for k in range(dp):
        out[: y.shape[0] - k] |= (y[k:] == 1).astype(np.int64)
    return out


def aggregate_dates(X, y, dp: int) -> tuple[np.ndarray, np.ndarray]:
    """Pool consecutive dp-day blocks: feature means, label OR.

    The trailing partial block is dropped.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if dp < 1:
        raise ValueError("prediction window must be >= 1")
    n = X.shape[0]
    if dp > n:
        raise ValueError(f"prediction window {dp} exceeds {n} rows")
    nb = n // dp
    Xb = X[: nb * dp].reshape(nb, dp, X.shape[1]).mean(axis=1)
    yb = (y[: nb * dp].reshape(nb, dp) == 1).any(axis=1).astype(np.int64)
    return Xb, yb
