"""Leakage-purged temporal cross-validation.

Folds are contiguous blocks of days in date order.  Around every test
block, training days whose input windows could share raw days with test
inputs are purged: day d is dropped when s - dt_eff <= d <= e + dt_eff
for a test block [s, e], where dt_eff is the largest window length the
representation can use.  The boundary day itself is included on both
sides.  For learned per-feature windows the cap (the maximum allowed
window) is used, which purges at least as much as the fitted lengths
require.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DATE_FMT, LocationDataset
from .ensemble import SmoteConfig, smote_balance
from .models import FittedModel, ModelSpec, fit_model
from .stats import AUPRC_CONVENTION, UndefinedStatisticError, auprc, auroc
from .windows import (FittedWindows, WindowSpec, ks_fit, ks_transform,
                      minmax_apply, minmax_fit, moving_average_matrix, stack)

CONVENTIONS = {
    "auprc": AUPRC_CONVENTION,
    "std": "population",
    "lr_schedule": "inverse_time",
    "purge": "inclusive_boundary",
}


@dataclass(frozen=True)
class FoldPlan:
    """k contiguous [start, end] day-index blocks covering 0..n-1."""

    n: int
    folds: tuple[tuple[int, int], ...]

    @property
    def k(self) -> int:
        return len(self.folds)


def make_folds(n: int, k: int = 5) -> FoldPlan:
    """Contiguous blocks; remainder days go to the earliest folds."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"cannot cut {n} rows into {k} folds")
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append((start, start + size - 1))
        start += size
    return FoldPlan(n=n, folds=tuple(folds))


def purge_rows(fold: tuple[int, int], dt_effective: int, n: int) -> np.ndarray:
    """Training rows dropped around a test block, boundary days included."""
    s, e = fold
    lo = max(0, s - dt_effective)
    hi = min(n - 1, e + dt_effective)
    around = np.arange(lo, hi + 1)
    return around[(around < s) | (around > e)]


def fold_row_sets(plan: FoldPlan, fold_index: int, dt_effective: int):
    """(test_rows, train_rows, purged_rows) among valid rows.

    Valid rows are those with a full dt_effective-day history.  The three
    sets are disjoint and their union is exactly the valid rows.
    """
    s, e = plan.folds[fold_index]
    valid_from = dt_effective
    test = np.arange(max(s, valid_from), e + 1)
    purged = purge_rows((s, e), dt_effective, plan.n)
    purged = purged[purged >= valid_from]
    blocked = set(range(s, e + 1)) | set(purged.tolist())
    train = np.array([d for d in range(valid_from, plan.n)
                      if d not in blocked], dtype=np.int64)
    return test, train, purged


@dataclass
class FoldResult:
    index: int
    start: int
    end: int
    included: bool
    exclusion_reason: str | None = None
    auroc_by_repeat: list = field(default_factory=list)
    auprc_by_repeat: list = field(default_factory=list)
    ks_windows: list | None = None
    n_train: int = 0
    n_test: int = 0
    train_positives: int = 0
    test_positives: int = 0


@dataclass
class EvalReport:
    fingerprint: dict
    plan: FoldPlan
    fold_results: list[FoldResult]
    repeats: int
    instance_index: list          # (state, date, y) per scored row
    instance_p: np.ndarray        # mean predicted probability over repeats

    @property
    def included_folds(self) -> list[FoldResult]:
        return [f for f in self.fold_results if f.included]

    @property
    def per_fold_auroc(self) -> np.ndarray:
        return np.array([np.mean(f.auroc_by_repeat)
                         for f in self.included_folds])

    @property
    def mean_auroc(self) -> float:
        return float(np.mean(self.per_fold_auroc))

    @property
    def std_across_folds(self) -> float:
        return float(np.std(self.per_fold_auroc))

    @property
    def std_across_repeats(self) -> float:
        by_repeat = np.array([[f.auroc_by_repeat[r]
                               for f in self.included_folds]
                              for r in range(self.repeats)])
        return float(np.std(by_repeat.mean(axis=1)))

    @property
    def mean_auprc(self) -> float:
        vals = [np.mean(f.auprc_by_repeat) for f in self.included_folds
                if f.auprc_by_repeat]
        return float(np.mean(vals)) if vals else float("nan")

    def to_dict(self) -> dict:
        folds = []
        for f in self.fold_results:
            folds.append({
                "fold": f.index + 1, "start": f.start, "end": f.end,
                "included": f.included,
                "exclusion_reason": f.exclusion_reason,
                "auroc_by_repeat": [float(v) for v in f.auroc_by_repeat],
                "auprc_by_repeat": [float(v) for v in f.auprc_by_repeat],
                "ks_windows": f.ks_windows,
                "n_train": f.n_train, "n_test": f.n_test,
                "train_positives": f.train_positives,
                "test_positives": f.test_positives,
            })
        return {
            "fingerprint": self.fingerprint,
            "conventions": dict(CONVENTIONS),
            "repeats": self.repeats,
            "folds": folds,
            "mean_auroc": self.mean_auroc,
            "std_across_folds": self.std_across_folds,
            "std_across_repeats": self.std_across_repeats,
            "mean_auprc": self.mean_auprc,
            "excluded_folds": [f.index + 1 for f in self.fold_results
                               if not f.included],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True,
                                         indent=1) + "\n")

    def write_probabilities_csv(self, path, with_state=False) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow((["state"] if with_state else []) + ["date", "y", "p"])
            for (state, date, y), p in zip(self.instance_index,
                                           self.instance_p):
                row = [date.strftime(DATE_FMT), int(y), repr(float(p))]
                if with_state:
                    row.insert(0, state)
                writer.writerow(row)


def _fit_fold_representation(ds: LocationDataset, window: WindowSpec,
                             train_rows):
    """Represent the whole matrix with transforms fitted on train rows."""
    if window.kind == "fixed":
        X_rep, fitted = moving_average_matrix(ds.X, window.dt), None
    elif window.kind == "stacked":
        X_rep, fitted = stack(ds.X, window.dt), None
    else:
        fitted = ks_fit(ds.X, ds.y, window.dt, rows=train_rows)
        X_rep = ks_transform(ds.X, fitted)
    scaler = minmax_fit(X_rep[train_rows])
    return minmax_apply(X_rep, scaler), fitted, scaler


def _smote_train(X_tr, y_tr, smote: SmoteConfig | None, rng):
    if smote is None:
        return X_tr, y_tr, np.empty((0, 2), dtype=np.int64)
    flat = X_tr.reshape(X_tr.shape[0], -1)
    X_aug, y_aug, parents = smote_balance(flat, y_tr, smote, rng=rng)
    return X_aug.reshape((-1,) + X_tr.shape[1:]), y_aug, parents


def run_cv(dataset: LocationDataset, window: WindowSpec, model: ModelSpec,
           repeats: int = 10, seed: int = 0, k: int = 5,
           smote: SmoteConfig | None = SmoteConfig(), workers: int = 1,
           supplements: tuple = (), pool_test: bool = False) -> EvalReport:
    """Repeated purged k-fold evaluation of one model on one state.

    Windows, scaler, and oversampling are fitted on each fold's purged
    training rows only.  Representation fits are deterministic, so they
    are shared across repeats; model seeds and SMOTE draws vary by
    (repeat, fold).  `supplements` adds other states' rows at the base
    training dates; `pool_test` additionally scores their test-date rows.
    """
    ds = dataset
    for extra in supplements:
        if [str(f) for f in extra.feature_ids] != [str(f) for f in ds.feature_ids]:
            raise ValueError(f"feature mismatch with supplement {extra.state}")
        if extra.dates != ds.dates:
            raise ValueError(f"date index mismatch with supplement {extra.state}")
    if model.kind == "random":
        smote = None
    dt_eff = window.effective
    plan = make_folds(ds.n, k)
    fold_results: list[FoldResult] = []
    instance_index: list = []
    instance_p_parts: list[np.ndarray] = []

    for fi in range(plan.k):
        s, e = plan.folds[fi]
        test_rows, train_rows, _ = fold_row_sets(plan, fi, dt_eff)
        fr = FoldResult(index=fi, start=s, end=e, included=True,
                        n_train=len(train_rows), n_test=len(test_rows))
        y_test = ds.y[test_rows]
        fr.test_positives = int(y_test.sum())
        fr.train_positives = int(ds.y[train_rows].sum())
        if len(test_rows) == 0 or y_test.min() == y_test.max():
            fr.included = False
            fr.exclusion_reason = "test block lacks both classes"
            fold_results.append(fr)
            continue
        tr_pos = fr.train_positives
        tr_neg = len(train_rows) - tr_pos
        if tr_pos == 0 or tr_neg == 0 or (
                smote is not None and min(tr_pos, tr_neg) < 2):
            fr.included = False
            fr.exclusion_reason = "too few minority training rows"
            fold_results.append(fr)
            continue

        X_rep, fitted, scaler = _fit_fold_representation(ds, window,
                                                         train_rows)
        if fitted is not None:
            fr.ks_windows = [int(t) for t in fitted.windows]
        X_tr_base = X_rep[train_rows]
        y_tr_base = ds.y[train_rows]
        extra_reps = {}
        for extra in supplements:
            rep = _transform_like(extra.X, window, fitted)
            extra_reps[extra.state] = minmax_apply(rep, scaler)
        if supplements:
            X_tr_base = np.concatenate(
                [X_tr_base] + [extra_reps[x.state][train_rows]
                               for x in supplements], axis=0)
            y_tr_base = np.concatenate(
                [y_tr_base] + [x.y[train_rows] for x in supplements], axis=0)
            # viability above is judged on the base state's rows alone;
            # the recorded counts describe the merged set actually fitted
            fr.n_train = int(y_tr_base.shape[0])
            fr.train_positives = int(y_tr_base.sum())

        score_rows = [(ds.state, test_rows, ds.y[test_rows])]
        X_score = {ds.state: X_rep}
        if pool_test:
            for extra in supplements:
                X_score[extra.state] = extra_reps[extra.state]
                score_rows.append((extra.state, test_rows,
                                   extra.y[test_rows]))

        p_sum = {state: np.zeros(len(rows))
                 for state, rows, _y in score_rows}
        for r in range(repeats):
            ss = np.random.SeedSequence(seed, spawn_key=(r, fi))
            smote_child, model_child = ss.spawn(2)
            rng_smote = np.random.default_rng(smote_child)
            model_seed = int(model_child.generate_state(1, np.uint64)[0])
            X_tr, y_tr, _parents = _smote_train(X_tr_base, y_tr_base,
                                                smote, rng_smote)
            fitted_model = fit_model(model, X_tr, y_tr, model_seed,
                                     workers=workers)
            preds = {state: fitted_model.predict_proba(X_score[state][rows])
                     for state, rows, _y in score_rows}
            y_all = np.concatenate([yv for _s, _r, yv in score_rows])
            p_all = np.concatenate([preds[state]
                                    for state, _r, _y in score_rows])
            fr.auroc_by_repeat.append(auroc(p_all, y_all))
            try:
                fr.auprc_by_repeat.append(auprc(p_all, y_all))
            except UndefinedStatisticError:
                pass
            for state, rows, _y in score_rows:
                p_sum[state] += preds[state]

        for state, rows, yv in score_rows:
            for j, row in enumerate(rows):
                instance_index.append((state, ds.dates[int(row)], int(yv[j])))
            instance_p_parts.append(p_sum[state] / repeats)
        fold_results.append(fr)

    if not any(f.included for f in fold_results):
        raise ValueError("every fold was excluded; nothing to report")

    fingerprint = {
        "state": ds.state, "n": ds.n, "m": ds.m, "seed": seed, "k": k,
        "repeats": repeats, "window": window.label,
        "model": model.fingerprint(),
        "smote": None if smote is None else {
            "k_neighbors": smote.k_neighbors,
            "target_ratio": smote.target_ratio},
        "supplements": [x.state for x in supplements],
        "pool_test": bool(pool_test),
    }
    return EvalReport(
        fingerprint=fingerprint, plan=plan, fold_results=fold_results,
        repeats=repeats, instance_index=instance_index,
        instance_p=(np.concatenate(instance_p_parts)
                    if instance_p_parts else np.empty(0)))


def _transform_like(X, window: WindowSpec, fitted: FittedWindows | None):
    if window.kind == "fixed":
        return moving_average_matrix(X, window.dt)
    if window.kind == "stacked":
        return stack(X, window.dt)
    return ks_transform(X, fitted)


def supplement_training(base: LocationDataset, extras, fold_train_rows,
                        window: WindowSpec, fitted=None):
    """Row-level view of the merge: (rows, labels) per contributing state.

    Exposed for structural checks; run_cv uses the same date-matching
    rule internally.
    """
    merged = [(base.state, np.asarray(fold_train_rows, dtype=np.int64),
               base.y[fold_train_rows])]
    for extra in extras:
        if extra.dates != base.dates:
            raise ValueError(f"date index mismatch with {extra.state}")
        merged.append((extra.state,
                       np.asarray(fold_train_rows, dtype=np.int64),
                       extra.y[fold_train_rows]))
    return merged
