"""Experiment suite behind the command-line interface.

Each command runs one analysis end to end and drops a self-describing
bundle into the output directory: a JSON report, one or more CSV series,
and PNG renderings of the same series.  Every file embeds the resolved
configuration fingerprint; wall-clock timestamps go only to the run.log
sidecar so reruns with the same configuration are byte-identical.

Published full-corpus reference numbers live in the shipped manifest and
are printed next to our results for comparison only; nothing asserts
against them because they required a corpus this artifact does not ship.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import plotting
from .cluster import hier_cluster, join_order
from .configfile import PROFILES, RunConfig, build_model_spec
from .crossval import EvalReport, run_cv
from .dataset import DATE_FMT, LocationDataset, date_range, load_state_dir, parse_date
from .ensemble import SmoteConfig
from .ingest import build_dataset, parse_incidents, parse_news_file
from .registry import FEATURE_GROUPS, canonical_registry, reference_values
from .stats import UndefinedStatisticError, auprc, auroc, kruskal_wallis, spearman
from .synth import PlantedSignal, SynthConfig, synth_generate, synth_incidents, write_incidents_csv
from .windows import WindowSpec, aggregate_dates, propagate_labels

COMMANDS = ("ingest", "synth", "baseline", "sweep-windows", "temporal-locality",
            "train-corr", "ablate", "characteristics", "pred-windows",
            "transfer", "group-test", "coarse-demo")

# model/window grid of the summary table; keys match the reference manifest
BASELINE_GRID = (
    ("random", "fixed:1"),
    ("rf", "fixed:1"), ("rf", "fixed:14"), ("rf", "ks:14"),
    ("ada", "fixed:1"), ("ada", "fixed:14"), ("ada", "ks:14"),
    ("ffnn1", "stacked:1"), ("ffnn1", "stacked:7"), ("ffnn2", "stacked:7"),
    ("ffnn1", "ks:7"), ("lstm", "stacked:7"),
)


def grid_key(kind: str, window: str) -> str:
    return "random" if kind == "random" else f"{kind}/{window}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved per-invocation settings shared by every command."""

    out_dir: Path
    data_dir: Path | None = None
    profile: str = "desk"
    seed: int = 0
    workers: int = 1
    states: tuple = ()                  # empty = every state present
    sweep_models: tuple = ("rf", "ada")
    sweep_range: tuple = (1, 14)
    prediction_range: tuple = (1, 7)
    repeats: int = 10
    k_folds: int = 5
    reference_model: str = "rf"
    reference_window: str = "ks:14"
    options: RunConfig = field(default_factory=RunConfig.empty)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")
        for lo, hi in (self.sweep_range, self.prediction_range):
            if lo < 1 or hi < lo:
                raise ValueError(f"invalid range {lo}-{hi}")
        if self.repeats < 1 or self.k_folds < 2:
            raise ValueError("repeats >= 1 and k_folds >= 2 required")

    @classmethod
    def resolve(cls, config: RunConfig, out_dir, data_dir=None,
                profile: str = "desk", seed: int = 0,
                workers: int = 1) -> "ExperimentConfig":
        return cls(
            out_dir=Path(out_dir),
            data_dir=Path(data_dir) if data_dir is not None else None,
            profile=profile,
            seed=int(seed),
            workers=int(workers),
            states=tuple(config.get_list("states")),
            sweep_models=tuple(config.get_list("sweep.models", ["rf", "ada"])),
            sweep_range=config.get_range("sweep.range", (1, 14)),
            prediction_range=config.get_range("pred.range", (1, 7)),
            repeats=config.get_int("cv.repeats", 10),
            k_folds=config.get_int("cv.k", 5),
            reference_model=config.get("reference.model", "rf"),
            reference_window=config.get("reference.window", "ks:14"),
            options=config,
        )

    def fingerprint(self, command: str) -> dict:
        # no filesystem paths here: the same configuration must hash the
        # same wherever the artifacts land
        return {
            "command": command,
            "profile": self.profile,
            "seed": self.seed,
            "states": list(self.states),
            "sweep_models": list(self.sweep_models),
            "sweep_range": list(self.sweep_range),
            "prediction_range": list(self.prediction_range),
            "repeats": self.repeats,
            "k_folds": self.k_folds,
            "reference": [self.reference_model, self.reference_window],
            "options": self.options.fingerprint(),
        }

    def smote(self) -> SmoteConfig | None:
        if not self.options.get_bool("smote.enabled", True):
            return None
        return SmoteConfig(
            k_neighbors=self.options.get_int("smote.k", 5),
            target_ratio=self.options.get_float("smote.ratio", 1.0))


class CommandOutputs:
    """Writers for one command's artifact bundle."""

    def __init__(self, cfg: ExperimentConfig, command: str):
        self.dir = cfg.out_dir
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.fingerprint = cfg.fingerprint(command)
        self.hash = plotting.fingerprint_hash(self.fingerprint)

    def path(self, name: str) -> Path:
        return self.dir / name

    def write_json(self, payload: dict, name: str | None = None) -> Path:
        out = {"fingerprint": self.fingerprint}
        out.update(payload)
        path = self.path(name or f"{self.command}.json")
        path.write_text(json.dumps(out, sort_keys=True, indent=1) + "\n")
        return path

    def write_csv(self, header, rows, name: str | None = None) -> Path:
        path = self.path(name or f"{self.command}.csv")
        with open(path, "w", newline="") as fh:
            fh.write(f"# fingerprint {self.hash}\n")
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        return path

    def log(self, message: str) -> None:
        stamp = dt.datetime.now().isoformat(timespec="seconds")
        with open(self.path("run.log"), "a") as fh:
            fh.write(f"{stamp} [{self.command}] {message}\n")


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, dt.date):
        return v.strftime(DATE_FMT)
    return v


def _round(v, nd=6):
    if v is None:
        return None
    v = float(v)
    return None if np.isnan(v) else round(v, nd)


def _load_datasets(cfg: ExperimentConfig, out: CommandOutputs):
    """Per-state datasets under data_dir, honoring the states filter.

    Requested states without a file are skipped with a notice instead of
    failing the whole command.
    """
    if cfg.data_dir is None:
        raise ValueError("this command needs --data pointing at per-state CSVs")
    datasets = load_state_dir(cfg.data_dir)
    skipped = []
    if cfg.states:
        missing = [s for s in cfg.states if s not in datasets]
        for s in missing:
            out.log(f"notice: no dataset for state {s}, skipping")
            print(f"notice: no dataset for state {s}, skipping")
        skipped = missing
        datasets = {s: datasets[s] for s in cfg.states if s in datasets}
    if not datasets:
        raise ValueError("no datasets left after applying the states filter")
    return datasets, skipped


def run_one(cfg: ExperimentConfig, ds: LocationDataset, kind: str,
            window_label: str, supplements=(), pool_test=False,
            repeats: int | None = None) -> EvalReport:
    """One repeated-CV evaluation with the invocation-wide settings."""
    spec = build_model_spec(kind, cfg.profile, cfg.options)
    window = WindowSpec.parse(window_label)
    return run_cv(ds, window, spec,
                  repeats=cfg.repeats if repeats is None else repeats,
                  seed=cfg.seed, k=cfg.k_folds, smote=cfg.smote(),
                  workers=cfg.workers, supplements=tuple(supplements),
                  pool_test=pool_test)


def _report_row(report: EvalReport) -> dict:
    return {
        "mean_auroc": _round(report.mean_auroc),
        "std_across_folds": _round(report.std_across_folds),
        "std_across_repeats": _round(report.std_across_repeats),
        "mean_auprc": _round(report.mean_auprc),
        "excluded_folds": [f.index + 1 for f in report.fold_results
                           if not f.included],
    }


def _summarize_datasets(datasets) -> list[dict]:
    rows = []
    for state in sorted(datasets):
        ds = datasets[state]
        rows.append({"state": state, "n": ds.n, "m": ds.m,
                     "positives": ds.n_events,
                     "imbalance": _round(ds.imbalance)})
    return rows


def _print_dataset_summary(rows) -> None:
    for r in rows:
        print(f"{r['state']}: n={r['n']} m={r['m']} "
              f"positives={r['positives']} imbalance={r['imbalance']:.4f}")


def _dataset_summary_bundle(out: CommandOutputs, datasets, extra: dict,
                            dataset_dir: Path) -> dict:
    rows = _summarize_datasets(datasets)
    payload = {"datasets": rows, "dataset_dir": dataset_dir.name}
    payload.update(extra)
    out.write_json(payload)
    out.write_csv(["state", "n", "m", "positives", "imbalance"],
                  [[r["state"], r["n"], r["m"], r["positives"],
                    r["imbalance"]] for r in rows])
    states = [r["state"] for r in rows]
    plotting.grouped_bars(
        out.path(f"{out.command}_positives.png"), states,
        {"positives": [r["positives"] for r in rows]},
        "attack days", "Labeled days per state", out.fingerprint)
    _print_dataset_summary(rows)
    return payload


# ---------------------------------------------------------------------------
# dataset commands


def cmd_ingest(cfg: ExperimentConfig, news_paths, news_format: str,
               incidents_path=None) -> dict:
    """Parse raw news and incident files into per-state daily CSVs."""
    out = CommandOutputs(cfg, "ingest")
    records = []
    counts_total = {}
    for path in news_paths:
        recs, counts = parse_news_file(path, news_format)
        records.extend(recs)
        for key, val in counts.as_dict().items():
            counts_total[key] = counts_total.get(key, 0) + val
        out.log(f"parsed {path}: {counts.as_dict()}")
    incidents = []
    incident_counts = {}
    if incidents_path is not None:
        incidents, icounts = parse_incidents(incidents_path)
        incident_counts = icounts.as_dict()
        out.log(f"parsed {incidents_path}: {incident_counts}")

    start_key = cfg.options.get("ingest.start")
    end_key = cfg.options.get("ingest.end")
    if start_key and end_key:
        dates = date_range(parse_date(start_key), parse_date(end_key))
    else:
        seen = [r.publish_date for r in records] + [i.date for i in incidents]
        if not seen:
            raise ValueError("no parseable records and no ingest.start/end "
                             "configured; cannot infer a date range")
        dates = date_range(min(seen), max(seen))

    states = list(cfg.states)
    if not states:
        states = sorted({r.state for r in records} |
                        {i.state for i in incidents})
    if not states:
        raise ValueError("no states resolved from inputs or configuration")

    registry = canonical_registry()
    dataset_dir = out.path("datasets")
    datasets = {}
    for state in states:
        ds = build_dataset(records, incidents, state, dates, registry)
        ds.save(dataset_dir)
        datasets[state] = ds
    return _dataset_summary_bundle(
        out, datasets,
        {"news_counts": counts_total, "incident_counts": incident_counts,
         "date_range": [dates[0].strftime(DATE_FMT),
                        dates[-1].strftime(DATE_FMT)]},
        dataset_dir)


def cmd_synth(cfg: ExperimentConfig) -> dict:
    """Generate a synthetic per-state corpus plus a matching incident table."""
    out = CommandOutputs(cfg, "synth")
    opts = cfg.options
    signal = None
    if opts.get("synth.signal", "planted") != "none":
        groups = opts.get_list("synth.groups")
        signal = PlantedSignal(
            window_len=opts.get_int("synth.window", 7),
            affected_fraction=opts.get_float("synth.fraction", 0.5),
            shift=opts.get_float("synth.shift", 3.0),
            affected_groups=tuple(groups) if groups else None)
    config = SynthConfig(
        n_days=opts.get_int("synth.days", 800),
        m_features=opts.get_int("synth.features", 40),
        n_states=opts.get_int("synth.states", 1),
        imbalance=opts.get_float("synth.imbalance", 0.02),
        signal=signal, seed=cfg.seed)
    datasets = {ds.state: ds for ds in synth_generate(config)}
    dataset_dir = out.path("datasets")
    for ds in datasets.values():
        ds.save(dataset_dir)
    incidents = synth_incidents(list(datasets.values()), cfg.seed)
    write_incidents_csv(incidents, out.path("incidents.csv"))
    return _dataset_summary_bundle(
        out, datasets,
        {"signal": None if signal is None else {
            "window_len": signal.window_len,
            "affected_fraction": signal.affected_fraction,
            "shift": signal.shift,
            "affected_groups": list(signal.affected_groups or [])},
         "incidents": len(incidents)},
        dataset_dir)


# ---------------------------------------------------------------------------
# model evaluation commands


def cmd_baseline(cfg: ExperimentConfig) -> dict:
    """Grid of models x windows x states, next to published references."""
    out = CommandOutputs(cfg, "baseline")
    datasets, skipped = _load_datasets(cfg, out)
    row_filter = cfg.options.get_list("baseline.rows")
    grid = [(kind, win) for kind, win in BASELINE_GRID
            if not row_filter or grid_key(kind, win) in row_filter]
    results: dict[str, dict] = {}
    csv_rows = []
    for kind, win in grid:
        key = grid_key(kind, win)
        results[key] = {}
        for state in sorted(datasets):
            report = run_one(cfg, datasets[state], kind, win)
            row = _report_row(report)
            results[key][state] = row
            csv_rows.append([key, state, row["mean_auroc"],
                             row["std_across_folds"],
                             row["std_across_repeats"], row["mean_auprc"],
                             len(row["excluded_folds"])])
            out.log(f"{key} {state}: auroc={row['mean_auroc']}")

    published = reference_values().get("baseline_auroc", {})
    payload = {
        "grid": [grid_key(kind, win) for kind, win in grid],
        "results": results,
        "skipped_states": skipped,
        "published_reference": published.get("rows", {}),
    }
    out.write_json(payload)
    out.write_csv(["model", "state", "mean_auroc", "std_across_folds",
                   "std_across_repeats", "mean_auprc", "excluded_folds"],
                  csv_rows)
    states = sorted(datasets)
    plotting.grouped_bars(
        out.path("baseline_auroc.png"), states,
        {key: [results[key][s]["mean_auroc"] for s in states]
         for key in results},
        "mean AUROC",
        "Baseline grid (bars: mean over folds)", out.fingerprint,
        yerr={key: [results[key][s]["std_across_folds"] for s in states]
              for key in results},
        hline=0.5)
    print(f"{'model':<16}" + "".join(f"{s:>10}" for s in states))
    for key in results:
        cells = "".join(f"{results[key][s]['mean_auroc']:>10.3f}"
                        for s in states)
        print(f"{key:<16}{cells}")
    pub_rows = published.get("rows", {})
    overlap = any(s in pub_rows.get(key, {}) for key in results
                  for s in states)
    if overlap:
        print("published full-corpus references (comparison only):")
        for key in results:
            if key in pub_rows:
                cells = "".join(
                    f"{pub_rows[key][s][0]:>10.3f}" if s in pub_rows[key]
                    else f"{'-':>10}" for s in states)
                print(f"{key:<16}{cells}")
    return payload


def cmd_window_sweep(cfg: ExperimentConfig) -> dict:
    """AUROC as a function of the fixed moving-average length."""
    out = CommandOutputs(cfg, "sweep-windows")
    datasets, skipped = _load_datasets(cfg, out)
    lo, hi = cfg.sweep_range
    results: dict[str, dict] = {}
    csv_rows = []
    for state in sorted(datasets):
        for kind in cfg.sweep_models:
            curve = []
            for dtv in range(lo, hi + 1):
                report = run_one(cfg, datasets[state], kind, f"fixed:{dtv}")
                curve.append({"dt": dtv,
                              "mean_auroc": _round(report.mean_auroc),
                              "std_across_folds": _round(report.std_across_folds)})
                csv_rows.append([state, kind, dtv, curve[-1]["mean_auroc"],
                                 curve[-1]["std_across_folds"]])
            results[f"{state}/{kind}"] = curve
            out.log(f"swept {state}/{kind} over {lo}..{hi}")
    payload = {"range": [lo, hi], "curves": results,
               "skipped_states": skipped}
    out.write_json(payload)
    out.write_csv(["state", "model", "dt", "mean_auroc", "std_across_folds"],
                  csv_rows)
    plotting.line_series(
        out.path("sweep_windows.png"),
        {name: ([pt["dt"] for pt in curve],
                [pt["mean_auroc"] for pt in curve])
         for name, curve in results.items()},
        "window length (days)", "mean AUROC", "Fixed-window sweep",
        out.fingerprint,
        yerr={name: [pt["std_across_folds"] for pt in curve]
              for name, curve in results.items()},
        hline=0.5)
    for name, curve in sorted(results.items()):
        best = max(curve, key=lambda pt: pt["mean_auroc"])
        print(f"{name}: best dt={best['dt']} auroc={best['mean_auroc']:.3f}")
    return payload


def _reference_probabilities(cfg: ExperimentConfig, datasets, out):
    """Mean predicted probability per (state, date) from the reference model."""
    prob: dict[tuple, float] = {}
    reports = {}
    for state in sorted(datasets):
        report = run_one(cfg, datasets[state], cfg.reference_model,
                         cfg.reference_window)
        reports[state] = report
        for (st, date, _y), p in zip(report.instance_index,
                                     report.instance_p):
            prob[(st, date)] = float(p)
        out.log(f"reference run {state}: auroc={report.mean_auroc:.3f}")
    return prob, reports


def cmd_temporal_locality(cfg: ExperimentConfig) -> dict:
    """Predicted probability of each event vs days since the previous one."""
    out = CommandOutputs(cfg, "temporal-locality")
    datasets, skipped = _load_datasets(cfg, out)
    prob, _reports = _reference_probabilities(cfg, datasets, out)
    pairs = []           # (state, date, elapsed, p)
    excluded = {"first_event": 0, "unscored": 0}
    for state in sorted(datasets):
        ds = datasets[state]
        event_days = [ds.dates[i] for i in np.flatnonzero(ds.y == 1)]
        if event_days:
            excluded["first_event"] += 1     # no previous attack to measure
        for prev, day in zip(event_days, event_days[1:]):
            if (state, day) not in prob:
                excluded["unscored"] += 1
                continue
            pairs.append([state, day, (day - prev).days, prob[(state, day)]])

    def _rs(rows):
        if len(rows) < 2:
            return None
        try:
            return _round(spearman([r[2] for r in rows],
                                   [r[3] for r in rows]))
        except UndefinedStatisticError:
            return None

    per_state = {state: _rs([r for r in pairs if r[0] == state])
                 for state in sorted(datasets)}
    payload = {
        "pairs": len(pairs),
        "excluded": excluded,
        "spearman_by_state": per_state,
        "spearman_pooled": _rs(pairs),
        "skipped_states": skipped,
    }
    out.write_json(payload)
    out.write_csv(["state", "date", "elapsed_days", "probability"], pairs)
    if pairs:
        plotting.scatter(out.path("temporal_locality.png"),
                         [r[2] for r in pairs], [r[3] for r in pairs],
                         "days since previous attack", "P(y=1)",
                         "Event spacing vs predicted probability",
                         out.fingerprint, labels=[r[0] for r in pairs])
    print(f"pairs={len(pairs)} pooled r_s={payload['spearman_pooled']}")
    for state, rs in per_state.items():
        print(f"  {state}: r_s={rs}")
    return payload


def cmd_train_event_correlation(cfg: ExperimentConfig) -> dict:
    """Fold AUROC vs the number of positives available for training."""
    out = CommandOutputs(cfg, "train-corr")
    datasets, skipped = _load_datasets(cfg, out)
    _prob, reports = _reference_probabilities(cfg, datasets, out)
    rows = []            # (state, fold, repeat, train_positives, auroc)
    for state in sorted(reports):
        for fr in reports[state].included_folds:
            for rep, value in enumerate(fr.auroc_by_repeat):
                rows.append([state, fr.index + 1, rep + 1,
                             fr.train_positives, _round(value)])

    def _rs(selected):
        if len(selected) < 2:
            return None
        try:
            return _round(spearman([r[3] for r in selected],
                                   [r[4] for r in selected]))
        except UndefinedStatisticError:
            return None

    exclude = cfg.options.get("traincorr.exclude")
    if exclude is None and datasets:
        # default analogue of the most event-heavy state
        exclude = max(sorted(datasets),
                      key=lambda s: datasets[s].n_events)
    payload = {
        "pairs": len(rows),
        "spearman_all": _rs(rows),
        "excluded_state": exclude,
        "spearman_excluding": _rs([r for r in rows if r[0] != exclude]),
        "skipped_states": skipped,
    }
    out.write_json(payload)
    out.write_csv(["state", "fold", "repeat", "train_positives", "auroc"],
                  rows)
    if rows:
        plotting.scatter(out.path("train_corr.png"),
                         [r[3] for r in rows], [r[4] for r in rows],
                         "training positives", "fold AUROC",
                         "Training positives vs fold AUROC",
                         out.fingerprint, labels=[r[0] for r in rows])
    print(f"pairs={len(rows)} r_s={payload['spearman_all']} "
          f"excluding {exclude}: {payload['spearman_excluding']}")
    return payload


def cmd_feature_ablation(cfg: ExperimentConfig) -> dict:
    """Reference model with each feature group removed in turn."""
    out = CommandOutputs(cfg, "ablate")
    datasets, skipped = _load_datasets(cfg, out)
    results: dict[str, dict] = {}
    csv_rows = []
    for state in sorted(datasets):
        ds = datasets[state]
        results[state] = {}
        for dropped in ("none",) + FEATURE_GROUPS:
            if dropped == "none":
                sub = ds
            else:
                keep = [i for i, fid in enumerate(ds.feature_ids)
                        if getattr(fid, "group", None) != dropped]
                if len(keep) in (0, ds.m):
                    out.log(f"notice: {state} has no {dropped} columns "
                            "to drop, skipping")
                    continue
                sub = LocationDataset(
                    state=ds.state, dates=ds.dates, X=ds.X[:, keep],
                    y=ds.y, feature_ids=[ds.feature_ids[i] for i in keep],
                    step_days=ds.step_days)
            report = run_one(cfg, sub, cfg.reference_model,
                             cfg.reference_window)
            row = _report_row(report)
            row["m"] = sub.m
            results[state][dropped] = row
            csv_rows.append([state, dropped, sub.m, row["mean_auroc"],
                             row["std_across_folds"]])
            out.log(f"{state} drop={dropped}: auroc={row['mean_auroc']}")
    payload = {"results": results, "skipped_states": skipped,
               "groups": list(FEATURE_GROUPS)}
    out.write_json(payload)
    out.write_csv(["state", "dropped_group", "m", "mean_auroc",
                   "std_across_folds"], csv_rows)
    states = sorted(results)
    drops = ["none"] + [g for g in FEATURE_GROUPS]
    plotting.grouped_bars(
        out.path("ablate.png"), states,
        {d: [results[s].get(d, {}).get("mean_auroc", float("nan"))
             for s in states] for d in drops},
        "mean AUROC", "Feature-group ablation", out.fingerprint, hline=0.5)
    for state in states:
        cells = " ".join(f"{d}={results[state][d]['mean_auroc']:.3f}"
                         for d in results[state])
        print(f"{state}: {cells}")
    return payload


def cmd_attack_characteristics(cfg: ExperimentConfig,
                               incidents_path=None) -> dict:
    """Rank tests of predicted probability across incident categories."""
    out = CommandOutputs(cfg, "characteristics")
    datasets, skipped = _load_datasets(cfg, out)
    if incidents_path is None:
        incidents_path = cfg.options.get("characteristics.incidents")
    if incidents_path is None and cfg.data_dir is not None:
        candidate = Path(cfg.data_dir).parent / "incidents.csv"
        if candidate.exists():
            incidents_path = candidate
    if incidents_path is None:
        raise ValueError("no incident table: pass --incidents or set "
                         "characteristics.incidents")
    incidents, icounts = parse_incidents(incidents_path,
                                         extra_codes=sorted(datasets))
    prob, _reports = _reference_probabilities(cfg, datasets, out)

    scored = []
    dropped = 0
    for rec in incidents:
        key = (rec.state, rec.date)
        if rec.state in datasets and key in prob:
            scored.append((rec, prob[key]))
        else:
            dropped += 1

    dimensions = {
        "attack_type": lambda r: r.attack_type,
        "weapon_type": lambda r: r.weapon_type,
        "target_type": lambda r: r.target_type,
        "group_name": lambda r: r.group_name,
    }
    tests: dict[str, dict] = {}
    box_rows = []
    for dim in sorted(dimensions):
        getter = dimensions[dim]
        by_cat: dict[str, list] = {}
        for rec, p in scored:
            by_cat.setdefault(getter(rec) or "other", []).append(p)
        # rank test needs >= 2 members per category; pool strays
        pooled: dict[str, list] = {}
        for cat in sorted(by_cat):
            target = cat if len(by_cat[cat]) >= 2 else "other"
            pooled.setdefault(target, []).extend(by_cat[cat])
        pooled = {c: v for c, v in pooled.items() if len(v) >= 2}
        entry: dict = {"categories": {}}
        for cat in sorted(pooled):
            vals = np.array(pooled[cat])
            entry["categories"][cat] = {
                "count": int(vals.size),
                "mean": _round(vals.mean()),
                "std": _round(vals.std()),
            }
            box_rows.append([dim, cat, int(vals.size),
                             _round(vals.mean()), _round(vals.std())])
        if len(pooled) < 2:
            entry["note"] = "fewer than two usable categories"
        else:
            try:
                res = kruskal_wallis([pooled[c] for c in sorted(pooled)])
                entry["h"] = _round(res.h)
                entry["p"] = _round(res.p)
            except UndefinedStatisticError:
                entry["h"] = 0.0
                entry["p"] = 1.0
                entry["note"] = "all probabilities tied"
        tests[dim] = entry
    manifest_note = reference_values().get(
        "attack_characteristics", {}).get("note")
    payload = {"tests": tests, "scored_events": len(scored),
               "dropped_events": dropped,
               "incident_parse": icounts.as_dict(),
               "published_note": manifest_note,
               "skipped_states": skipped}
    out.write_json(payload)
    out.write_csv(["dimension", "category", "count", "mean_probability",
                   "std_probability"], box_rows)
    panels = {}
    for dim, entry in tests.items():
        panels[dim] = [(cat, entry["categories"][cat]["mean"],
                        entry["categories"][cat]["std"],
                        entry["categories"][cat]["count"])
                       for cat in sorted(entry["categories"])]
    if any(panels.values()):
        plotting.category_spreads(out.path("characteristics.png"), panels,
                                  "P(y=1)", "Probability by incident category",
                                  out.fingerprint)
    for dim, entry in tests.items():
        print(f"{dim}: H={entry.get('h')} p={entry.get('p')} "
              f"categories={len(entry['categories'])}")
    if manifest_note:
        print(f"published reference: {manifest_note}")
    return payload


def cmd_prediction_windows(cfg: ExperimentConfig) -> dict:
    """Sweep the prediction window under both widening modes."""
    out = CommandOutputs(cfg, "pred-windows")
    datasets, skipped = _load_datasets(cfg, out)
    lo, hi = cfg.prediction_range
    results: dict[str, list] = {}
    csv_rows = []
    for state in sorted(datasets):
        ds = datasets[state]
        for mode in ("propagate", "aggregate"):
            curve = []
            for dp in range(lo, hi + 1):
                if mode == "propagate":
                    widened = LocationDataset(
                        state=ds.state, dates=ds.dates, X=ds.X,
                        y=propagate_labels(ds.y, dp),
                        feature_ids=ds.feature_ids, step_days=ds.step_days)
                else:
                    Xa, ya = aggregate_dates(ds.X, ds.y, dp)
                    widened = LocationDataset(
                        state=ds.state, dates=ds.dates[::dp][:len(ya)],
                        X=Xa, y=ya, feature_ids=ds.feature_ids,
                        step_days=ds.step_days * dp)
                point = {"dp": dp, "n": widened.n,
                         "positives": widened.n_events}
                try:
                    report = run_one(cfg, widened, cfg.reference_model,
                                     cfg.reference_window)
                    point["mean_auroc"] = _round(report.mean_auroc)
                    point["std_across_folds"] = _round(report.std_across_folds)
                except (ValueError, RuntimeError) as exc:
                    point["error"] = str(exc)
                    out.log(f"notice: {state} {mode} dp={dp} failed: {exc}")
                curve.append(point)
                csv_rows.append([state, mode, dp, point["n"],
                                 point["positives"],
                                 point.get("mean_auroc"),
                                 point.get("std_across_folds")])
            results[f"{state}/{mode}"] = curve
    payload = {"range": [lo, hi], "curves": results,
               "skipped_states": skipped}
    out.write_json(payload)
    out.write_csv(["state", "mode", "dp", "n", "positives", "mean_auroc",
                   "std_across_folds"], csv_rows)
    plotting.line_series(
        out.path("pred_windows.png"),
        {name: ([pt["dp"] for pt in curve if "mean_auroc" in pt],
                [pt["mean_auroc"] for pt in curve if "mean_auroc" in pt])
         for name, curve in results.items()},
        "prediction window (days)", "mean AUROC",
        "Prediction-window sweep", out.fingerprint, hline=0.5)
    for name, curve in sorted(results.items()):
        vals = [f"{pt['dp']}:{pt.get('mean_auroc')}" for pt in curve]
        print(f"{name}: {' '.join(vals)}")
    return payload


def cmd_transfer(cfg: ExperimentConfig) -> dict:
    """Change in AUROC when another state's rows supplement training."""
    out = CommandOutputs(cfg, "transfer")
    datasets, skipped = _load_datasets(cfg, out)
    states = sorted(datasets)
    if len(states) < 2:
        raise ValueError("transfer needs at least two states")
    baseline = {}
    for state in states:
        report = run_one(cfg, datasets[state], cfg.reference_model,
                         cfg.reference_window)
        baseline[state] = _round(report.mean_auroc)
        out.log(f"baseline {state}: auroc={baseline[state]}")
    result = HeatmapResult(states=states)
    csv_rows = []
    for test in states:
        for supp in states:
            if supp == test:
                continue      # duplicated rows, not a transfer case
            try:
                report = run_one(cfg, datasets[test], cfg.reference_model,
                                 cfg.reference_window,
                                 supplements=(datasets[supp],))
            except ValueError as exc:
                out.log(f"notice: {test}+{supp} skipped: {exc}")
                csv_rows.append([test, supp, baseline[test], None, None])
                continue
            supplemented = _round(report.mean_auroc)
            delta = _round(supplemented - baseline[test])
            result.set(test, supp, delta)
            csv_rows.append([test, supp, baseline[test], supplemented,
                             delta])
            out.log(f"{test}+{supp}: delta={delta}")
    published = reference_values().get("transfer_example")
    payload = {"baseline": baseline, "deltas": result.to_dict(),
               "published_reference": published,
               "skipped_states": skipped}
    out.write_json(payload)
    out.write_csv(["test_state", "supplement_state", "baseline_auroc",
                   "supplemented_auroc", "delta_auroc"], csv_rows)
    plotting.heatmap(out.path("transfer.png"), result.matrix(),
                     [f"{s} (avg {result.row_average(s):+.3f})"
                      for s in states],
                     states, "Transfer: change in AUROC vs baseline",
                     out.fingerprint)
    print("test -> supplement deltas:")
    for test in states:
        cells = " ".join(
            f"{supp}:{result.get(test, supp):+.3f}"
            for supp in states if supp != test
            and result.get(test, supp) is not None)
        print(f"  {test}: {cells} (row avg "
              f"{result.row_average(test):+.3f})")
    if published:
        print(f"published full-corpus reference: "
              f"{published['test']}+{published['supplement']} -> "
              f"{published['delta_auroc']:+.3f} (comparison only)")
    return payload


@dataclass
class HeatmapResult:
    """Off-diagonal change-in-score matrix keyed by state pairs."""

    states: list
    deltas: dict = field(default_factory=dict)

    def set(self, test: str, supplement: str, delta: float) -> None:
        if test == supplement:
            raise ValueError("diagonal cells are undefined")
        self.deltas[(test, supplement)] = delta

    def get(self, test: str, supplement: str):
        return self.deltas.get((test, supplement))

    def matrix(self) -> np.ndarray:
        n = len(self.states)
        mat = np.full((n, n), np.nan)
        for i, test in enumerate(self.states):
            for j, supp in enumerate(self.states):
                val = self.get(test, supp)
                if val is not None:
                    mat[i, j] = val
        return mat

    def row_average(self, test: str) -> float:
        vals = [v for (t, _s), v in self.deltas.items() if t == test]
        return float(np.mean(vals)) if vals else float("nan")

    def col_average(self, supplement: str) -> float:
        vals = [v for (_t, s), v in self.deltas.items() if s == supplement]
        return float(np.mean(vals)) if vals else float("nan")

    def to_dict(self) -> dict:
        return {
            "cells": {f"{t}+{s}": v for (t, s), v in
                      sorted(self.deltas.items())},
            "row_average": {t: _round(self.row_average(t))
                            for t in self.states},
            "col_average": {s: _round(self.col_average(s))
                            for s in self.states},
        }


def cmd_group_testing(cfg: ExperimentConfig) -> dict:
    """Pool similar low-event states to offset label scarcity."""
    out = CommandOutputs(cfg, "group-test")
    datasets, skipped = _load_datasets(cfg, out)
    explicit = cfg.options.get_list("group.states")
    if explicit:
        chosen = [s for s in explicit if s in datasets]
    else:
        lo_ev = cfg.options.get_int("group.min_events", 5)
        hi_ev = cfg.options.get_int("group.max_events", 7)
        chosen = [s for s in sorted(datasets)
                  if lo_ev <= datasets[s].n_events <= hi_ev]
    if len(chosen) < 2:
        raise ValueError("group testing needs >= 2 qualifying states "
                         f"(got {chosen})")
    chosen = sorted(chosen)
    # similarity from mean news-feature vectors, closest joins first
    points = np.stack([datasets[s].X.mean(axis=0) for s in chosen])
    dend = hier_cluster(points)
    similar = {chosen[i]: [chosen[j] for j in join_order(dend, i)]
               for i in range(len(chosen))}

    lo_t, hi_t = cfg.options.get_range("group.range", (6, 16))
    group_threshold = cfg.options.get_int("group.threshold",
                                          (lo_t + hi_t) // 2)

    def pick_supplements(state: str, threshold: int):
        """Add similar states while cumulative positives stay <= threshold."""
        total = datasets[state].n_events
        picked = []
        for other in similar[state]:
            if total > threshold:
                break
            picked.append(other)
            total += datasets[other].n_events
        return picked, total > threshold

    csv_rows = []
    sweep: dict[str, list] = {}
    for state in chosen:
        curve = []
        for threshold in range(lo_t, hi_t + 1):
            supps, reached = pick_supplements(state, threshold)
            report = run_one(cfg, datasets[state], cfg.reference_model,
                             cfg.reference_window,
                             supplements=[datasets[s] for s in supps])
            point = {"threshold": threshold, "supplements": supps,
                     "threshold_reached": reached,
                     "mean_auroc": _round(report.mean_auroc),
                     "std_across_folds": _round(report.std_across_folds)}
            curve.append(point)
            csv_rows.append(["single", state, threshold,
                             "+".join(supps) or "-", point["mean_auroc"],
                             point["std_across_folds"]])
        sweep[state] = curve
        out.log(f"single-state sweep {state} done")

    grouped: dict[str, dict] = {}
    for state in chosen:
        supps, reached = pick_supplements(state, group_threshold)
        report = run_one(cfg, datasets[state], cfg.reference_model,
                         cfg.reference_window,
                         supplements=[datasets[s] for s in supps],
                         pool_test=True)
        grouped[state] = {"supplements": supps,
                          "threshold": group_threshold,
                          "threshold_reached": reached,
                          "mean_auroc": _round(report.mean_auroc),
                          "std_across_folds": _round(report.std_across_folds)}
        csv_rows.append(["group", state, group_threshold,
                         "+".join(supps) or "-",
                         grouped[state]["mean_auroc"],
                         grouped[state]["std_across_folds"]])
        out.log(f"group run {state} done")

    payload = {"states": chosen, "similarity": similar,
               "threshold_range": [lo_t, hi_t],
               "single_state": sweep, "group": grouped,
               "skipped_states": skipped}
    out.write_json(payload)
    out.write_csv(["mode", "state", "threshold", "supplements",
                   "mean_auroc", "std_across_folds"], csv_rows)
    plotting.line_series(
        out.path("group_test.png"),
        {state: ([pt["threshold"] for pt in curve],
                 [pt["mean_auroc"] for pt in curve])
         for state, curve in sweep.items()},
        "event threshold", "mean AUROC",
        "Single-state testing with supplemented training", out.fingerprint,
        yerr={state: [pt["std_across_folds"] for pt in curve]
              for state, curve in sweep.items()},
        hline=0.5)
    for state in chosen:
        order = " > ".join(similar[state])
        print(f"{state}: similar [{order}] group auroc="
              f"{grouped[state]['mean_auroc']} "
              f"(+{'+'.join(grouped[state]['supplements']) or '-'})")
    return payload


# ---------------------------------------------------------------------------
# arithmetic demo


def cmd_coarse_eval_demo(cfg: ExperimentConfig, basis: str = "days") -> dict:
    """Score every day of the five most-attacked states as positive.

    Builds the nationwide day-by-state label array from the manifest's
    per-state attack-day counts, applies the naive constant scoring, and
    reports AUROC/AUPRC under this artifact's documented tie conventions
    next to the published full-corpus figures.
    """
    if basis not in ("days", "incidents"):
        raise ValueError("basis must be 'days' or 'incidents'")
    out = CommandOutputs(cfg, "coarse-demo")
    manifest = reference_values()
    counts = manifest["attack_days_by_state"]
    n_days = int(manifest["date_range"]["n_days"])
    states = sorted(counts)
    top = sorted(states, key=lambda s: (-counts[s], s))[:5]

    # per-state block: attack days first, then quiet days; scores are
    # constant within a state so only the block totals matter for AUROC
    labels = []
    scores = []
    csv_rows = []
    for state in states:
        c = int(counts[state])
        if not 0 <= c <= n_days:
            raise ValueError(f"count for {state} outside 0..{n_days}")
        block = np.zeros(n_days, dtype=np.int64)
        block[:c] = 1
        labels.append(block)
        score = 1.0 if state in top else 0.0
        scores.append(np.full(n_days, score))
        csv_rows.append([state, n_days, c, _round(c / n_days), score])
    y = np.concatenate(labels)
    s = np.concatenate(scores)

    ours_auroc = auroc(s, y)
    ours_auprc = auprc(s, y)
    baseline_auroc = auroc(np.zeros_like(s), y)     # constant score
    prevalence = float(y.mean())
    published = manifest["coarse_eval"]
    payload = {
        "basis": basis,
        "basis_note": ("counts read as unique attack days" if basis == "days"
                       else "counts read as incident totals; layout unchanged"),
        "states": len(states),
        "scored_states": top,
        "instances": int(y.size),
        "positives": int(y.sum()),
        "ours": {"auroc": _round(ours_auroc, 6),
                 "auprc": _round(ours_auprc, 6)},
        "baselines": {"auroc_constant_score": _round(baseline_auroc, 6),
                      "prevalence": _round(prevalence, 6)},
        "published_reference": published,
        "tie_convention": {
            "auroc": "tied pairs credited 1/2",
            "auprc": "average precision, ties kept in original order",
            "layout": "states alphabetical; attack days lead each block",
        },
    }
    out.write_json(payload)
    out.write_csv(["state", "n_days", "attack_days", "imbalance", "score"],
                  csv_rows)
    plotting.grouped_bars(
        out.path("coarse_demo.png"), states,
        {"attack days": [int(counts[s2]) for s2 in states]},
        "attack days", "Attack days per state (scored states filled)",
        out.fingerprint)
    print(f"instances={y.size} positives={int(y.sum())} "
          f"(prevalence {prevalence:.5f})")
    print(f"naive model   : AUROC={ours_auroc:.3f} AUPRC={ours_auprc:.3f} "
          "(our tie conventions)")
    print(f"published     : AUROC={published['auroc']:.3f} "
          f"AUPRC={published['auprc']:.3f} (comparison only)")
    print(f"baselines     : AUROC={baseline_auroc:.3f} "
          f"prevalence={prevalence:.5f} "
          f"(published {published['baseline_auroc']:.3f} / "
          f"{published['baseline_auprc']:.3f})")
    return payload


def timed(out: CommandOutputs, label: str):
    """Context manager logging start/finish with elapsed seconds."""
    class _Timer:
        def __enter__(self):
            self.t0 = time.perf_counter()
            out.log(f"{label} started")
            return self

        def __exit__(self, *exc):
            out.log(f"{label} finished in "
                    f"{time.perf_counter() - self.t0:.1f}s")
            return False
    return _Timer()
