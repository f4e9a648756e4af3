"""Synthetic per-state datasets for desk-scale runs.

Features are daily standard-normal draws.  With a planted signal, a fixed
subset of features has its mean shifted upward on the window_len days
preceding each positive day, which is exactly the kind of precursor
pattern the windowed representations are supposed to recover.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import LocationDataset
from .ingest import IncidentRecord
from .registry import FEATURE_GROUPS, FeatureId

SYNTH_START = dt.date(2015, 2, 18)

# proportions used to spread synthetic features over the four groups,
# mirroring the 283/283/148/148 layout of the real registry
_GROUP_WEIGHTS = (283, 283, 148, 148)

_ATTACK_TYPES = ("Bombing/Explosion", "Armed Assault",
                 "Facility/Infrastructure Attack", "Unarmed Assault",
                 "Hostage Taking")
_WEAPON_TYPES = ("Explosives", "Firearms", "Incendiary", "Melee", "Unknown")
_TARGET_TYPES = ("Private Citizens & Property", "Business", "Police",
                 "Government (General)", "Religious Institutions", "Military")
_GROUP_NAMES = ("Unknown", "Red Hand", "Black Star", "New Dawn")


@dataclass(frozen=True)
class PlantedSignal:
    """Mean shift on the days leading into each positive."""

    window_len: int = 7
    affected_fraction: float = 0.5
    shift: float = 3.0
    affected_groups: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.window_len < 1:
            raise ValueError("window_len must be >= 1")
        if not 0.0 <= self.affected_fraction <= 1.0:
            raise ValueError("affected_fraction must lie in [0,1]")
        if self.affected_groups is not None:
            bad = set(self.affected_groups) - set(FEATURE_GROUPS)
            if bad:
                raise ValueError(f"unknown feature groups: {sorted(bad)}")


@dataclass(frozen=True)
class SynthConfig:
    n_days: int = 800
    m_features: int = 40
    n_states: int = 1
    imbalance: float = 0.02
    signal: PlantedSignal | None = None
    seed: int = 0
    start: dt.date = SYNTH_START

    def __post_init__(self):
        if min(self.n_days, self.m_features, self.n_states) < 1:
            raise ValueError("n_days, m_features, n_states must be positive")
        if not 0.0 < self.imbalance < 1.0:
            raise ValueError("imbalance must lie in (0,1)")


def synth_feature_ids(m: int) -> list[FeatureId]:
    """Assign m synthetic features to the four groups proportionally."""
    total = sum(_GROUP_WEIGHTS)
    floors = [m * w // total for w in _GROUP_WEIGHTS]
    rema = sorted(range(4), key=lambda g: (-(m * _GROUP_WEIGHTS[g] % total), g))
    for g in rema[: m - sum(floors)]:
        floors[g] += 1
    ids: list[FeatureId] = []
    j = 0
    for group, count in zip(FEATURE_GROUPS, floors):
        for _ in range(count):
            ids.append(FeatureId(group, f"f{j:03d}"))
            j += 1
    return ids


def synth_generate(config: SynthConfig) -> list[LocationDataset]:
    """Deterministic synthetic datasets, one per state."""
    n, m = config.n_days, config.m_features
    if config.imbalance * n < 1.0:
        raise ValueError(
            f"imbalance {config.imbalance} on {n} days yields no positives")
    n_pos = int(round(config.imbalance * n))
    feature_ids = synth_feature_ids(m)
    dates = [config.start + dt.timedelta(days=i) for i in range(n)]

    sig = config.signal
    if sig is not None:
        if sig.affected_groups is None:
            candidates = np.arange(m)
        else:
            candidates = np.asarray(
                [j for j, fid in enumerate(feature_ids)
                 if fid.group in sig.affected_groups], dtype=np.int64)
        n_affected = int(np.ceil(sig.affected_fraction * candidates.size))
        first_day = sig.window_len  # keep the planted window inside the range
    else:
        candidates = np.arange(m)
        n_affected = 0
        first_day = 1

    root = np.random.SeedSequence(config.seed)
    out: list[LocationDataset] = []
    for si, child in enumerate(root.spawn(config.n_states)):
        rng = np.random.default_rng(child)
        X = rng.standard_normal((n, m))
        pos_days = np.sort(rng.choice(np.arange(first_day, n), size=n_pos,
                                      replace=False))
        y = np.zeros(n, dtype=np.int64)
        y[pos_days] = 1
        if sig is not None and n_affected > 0:
            affected = np.sort(rng.choice(candidates, size=n_affected,
                                          replace=False))
            for d in pos_days:
                lo = max(0, d - sig.window_len)
                X[lo:d, affected] += sig.shift
        out.append(LocationDataset(state=f"S{si + 1:02d}", dates=dates,
                                   X=X, y=y, feature_ids=feature_ids))
    return out


def synth_incidents(datasets, seed: int) -> list[IncidentRecord]:
    """One categorical incident per positive day, deterministic in seed."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    records: list[IncidentRecord] = []
    for ds in sorted(datasets, key=lambda d: d.state):
        for i in np.flatnonzero(ds.y == 1):
            records.append(IncidentRecord(
                state=ds.state, date=ds.dates[int(i)],
                attack_type=_ATTACK_TYPES[rng.integers(len(_ATTACK_TYPES))],
                weapon_type=_WEAPON_TYPES[rng.integers(len(_WEAPON_TYPES))],
                target_type=_TARGET_TYPES[rng.integers(len(_TARGET_TYPES))],
                group_name=_GROUP_NAMES[rng.integers(len(_GROUP_NAMES))],
                success=bool(rng.random() < 0.85)))
    return records


def write_incidents_csv(records, path) -> Path:
    """Write incidents in the comma-separated layout the parser reads."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eventid", "iyear", "imonth", "iday", "provstate",
                         "attacktype1_txt", "weaptype1_txt", "targtype1_txt",
                         "gname", "success"])
        for k, rec in enumerate(records):
            writer.writerow([k + 1, rec.date.year, rec.date.month,
                             rec.date.day, rec.state, rec.attack_type,
                             rec.weapon_type, rec.target_type,
                             rec.group_name, int(rec.success)])
    return path
