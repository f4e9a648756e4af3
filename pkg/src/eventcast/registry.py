"""Canonical feature and state registries.

The feature space is four groups derived from two news sources: per-theme
record counts and mean tones from the knowledge-graph feed, and per-base-code
record counts and mean tones from the event feed.  The shipped manifests pin
the canonical key sets (283 themes, 148 base codes, 51 state codes incl. DC);
unknown keys encountered in input files are ignored so the feature width stays
fixed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

THEME_COUNT = "theme_count"
THEME_SENTIMENT = "theme_sentiment"
CAMEO_COUNT = "cameo_count"
CAMEO_SENTIMENT = "cameo_sentiment"

FEATURE_GROUPS = (THEME_COUNT, THEME_SENTIMENT, CAMEO_COUNT, CAMEO_SENTIMENT)


@dataclass(frozen=True)
class FeatureId:
    """Identity of one feature column: a group and a theme/base-code key."""

    group: str
    key: str

    def __post_init__(self):
        if self.group not in FEATURE_GROUPS:
            raise ValueError(f"unknown feature group: {self.group!r}")

    def __str__(self):
        return f"{self.group}:{self.key}"

    @classmethod
    def parse(cls, text: str) -> "FeatureId":
        group, _, key = text.partition(":")
        return cls(group, key)


def _read_manifest(name: str) -> list[str]:
    raw = resources.files("eventcast.data").joinpath(name).read_text()
    return [ln.strip() for ln in raw.splitlines()
            if ln.strip() and not ln.startswith("#")]


class FeatureRegistry:
    """Ordered feature-column layout shared by every dataset built from it.

    Layout is block-wise: theme counts, theme sentiments, cameo counts,
    cameo sentiments.  Column order is the manifest order, which is fixed.
    """

    def __init__(self, themes: list[str], cameo_codes: list[str]):
        if len(themes) != len(set(themes)) or len(cameo_codes) != len(set(cameo_codes)):
            raise ValueError("registry keys must be unique")
        self.themes = list(themes)
        self.cameo_codes = list(cameo_codes)
        self.feature_ids: list[FeatureId] = (
            [FeatureId(THEME_COUNT, t) for t in self.themes]
            + [FeatureId(THEME_SENTIMENT, t) for t in self.themes]
            + [FeatureId(CAMEO_COUNT, c) for c in self.cameo_codes]
            + [FeatureId(CAMEO_SENTIMENT, c) for c in self.cameo_codes]
        )
        self._index = {fid: i for i, fid in enumerate(self.feature_ids)}
        self._theme_pos = {t: i for i, t in enumerate(self.themes)}
        self._cameo_pos = {c: i for i, c in enumerate(self.cameo_codes)}

    @property
    def m(self) -> int:
        return len(self.feature_ids)

    def column(self, fid: FeatureId) -> int:
        return self._index[fid]

    def theme_position(self, theme: str) -> int | None:
        return self._theme_pos.get(theme)

    def cameo_position(self, code: str) -> int | None:
        return self._cameo_pos.get(code)

    def group_columns(self, group: str) -> list[int]:
        return [i for i, fid in enumerate(self.feature_ids) if fid.group == group]


def canonical_registry() -> FeatureRegistry:
    """Registry from the shipped manifests: m = 2*283 + 2*148 = 862."""
    return FeatureRegistry(_read_manifest("themes.txt"),
                           _read_manifest("cameo_base_codes.txt"))


def load_states() -> dict[str, str]:
    """Mapping of two-letter code -> full name for the 51 tracked locations."""
    out = {}
    for line in _read_manifest("states.txt"):
        code, _, name = line.partition("\t")
        out[code] = name
    return out


def state_name_index() -> dict[str, str]:
    """Lowercased full name -> code, for resolving location text."""
    return {name.lower(): code for code, name in load_states().items()}


def reference_values() -> dict:
    """Published full-corpus reference numbers (printed, never asserted)."""
    raw = resources.files("eventcast.data").joinpath("reference_values.json").read_text()
    return json.loads(raw)
