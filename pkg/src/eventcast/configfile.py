"""Flat key=value run configuration and the two sizing profiles.

Config files are plain text: one `key = value` per line, '#' comments,
no sections.  Keys are namespaced with dots (synth.n_days, sweep.max).
Unknown keys are kept and embedded in output fingerprints so a typo is
at least visible in the artifacts it produced.

Profiles bundle the model sizes: "paper" uses the published training
scale (3000 estimators, 8000-wide hidden layer, 1024-unit recurrent
state, 100 epochs); "desk" shrinks everything to laptop scale.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .models import ModelSpec
from .neural import OptimizerConfig

PROFILES = ("desk", "paper")

_PROFILE_SIZES = {
    "desk": {"rf_estimators": 200, "ada_iterations": 50, "hidden": 64,
             "recurrent_hidden": 64, "per_feature_hidden": 8, "epochs": 50},
    "paper": {"rf_estimators": 3000, "ada_iterations": 3000, "hidden": 8000,
              "recurrent_hidden": 1024, "per_feature_hidden": 8,
              "epochs": 100},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Parsed key=value mapping with typed access."""

    values: dict

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        values: dict[str, str] = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, val = text.partition("=")
            values[key.strip()] = val.strip()
        return cls(values=values)

    @classmethod
    def empty(cls) -> "RunConfig":
        return cls(values={})

    def get(self, key: str, default=None) -> str | None:
        return self.values.get(key, default)

    def get_int(self, key: str, default: int) -> int:
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as err:
            raise ConfigError(f"{key} must be an integer, got {raw!r}") from err

    def get_float(self, key: str, default: float) -> float:
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError as err:
            raise ConfigError(f"{key} must be a number, got {raw!r}") from err

    def get_bool(self, key: str, default: bool) -> bool:
        raw = self.values.get(key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key} must be boolean, got {raw!r}")

    def get_list(self, key: str, default=()) -> list[str]:
        raw = self.values.get(key)
        if raw is None:
            return list(default)
        return [part.strip() for part in raw.split(",") if part.strip()]

    def get_range(self, key: str, default: tuple[int, int]) -> tuple[int, int]:
        """Inclusive integer range written lo-hi (or a single value)."""
        raw = self.values.get(key)
        if raw is None:
            return default
        lo, dash, hi = raw.partition("-")
        try:
            a = int(lo)
            b = int(hi) if dash else a
        except ValueError as err:
            raise ConfigError(f"{key} must be lo-hi, got {raw!r}") from err
        if b < a:
            raise ConfigError(f"{key} range {raw!r} is reversed")
        return a, b

    def fingerprint(self) -> dict:
        return dict(sorted(self.values.items()))


def profile_sizes(profile: str) -> dict:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    return dict(_PROFILE_SIZES[profile])


def build_model_spec(kind: str, profile: str, config: RunConfig) -> ModelSpec:
    """Model hyperparameters for a profile, with config overrides."""
    sizes = profile_sizes(profile)
    hidden_key = "recurrent_hidden" if kind in ("lstm", "rnn") else "hidden"
    opt = OptimizerConfig(
        learning_rate=config.get_float("opt.learning_rate", 1e-4),
        decay=config.get_float("opt.decay", 1e-6),
        batch_size=config.get_int("opt.batch_size", 32),
        epochs=config.get_int("opt.epochs", sizes["epochs"]),
        momentum=config.get_float("opt.momentum", 0.9))
    return ModelSpec(
        kind=kind,
        estimators=config.get_int("model.rf_estimators",
                                  sizes["rf_estimators"]),
        iterations=config.get_int("model.ada_iterations",
                                  sizes["ada_iterations"]),
        hidden=config.get_int("model.hidden", sizes[hidden_key]),
        per_feature_hidden=config.get_int("model.per_feature_hidden",
                                          sizes["per_feature_hidden"]),
        opt=opt)
