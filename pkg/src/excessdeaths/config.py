"""Flat ``key = value`` configuration files for the CLI and scenarios.

One assignment per line; ``#`` starts a comment; repeated keys accumulate
into a list (used for period effects). Values stay strings until the
consumer coerces them, so one parser serves both run configs and scenario
files.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError
from .simulate import PeriodEffect, Scenario
from .validation import as_date


def parse_config_text(text: str) -> dict:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in values:
            if not isinstance(values[key], list):
                values[key] = [values[key]]
            values[key].append(value)
        else:
            values[key] = value
    return values


def read_config(path) -> tuple[dict, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text), text


def _parse_effect(entry: str) -> PeriodEffect:
    parts = entry.split(":")
    if len(parts) != 3:
        raise ConfigError(
            f"effect must be 'start:end:multiplier', got {entry!r}")
    try:
        return PeriodEffect(as_date(parts[0]), as_date(parts[1]),
                            float(parts[2]))
    except ValueError as exc:
        raise ConfigError(f"bad effect {entry!r}: {exc}") from exc


def scenario_from_mapping(values: dict) -> Scenario:
    """Build a simulation scenario from parsed config values."""
    required = ("start", "end", "baseline")
    missing = [k for k in required if k not in values]
    if missing:
        raise ConfigError(f"scenario config missing keys: {missing}")

    population: object = 3.3e6
    if "population" in values:
        raw = values["population"]
        if isinstance(raw, list):
            raise ConfigError("population given more than once")
        if ":" in raw:
            a, _, b = raw.partition(":")
            population = (float(a), float(b))
        else:
            population = float(raw)

    effects = values.get("effect", [])
    if isinstance(effects, str):
        effects = [effects]

    def scalar(key, default=0.0):
        raw = values.get(key, default)
        if isinstance(raw, list):
            raise ConfigError(f"{key} given more than once")
        return float(raw)

    return Scenario(
        start=as_date(values["start"]),
        end=as_date(values["end"]),
        baseline=scalar("baseline"),
        population=population,
        seasonal_amplitude=scalar("seasonal_amplitude"),
        seasonal_phase=scalar("seasonal_phase"),
        trend_per_year=scalar("trend_per_year"),
        effects=tuple(_parse_effect(e) for e in effects),
        seed=int(values.get("seed", 0)),
    )
