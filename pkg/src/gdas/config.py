"""Flat key=value scenario files.

One assignment per line, ``#`` comments, keys matching Scenario fields::

    mode = aloha
    K = 100
    p = 0.2
    kbar = 75
"""

from __future__ import annotations

from dataclasses import fields, replace
from pathlib import Path

from .experiments import Scenario

_INT_KEYS = {"K", "N", "kbar", "T", "runs", "M", "true_model", "fixed_model", "seed", "family_J"}
_FLOAT_KEYS = {"rho", "p", "tau", "snr_threshold", "snr_avg", "availability", "family_noise"}
_STR_KEYS = {"mode", "q_policy", "first_round"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS
_CANONICAL = {k.lower(): k for k in _ALL_KEYS}

# p defaults to 0.2 in Scenario; configs that switch to the physical triple
# must be able to clear it.
_NULLABLE = {"p", "snr_threshold", "snr_avg", "availability", "kbar", "T", "runs", "fixed_model"}


def _coerce(key: str, raw: str):
    if raw.lower() in ("none", "null"):
        if key not in _NULLABLE:
            raise ValueError(f"{key} cannot be none")
        return None
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    return raw


def parse_scenario_text(text: str) -> Scenario:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key_raw, val_raw = (part.strip() for part in stripped.split("=", 1))
        key = _CANONICAL.get(key_raw.lower())
        if key is None:
            raise ValueError(f"line {lineno}: unknown scenario key {key_raw!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key_raw!r}")
        values[key] = _coerce(key, val_raw)
    if "p" not in values and any(k in values for k in ("snr_threshold", "snr_avg", "availability")):
        values["p"] = None
    return Scenario(**values)


def load_scenario(path, **overrides) -> Scenario:
    scenario = parse_scenario_text(Path(path).read_text(encoding="utf-8"))
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        scenario = replace(scenario, **overrides)
    return scenario


def scenario_to_text(scenario: Scenario) -> str:
    lines = []
    for f in fields(Scenario):
        value = getattr(scenario, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
