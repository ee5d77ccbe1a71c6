"""YAML config loading.

A config file may override any default in the env, belief, planner, or rule
sections. Unknown sections or keys raise ValueError so typos fail loudly
instead of silently running defaults.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

from .agents import AgentConfig
from .baselines import RuleConfig
from .belief import BeliefConfig
from .planner import PlannerConfig
from .world import EnvConfig, Rect

_SECTIONS = ("env", "belief", "planner", "rule")


def _coerce(value, sample):
    """Coerce YAML scalars/lists to the type of the dataclass default."""
    if isinstance(sample, Rect):
        if not isinstance(value, dict):
            raise ValueError("occluder must be a mapping with cx, cy, length, width")
        extra = set(value) - {"cx", "cy", "length", "width"}
        if extra:
            raise ValueError(f"unknown occluder keys: {sorted(extra)}")
        merged = {k: float(value.get(k, getattr(sample, k))) for k in ("cx", "cy", "length", "width")}
        return Rect(**merged)
    if isinstance(sample, bool):
        if not isinstance(value, bool):
            raise ValueError(f"expected bool, got {value!r}")
        return value
    if isinstance(sample, int) and not isinstance(sample, bool):
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"expected int, got {value!r}")
        return int(value)
    if isinstance(sample, float):
        return float(value)
    if isinstance(sample, tuple):
        if not isinstance(value, (list, tuple)) or len(value) != len(sample):
            raise ValueError(f"expected sequence of length {len(sample)}, got {value!r}")
        return tuple(float(v) for v in value)
    return value


def _build(dc, overrides: dict):
    if not overrides:
        return dc
    names = {f.name for f in dataclasses.fields(dc)}
    unknown = set(overrides) - names
    if unknown:
        raise ValueError(f"unknown {type(dc).__name__} keys: {sorted(unknown)}")
    coerced = {k: _coerce(v, getattr(dc, k)) for k, v in overrides.items()}
    return dataclasses.replace(dc, **coerced)


def load_config_file(path: str | Path) -> dict:
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ValueError("config root must be a mapping")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}; expected {_SECTIONS}")
    return raw


def build_configs(raw: dict) -> tuple[EnvConfig, AgentConfig, RuleConfig]:
    if not isinstance(raw, dict):
        raise ValueError("config root must be a mapping")
    env_cfg = _build(EnvConfig(), raw.get("env", {}) or {})
    belief_cfg = _build(BeliefConfig(), raw.get("belief", {}) or {})
    planner_cfg = _build(PlannerConfig(), raw.get("planner", {}) or {})
    rule_cfg = _build(RuleConfig(), raw.get("rule", {}) or {})
    return env_cfg, AgentConfig(belief=belief_cfg, planner=planner_cfg), rule_cfg


def load_configs(path: str | Path | None) -> tuple[EnvConfig, AgentConfig, RuleConfig]:
    """Configs from a YAML file, or pure defaults when path is None."""
    raw = {} if path is None else load_config_file(path)
    return build_configs(raw)
