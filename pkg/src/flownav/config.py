"""Run configuration: TOML file plus command-line overrides.

A config file may carry four sections, each mapping onto one dataclass:

    [annotation]   -> field_gen.AnnotationConfig
    [rollout]      -> rollout.RolloutConfig
    [planner]      -> planner_baseline.PlannerConfig
    [generator]    -> scene_gen.SceneSpec

Unknown sections or keys are rejected. When no path is given, the
FLOWNAV_CONFIG environment variable is consulted; without it, defaults
apply. The effective configuration is echoed into every output bundle.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigurationError
from .field_gen import AnnotationConfig
from .planner_baseline import PlannerConfig
from .rollout import RolloutConfig
from .scene_gen import SceneSpec

ENV_CONFIG = "FLOWNAV_CONFIG"

_SECTIONS = {
    "annotation": AnnotationConfig,
    "rollout": RolloutConfig,
    "planner": PlannerConfig,
    "generator": SceneSpec,
}


@dataclass
class RunConfig:
    annotation: AnnotationConfig = field(default_factory=AnnotationConfig)
    rollout: RolloutConfig = field(default_factory=RolloutConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    generator: SceneSpec = field(default_factory=SceneSpec)

    def to_dict(self) -> dict:
        out = {}
        for name in _SECTIONS:
            section = dataclasses.asdict(getattr(self, name))
            for k, v in section.items():
                if isinstance(v, tuple):
                    section[k] = list(v)
            out[name] = section
        return out

    def override(self, section: str, **updates) -> "RunConfig":
        """New RunConfig with the named section's fields replaced."""
        updates = {k: v for k, v in updates.items() if v is not None}
        if not updates:
            return self
        _check_keys(section, updates)
        current = getattr(self, section)
        return dataclasses.replace(self, **{section: dataclasses.replace(current, **updates)})


def _check_keys(section: str, data: dict) -> None:
    cls = _SECTIONS[section]
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [{section}]: {sorted(unknown)}")


def load_run_config(path=None) -> RunConfig:
    """RunConfig from a TOML file, FLOWNAV_CONFIG, or defaults."""
    if path is None:
        env = os.environ.get(ENV_CONFIG)
        if env:
            path = env
    if path is None:
        return RunConfig()
    raw = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from exc

    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigurationError(f"unknown config section(s): {sorted(unknown)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = data.get(name, {})
        if not isinstance(section, dict):
            raise ConfigurationError(f"[{name}] must be a table")
        _check_keys(name, section)
        if name == "generator" and "object_label_pool" in section:
            section = dict(section)
            section["object_label_pool"] = tuple(section["object_label_pool"])
        kwargs[name] = cls(**section)
    return RunConfig(**kwargs)
