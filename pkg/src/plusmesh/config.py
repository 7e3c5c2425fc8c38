"""Run configuration: defaults, config files, and flag overrides.

Precedence is flags over file over defaults.  The resolved configuration is
fully explicit and is written into the output directory alongside the trace,
so any run can be reproduced from its artifacts alone.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .engine import World, init_world
from .physics import PhysicsParams
from .rules import RuleParams
from .seeds import parse_seed

ENV_CONFIG = "JV2_CONFIG"

_PHYSICS_KEYS = {f.name for f in dataclasses.fields(PhysicsParams)}
_RULE_KEYS = {f.name for f in dataclasses.fields(RuleParams)}
_INT_RULE_KEYS = {"fold_limit", "stress_limit", "repel_duration"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed_text: str = ""
    free_counts: dict[int, int] = field(default_factory=dict)
    physics: dict[str, float] = field(default_factory=dict)
    rule_constants: dict[str, float] = field(default_factory=dict)
    rng_seed: int = 0
    max_steps: int = 100_000
    snapshot_every: int = 0
    output_dir: Optional[str] = None

    def physics_params(self) -> PhysicsParams:
        return PhysicsParams(**self.physics)

    def rule_params(self) -> RuleParams:
        return RuleParams(**self.rule_constants)

    def resolved(self) -> dict:
        """Every default materialized; suitable for re-running."""
        phys = dataclasses.asdict(self.physics_params())
        rules = dataclasses.asdict(self.rule_params())
        return {
            "seed_text": self.seed_text,
            "free_counts": {str(k): v for k, v in sorted(self.free_counts.items())},
            "physics": phys,
            "rule_constants": rules,
            "rng_seed": self.rng_seed,
            "max_steps": self.max_steps,
            "snapshot_every": self.snapshot_every,
            "output_dir": self.output_dir,
        }

    def build_world(self) -> World:
        spec = parse_seed(self.seed_text)
        return init_world(spec.types, self.free_counts,
                          params=self.physics_params(),
                          rules=self.rule_params(),
                          rng_seed=self.rng_seed)


_TOP_KEYS = {"seed_text", "free_counts", "physics", "rule_constants",
             "rng_seed", "max_steps", "snapshot_every", "output_dir"}


def classify_param(key: str) -> tuple[str, str]:
    """Map a --param KEY to its bucket; accepts FOLD_LIMIT-style spelling."""
    k = key.strip().lower()
    if k in _PHYSICS_KEYS:
        return "physics", k
    if k in _RULE_KEYS:
        return "rule_constants", k
    raise ConfigError(f"unknown parameter: {key}")


def coerce_param(bucket: str, key: str, value: Any) -> float:
    try:
        if bucket == "rule_constants" and key in _INT_RULE_KEYS:
            v = int(value)
        else:
            v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return v


def _merge_file(cfg: RunConfig, data: dict, source: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: config must be a JSON object")
    for key, value in data.items():
        if key not in _TOP_KEYS:
            # allow bare parameter names at top level for convenience
            try:
                bucket, k = classify_param(key)
            except ConfigError:
                raise ConfigError(f"{source}: unknown key: {key}") from None
            getattr(cfg, bucket)[k] = coerce_param(bucket, k, value)
            continue
        if key == "free_counts":
            if not isinstance(value, dict):
                raise ConfigError(f"{source}: free_counts must be an object")
            for t, c in value.items():
                cfg.free_counts[_check_type_key(t, source)] = _check_count(c, source)
        elif key in ("physics", "rule_constants"):
            if not isinstance(value, dict):
                raise ConfigError(f"{source}: {key} must be an object")
            for k, v in value.items():
                bucket, kk = classify_param(k)
                if bucket != key:
                    raise ConfigError(f"{source}: {k} does not belong in {key}")
                getattr(cfg, key)[kk] = coerce_param(bucket, kk, v)
        elif key in ("rng_seed", "max_steps", "snapshot_every"):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{source}: {key} must be an integer")
            setattr(cfg, key, value)
        elif key == "seed_text":
            setattr(cfg, key, str(value))
        else:
            setattr(cfg, key, value)


def _check_type_key(t: Any, source: str) -> int:
    try:
        ti = int(t)
    except (TypeError, ValueError):
        raise ConfigError(f"{source}: bad machine type: {t!r}") from None
    if ti not in (1, 2, 3, 4):
        raise ConfigError(f"{source}: machine type {ti} outside 1-4")
    return ti


def _check_count(c: Any, source: str) -> int:
    if not isinstance(c, int) or isinstance(c, bool) or c < 0:
        raise ConfigError(f"{source}: free-machine count must be a "
                          f"non-negative integer, got {c!r}")
    return c


def load_config(config_path: Optional[str] = None,
                flags: Optional[dict[str, Any]] = None) -> RunConfig:
    """Assemble a RunConfig: defaults, then the file, then flag overrides.

    The file may come from --config or the JV2_CONFIG environment variable.
    `flags` uses the same keys as the file plus "params" (list of KEY=VALUE
    strings) and "container" ("WxH").
    """
    cfg = RunConfig()
    path = config_path or os.environ.get(ENV_CONFIG)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: invalid JSON: {exc}") from None
        _merge_file(cfg, data, path)

    flags = flags or {}
    for key, value in flags.items():
        if value is None:
            continue
        if key == "seed":
            cfg.seed_text = value
        elif key == "free":
            for item in value:
                t, _, c = str(item).partition("=")
                if not _:
                    raise ConfigError(f"--free expects TYPE=COUNT, got {item!r}")
                try:
                    cnt = int(c)
                except ValueError:
                    raise ConfigError(
                        f"--free expects TYPE=COUNT, got {item!r}") from None
                cfg.free_counts[_check_type_key(t, "--free")] = \
                    _check_count(cnt, "--free")
        elif key == "steps":
            cfg.max_steps = int(value)
        elif key == "rng_seed":
            cfg.rng_seed = int(value)
        elif key == "snapshot_every":
            cfg.snapshot_every = int(value)
        elif key == "out":
            cfg.output_dir = str(value)
        elif key == "container":
            w, _, h = str(value).lower().partition("x")
            try:
                cfg.physics["container_width"] = float(w)
                cfg.physics["container_height"] = float(h)
            except ValueError:
                raise ConfigError(
                    f"--container expects WxH, got {value!r}") from None
        elif key == "params":
            for item in value:
                k, _, v = str(item).partition("=")
                if not _:
                    raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
                bucket, kk = classify_param(k)
                getattr(cfg, bucket)[kk] = coerce_param(bucket, kk, v)
        else:
            raise ConfigError(f"unknown flag: {key}")

    if not cfg.seed_text:
        raise ConfigError("no seed specified (use --seed or a config file)")
    if cfg.max_steps < 0 or cfg.snapshot_every < 0:
        raise ConfigError("step counts must be non-negative")
    # fail fast on bad parameter values
    cfg.physics_params()
    cfg.rule_params()
    return cfg


def write_resolved_config(cfg: RunConfig, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "config.json"
    path.write_text(json.dumps(cfg.resolved(), indent=2, sort_keys=True) + "\n")
    return path
