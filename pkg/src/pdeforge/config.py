"""Run configuration: one JSON file, with ${VAR} interpolation from the environment."""

from __future__ import annotations

import copy
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path

from .domain import TASK_IDS, registry_get
from .metrics import FeedbackType
from .tournament.synthesis import parse_schedule

_VAR = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")

DEFAULTS = {
    "task": {"id": "reaction_diffusion", "params": {}},
    "grid": {"N": 64, "T": 10, "t_end": None},
    "batch": 4,
    "seed": 0,
    "reference": {"bundle": None, "oversample_factor": 2, "safety_fraction": 1.0, "scheme": None},
    "n_candidates": 8,
    "models": {"generator": "generator-model", "judges": ["judge-model-a", "judge-model-b", "judge-model-c"]},
    "tournament": {
        "rounds": "4",
        "feedback": "nrmse",
        "saturation_rel_threshold": 0.01,
        "saturation_window": 2,
        "temperature": 0.7,
    },
    "backend": {
        "kind": "scripted",
        "mode": "record",
        "transcripts": None,
        "base_url": None,
        "credential_env": "LLM_API_KEY",
        "attempts": 3,
    },
    "limits": {"wall_clock_seconds": 120.0, "memory_bytes": 2 * 1024**3, "max_debug_iterations": 4},
    "guest_command": None,
    "prices": {"default": [2.50, 10.00], "prices": {}},
    "prompts_dir": None,
    "prior_report": None,
    "workers": 1,
}


class ConfigError(ValueError):
    pass


def interpolate(value, env=None):
    env = os.environ if env is None else env
    if isinstance(value, str):
        def sub(m):
            if m.group(1) not in env:
                raise ConfigError(f"environment variable {m.group(1)} is not set")
            return env[m.group(1)]
        return _VAR.sub(sub, value)
    if isinstance(value, list):
        return [interpolate(v, env) for v in value]
    if isinstance(value, dict):
        return {k: interpolate(v, env) for k, v in value.items()}
    return value


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class RunConfig:
    data: dict

    def __getitem__(self, key):
        return self.data[key]

    @property
    def task(self):
        return registry_get(self.data["task"]["id"], self.data["task"].get("params") or {})

    @property
    def feedback(self) -> FeedbackType:
        return FeedbackType.from_value(self.data["tournament"]["feedback"])

    @property
    def schedule(self) -> tuple[int, ...]:
        return parse_schedule(self.data["tournament"]["rounds"])

    def snapshot(self) -> dict:
        return copy.deepcopy(self.data)


def validate(data: dict) -> None:
    tid = data["task"]["id"]
    if tid not in TASK_IDS:
        raise ConfigError(f"unknown task {tid!r}")
    try:
        registry_get(tid, data["task"].get("params") or {})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    n = data["n_candidates"]
    if not isinstance(n, int) or n < 2 or n % 2:
        raise ConfigError(f"n_candidates must be an even integer >= 2, got {n!r}")
    if len(data["models"]["judges"]) < 2:
        raise ConfigError("at least two judges are needed")
    if data["batch"] < 1:
        raise ConfigError("batch must be positive")
    try:
        parse_schedule(data["tournament"]["rounds"])
        FeedbackType.from_value(data["tournament"]["feedback"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    except RuntimeError as exc:
        raise ConfigError(str(exc)) from None
    b = data["backend"]
    if b["kind"] not in ("scripted", "http"):
        raise ConfigError("backend.kind must be scripted or http")
    if b["mode"] not in ("record", "replay", "live"):
        raise ConfigError("backend.mode must be record, replay or live")
    if b["kind"] == "http" and b["mode"] != "replay" and not b.get("base_url"):
        raise ConfigError("the http backend needs base_url")


def load_config(path=None, overrides: dict | None = None, env=None) -> RunConfig:
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    data = _merge(DEFAULTS, raw)
    if overrides:
        data = _merge(data, overrides)
    data = interpolate(data, env)
    validate(data)
    return RunConfig(data)
