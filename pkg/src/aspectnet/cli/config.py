"""Run configuration: sectioned key-value text (INI grammar) or JSON.

Grammar::

    [section]
    key = value          ; lists are comma-separated, booleans true/false

Sections: ``run``, ``data``, ``ensemble``, ``explain``, ``transfer``, plus
optional per-member overrides ``model.<kind>`` (encoder dimensions) and
``train.<kind>`` (optimizer). Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import copy
import hashlib
import json
from dataclasses import fields
from pathlib import Path

from ..encoders.model import COMPONENTS, ModelConfig
from ..encoders.training import TrainConfig


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict] = {
    "run": {"seed": 0, "out": "run"},
    "data": {
        "path": "", "format": "", "synthetic_reviews": 2000, "synthetic_seed": 0,
        "ratios": [0.70, 0.15, 0.15], "normalize": True, "strip_emoji": True, "strip_latin": True,
        "strip_punctuation": True, "bangla_only": False, "min_frequency": 1, "max_len": 48,
    },
    "model": {"components": list(COMPONENTS)},
    "ensemble": {"mode": "bucketed", "lambda_diversity": 0.1, "threshold": 0.5, "shrinkage": 0.01,
                 "space": "prob", "weight_steps": 300, "weight_lr": 0.05},
    "explain": {"instances": 3, "methods": ["ExactShapley", "KernelSHAP", "LIMESurrogate", "Attention"],
                "shap_budget": 2048, "lime_samples": 1000, "lime_kernel_width": 0.25, "masking": "PAD"},
    "transfer": {"domains": [], "shift": 0.5, "noise": 0.05, "style_tokens": 0, "seeds": [0, 1],
                 "budgets": [50, 500], "full_reference": True, "pool_size": 1000, "test_size": 500,
                 "sweep_shifts": [0.0, 0.25, 0.5, 0.75, 1.0], "epochs": 5, "lr_scale": 0.1, "regimen": "all"},
}

_MEMBER_TYPES = {f.name: f.type for f in fields(ModelConfig) if f.name != "kind"}
_TRAIN_TYPES = {f.name: f.type for f in fields(TrainConfig) if f.name != "lr_multipliers"}
# keys that do not change any artifact
_UNHASHED = {("run", "out")}


def _coerce(raw, like, where: str):
    if isinstance(raw, str) and not isinstance(like, str):
        text = raw.strip()
        if isinstance(like, bool):
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigError(f"{where}: expected a boolean, got {raw!r}")
            return text.lower() in ("true", "1", "yes")
        if isinstance(like, list):
            items = [t.strip() for t in text.split(",") if t.strip()]
            elem = like[0] if like else ""
            return [_coerce(t, elem, where) for t in items]
        try:
            return type(like)(text)
        except ValueError as exc:
            raise ConfigError(f"{where}: cannot parse {raw!r}") from exc
    if isinstance(like, float) and isinstance(raw, int) and not isinstance(raw, bool):
        return float(raw)
    if isinstance(like, list) and isinstance(raw, list) and like:
        return [_coerce(v, like[0], where) for v in raw]
    if like is not None and not isinstance(raw, type(like)):
        raise ConfigError(f"{where}: expected {type(like).__name__}, got {raw!r}")
    return raw


def _type_sample(type_name) -> object:
    return {"int": 0, "float": 0.0, "str": "", "bool": False}[type_name if isinstance(type_name, str)
                                                               else type_name.__name__]


class RunConfig:
    def __init__(self, sections: dict[str, dict] | None = None):
        self.sections = copy.deepcopy(DEFAULTS)
        for name, values in (sections or {}).items():
            self._merge(name, values)

    def _merge(self, name: str, values: dict) -> None:
        if name in DEFAULTS:
            allowed = DEFAULTS[name]
        elif name.startswith("model.") and name[6:] in COMPONENTS:
            allowed = {k: _type_sample(t) for k, t in _MEMBER_TYPES.items()}
        elif name.startswith("train.") and name[6:] in COMPONENTS:
            allowed = {k: _type_sample(t) for k, t in _TRAIN_TYPES.items()}
        else:
            raise ConfigError(f"unknown section [{name}]")
        target = self.sections.setdefault(name, {})
        for key, raw in values.items():
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
            target[key] = _coerce(raw, allowed[key], f"[{name}] {key}")

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if path.suffix.lower() == ".json":
            try:
                return cls(json.loads(text))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON config: {exc}") from exc
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return cls({s: dict(cp[s]) for s in cp.sections()})

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    def set(self, section: str, key: str, value) -> None:
        self._merge(section, {key: value})

    def to_dict(self) -> dict:
        return copy.deepcopy(self.sections)

    def hash(self) -> str:
        d = {s: {k: v for k, v in vals.items() if (s, k) not in _UNHASHED} for s, vals in self.sections.items()}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def to_ini(self, portable: bool = False) -> str:
        """INI text; ``portable`` drops keys that only say where the run lives."""
        lines = []
        for s in sorted(self.sections):
            lines.append(f"[{s}]")
            for k, v in sorted(self.sections[s].items()):
                if portable and (s, k) in _UNHASHED:
                    continue
                if isinstance(v, list):
                    v = ",".join(str(x) for x in v)
                elif isinstance(v, bool):
                    v = "true" if v else "false"
                lines.append(f"{k} = {v}")
            lines.append("")
        return "\n".join(lines)

    def member_overrides(self, kind: str) -> dict:
        return dict(self.sections.get(f"model.{kind}", {}))

    def train_overrides(self, kind: str) -> dict:
        return dict(self.sections.get(f"train.{kind}", {}))
