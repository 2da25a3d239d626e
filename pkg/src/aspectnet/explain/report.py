"""Explanation records, the multi-method report, and its JSON schema and text view."""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field

import jsonschema
import numpy as np

METHODS = ("ExactShapley", "KernelSHAP", "LIMESurrogate", "Attention")

EXPLANATION_SCHEMA = {
    "type": "object",
    "required": ["method", "aspect", "class", "tokens", "scores", "base_value", "meta"],
    "additionalProperties": False,
    "properties": {
        "method": {"enum": list(METHODS)},
        "aspect": {"type": "string"},
        "class": {"type": "string"},
        "tokens": {"type": "array", "items": {"type": "string"}},
        "scores": {"type": "array", "items": {"type": "number"}},
        "base_value": {"type": ["number", "null"]},
        "meta": {"type": "object"},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "instance", "tokens", "decisions", "explanations", "meta"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "instance": {"type": "object"},
        "tokens": {"type": "array", "items": {"type": "string"}},
        "decisions": {"type": "array", "items": {
            "type": "object",
            "required": ["aspect", "addressed", "sentiment", "confidence"],
            "properties": {"aspect": {"type": "string"}, "addressed": {"type": "boolean"},
                           "sentiment": {"type": "string"}, "confidence": {"type": "number"}},
        }},
        "explanations": {"type": "array", "items": EXPLANATION_SCHEMA},
        "meta": {"type": "object"},
    },
}


class AlignmentError(ValueError):
    pass


@dataclass
class Explanation:
    method: str
    aspect: str
    target_class: str
    tokens: list[str]
    scores: list[float]
    base_value: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown explanation method {self.method!r}")
        if len(self.scores) != len(self.tokens):
            raise AlignmentError(f"{len(self.scores)} scores for {len(self.tokens)} tokens")

    def to_dict(self) -> dict:
        return {"method": self.method, "aspect": self.aspect, "class": self.target_class,
                "tokens": list(self.tokens), "scores": [float(s) for s in self.scores],
                "base_value": None if self.base_value is None else float(self.base_value),
                "meta": self.meta}

    @classmethod
    def from_dict(cls, d: dict) -> "Explanation":
        jsonschema.validate(d, EXPLANATION_SCHEMA)
        return cls(d["method"], d["aspect"], d["class"], list(d["tokens"]), list(d["scores"]),
                   d["base_value"], dict(d["meta"]))


def explanation_report(instance: dict, explanations: list[Explanation], decisions: list[dict] | None = None,
                       meta: dict | None = None) -> dict:
    if not explanations:
        raise ValueError("no explanations to report")
    tokens = explanations[0].tokens
    for e in explanations[1:]:
        if e.tokens != tokens:
            raise AlignmentError(f"{e.method} explains different tokens than {explanations[0].method}")
    report = {"schema_version": 1, "instance": instance, "tokens": list(tokens),
              "decisions": decisions or [], "explanations": [e.to_dict() for e in explanations],
              "meta": meta or {}}
    jsonschema.validate(report, REPORT_SCHEMA)
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, ensure_ascii=False, sort_keys=True, indent=1) + "\n"


def load_report(text: str) -> tuple[dict, list[Explanation]]:
    report = json.loads(text)
    jsonschema.validate(report, REPORT_SCHEMA)
    return report, [Explanation.from_dict(e) for e in report["explanations"]]


def _cell_width(s: str) -> int:
    # combining marks take no column of their own
    return sum(0 if unicodedata.combining(ch) or unicodedata.category(ch) == "Mc" else 1 for ch in s)


def render_text(report: dict, bar_width: int = 12) -> str:
    """Fixed-width table: one row per token, one signed bar column per method."""
    tokens = report["tokens"]
    exps = report["explanations"]
    tok_w = max([5] + [_cell_width(t) for t in tokens])
    lines = []
    for d in report["decisions"]:
        flag = "addressed" if d["addressed"] else "not addressed"
        lines.append(f"{d['aspect']:<11} {d['sentiment']:<8} {d['confidence']:.3f} {flag}")
    if lines:
        lines.append("")
    head = "token".ljust(tok_w) + "".join(f" | {e['method'][:bar_width + 8]:<{bar_width + 8}}" for e in exps)
    lines.append(head)
    lines.append("-" * _cell_width(head))
    scales = [max([abs(s) for s in e["scores"]] + [1e-12]) for e in exps]
    for i, tok in enumerate(tokens):
        row = tok + " " * (tok_w - _cell_width(tok))
        for e, scale in zip(exps, scales):
            s = e["scores"][i]
            n = int(round(abs(s) / scale * bar_width))
            bar = ("+" if s >= 0 else "-") * n
            row += f" | {s:+.4f} {bar:<{bar_width}}"
        lines.append(row)
    for e in exps:
        base = "n/a" if e["base_value"] is None else f"{e['base_value']:.4f}"
        lines.append(f"{e['method']}: aspect={e['aspect']} class={e['class']} base={base}")
    return "\n".join(lines) + "\n"


def rounded(values, digits: int = 12) -> list[float]:
    """Scores rounded for stable text output across platforms."""
    return [float(round(v, digits)) for v in np.asarray(values, dtype=np.float64)]
