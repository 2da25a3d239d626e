"""Run manifest: config hash, per-stage artifacts with checksums, timings."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .. import __version__

MANIFEST = "manifest.json"

PREDECESSOR = {
    "ingest": None,
    "stats": "ingest",
    "train": "ingest",
    "ensemble": "train",
    "calibrate": "ensemble",
    "evaluate": "calibrate",
    "explain": "calibrate",
    "ablate": "calibrate",
    "transfer": "calibrate",
    "report": "evaluate",
}


class PipelineError(RuntimeError):
    exit_code = 1


class MissingPredecessor(PipelineError):
    exit_code = 3


class StaleConfig(PipelineError):
    exit_code = 4


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Manifest:
    def __init__(self, root, data: dict | None = None):
        self.root = Path(root)
        self.data = data or {"version": __version__, "config_hash": None, "seed": None, "stages": {}}

    @classmethod
    def open(cls, root) -> "Manifest":
        p = Path(root) / MANIFEST
        if p.exists():
            return cls(root, json.loads(p.read_text(encoding="utf-8")))
        return cls(root)

    def save(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        text = json.dumps(self.data, indent=1, sort_keys=True) + "\n"
        (self.root / MANIFEST).write_text(text, encoding="utf-8")

    @property
    def stages(self) -> dict:
        return self.data["stages"]

    def check_config(self, config_hash: str, stage: str, force: bool) -> None:
        recorded = self.data.get("config_hash")
        if recorded is not None and recorded != config_hash and not force:
            raise StaleConfig(f"config hash {config_hash[:12]} differs from the run's {recorded[:12]}; "
                              f"re-run with --force to rebuild '{stage}' anyway")

    def outputs_of(self, stage: str) -> dict[str, str]:
        return dict(self.stages.get(stage, {}).get("outputs", {}))

    def require(self, stage: str) -> dict[str, str]:
        """Outputs of ``stage``'s predecessor, verified present."""
        pred = PREDECESSOR[stage]
        if pred is None:
            return {}
        if pred not in self.stages:
            raise MissingPredecessor(f"stage '{stage}' needs '{pred}' to run first")
        outs = self.outputs_of(pred)
        for rel in outs:
            if not (self.root / rel).exists():
                raise MissingPredecessor(f"artifact {rel} from '{pred}' is missing")
        return outs

    def current_inputs(self, stage: str) -> dict[str, str]:
        """Checksums, as files stand now, of everything upstream of ``stage``."""
        out = {}
        pred = PREDECESSOR[stage]
        while pred is not None:
            for rel in self.outputs_of(pred):
                p = self.root / rel
                out[rel] = sha256_file(p) if p.exists() else "missing"
            pred = PREDECESSOR[pred]
        return dict(sorted(out.items()))

    def up_to_date(self, stage: str, config_hash: str) -> bool:
        rec = self.stages.get(stage)
        if not rec or rec.get("config_hash") != config_hash:
            return False
        if rec.get("inputs") != self.current_inputs(stage):
            return False
        for rel, digest in rec.get("outputs", {}).items():
            p = self.root / rel
            if not p.exists() or sha256_file(p) != digest:
                return False
        return True

    def record(self, stage: str, config_hash: str, seed: int, outputs: list[str], seconds: float,
               extra: dict | None = None) -> dict:
        if stage == "ingest":
            # a fresh ingest invalidates everything downstream
            self.data["stages"] = {}
        self.data["config_hash"] = config_hash
        self.data["seed"] = seed
        self.data["version"] = __version__
        rec = {"config_hash": config_hash, "inputs": self.current_inputs(stage),
               "outputs": {rel: sha256_file(self.root / rel) for rel in sorted(outputs)},
               "seconds": round(seconds, 3)}
        if extra:
            rec.update(extra)
        self.stages[stage] = rec
        self.save()
        return rec
