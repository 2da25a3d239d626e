"""``aspectnet`` command: one subcommand per pipeline stage, plus ``run`` for all of them.

Every stage reads ``<out>/manifest.json``, checks its predecessor and the
config hash, and skips itself when its inputs and outputs are unchanged.
Failures print one JSON object to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from .. import __version__
from ..data import DatasetError, write_jsonl
from ..transfer import SyntheticCorpus
from .config import ConfigError, RunConfig
from .manifest import Manifest, PipelineError
from .stages import PARALLEL, STAGES

log = logging.getLogger("aspectnet")

PIPELINE = ("ingest", "stats", "train", "ensemble", "calibrate", "evaluate", "explain", "transfer", "ablate",
            "report")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI or JSON run configuration")
    p.add_argument("--seed", type=int, help="global seed (overrides [run] seed)")
    p.add_argument("--out", type=Path, help="run directory (overrides [run] out)")
    p.add_argument("--force", action="store_true", help="run even when the config hash changed or nothing did")
    p.add_argument("--jobs", type=int, default=1, help="worker count for stage-internal parallelism")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aspectnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        _common(sub.add_parser(name, help=f"run the {name} stage"))
    _common(sub.add_parser("run", help="run every stage in order"))
    synth = sub.add_parser("synth", help="write a synthetic review corpus as JSONL")
    synth.add_argument("path", type=Path)
    synth.add_argument("-n", type=int, default=2000)
    synth.add_argument("--generator-seed", type=int, default=0, help="fixes the synthetic lexicon")
    synth.add_argument("--seed", type=int, default=0, help="draws the reviews")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.set("run", "seed", args.seed)
    if args.out is not None:
        cfg.set("run", "out", str(args.out))
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return cfg


def run_stage(name: str, cfg: RunConfig, force: bool = False, jobs: int = 1) -> dict:
    """Run one stage under the manifest's guards. Returns the stage's manifest record."""
    root = Path(cfg["run"]["out"])
    seed = cfg["run"]["seed"]
    manifest = Manifest.open(root)
    config_hash = cfg.hash()
    if name != "ingest":
        manifest.check_config(config_hash, name, force)
    manifest.require(name)
    if not force and manifest.up_to_date(name, config_hash):
        log.info("%s: up to date", name)
        return manifest.stages[name] | {"skipped": True}
    t0 = time.perf_counter()
    fn = STAGES[name]
    outputs, summary = fn(root, cfg, seed, jobs) if name in PARALLEL else fn(root, cfg, seed)
    seconds = time.perf_counter() - t0
    if name == "ingest":
        (root / "config.ini").write_text(cfg.to_ini(portable=True), encoding="utf-8")
        outputs = [*outputs, "config.ini"]
    rec = manifest.record(name, config_hash, seed, outputs, seconds, {"summary": summary})
    log.info("%s: %d artifacts in %.1fs", name, len(outputs), seconds)
    return rec


def _error(exc: BaseException, code: int) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("ASPECTNET_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            reviews = SyntheticCorpus(args.generator_seed).generate(args.n, seed=args.seed)
            args.path.parent.mkdir(parents=True, exist_ok=True)
            write_jsonl(reviews, args.path)
            print(json.dumps({"path": str(args.path), "reviews": len(reviews)}))
            return 0
        cfg = resolve_config(args)
        names = PIPELINE if args.command == "run" else (args.command,)
        results = {}
        for name in names:
            rec = run_stage(name, cfg, args.force, args.jobs)
            results[name] = {"skipped": rec.get("skipped", False), "summary": rec.get("summary")}
        print(json.dumps(results, ensure_ascii=False, sort_keys=True))
        return 0
    except PipelineError as exc:
        return _error(exc, exc.exit_code)
    except (ConfigError, DatasetError, ValueError, OSError) as exc:
        return _error(exc, 2)
    except Exception as exc:  # noqa: BLE001 - the contract is JSON on any failure
        log.debug("unhandled", exc_info=True)
        return _error(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
