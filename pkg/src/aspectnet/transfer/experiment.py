"""Seeded synthetic transfer experiments: shift sweeps and few-shot curves."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..data import Review
from ..ensemble.hybrid import HybridEnsemble
from .protocol import (
    DomainDataset,
    FewShotConfig,
    TransferReport,
    aspect_matrix,
    evaluate_on,
    few_shot_finetune,
    synth_domain,
    zero_shot_eval,
)
from .synth import ShiftSpec, SyntheticCorpus

log = logging.getLogger(__name__)


@dataclass
class TransferExperiment:
    shift: float = 0.5
    noise: float = 0.05
    style_tokens: int = 0
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    budgets: tuple[int, ...] = (50, 100, 500)
    full_reference: bool = True
    pool_size: int = 1000
    test_size: int = 500
    sweep_shifts: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    few_shot: FewShotConfig = field(default_factory=FewShotConfig)

    def manifest(self) -> dict:
        d = asdict(self)
        d["few_shot"] = {k: v for k, v in d["few_shot"].items() if k != "settings"} | {
            "settings": asdict(self.few_shot.settings)}
        return d


def shifted_domain(corpus: SyntheticCorpus, shift: float, noise: float, seed: int, n: int,
                   style_tokens: int = 0) -> DomainDataset:
    name = f"shift{shift:.2f}-seed{seed}"
    return synth_domain(corpus, ShiftSpec(shift, noise, style_tokens, seed=seed), n, domain=name)


def shift_sweep(ensemble: HybridEnsemble, corpus: SyntheticCorpus, source_f1: float,
                exp: TransferExperiment) -> dict[float, list[float]]:
    """Zero-shot macro-F1 per shift rate, one value per seed."""
    out: dict[float, list[float]] = {}
    for shift in exp.sweep_shifts:
        for seed in exp.seeds:
            d = shifted_domain(corpus, shift, exp.noise, seed, exp.test_size, exp.style_tokens)
            out.setdefault(float(shift), []).append(zero_shot_eval(ensemble, d, source_f1).metrics.macro_f1)
    return out


def _few_shot_cell(args) -> list[dict]:
    ensemble, pool, test, budgets, seed, config = args
    rows = []
    for b in budgets:
        _, res = few_shot_finetune(ensemble, pool, b, seed, test, config)
        log.info("few-shot %s budget %d seed %d: F1 %.4f", pool.domain, b, seed, res.metrics.macro_f1)
        rows.append(res.to_dict())
    return rows


def run_transfer(ensemble: HybridEnsemble, corpus: SyntheticCorpus, source_test: Sequence[Review],
                 exp: TransferExperiment, jobs: int = 1) -> TransferReport:
    """Zero-shot, aspect breakdown and few-shot curves on seeded shifted domains.

    Each (seed) cell adapts its own copy of the ensemble; rows are reduced in
    (domain, budget, seed) order so the report does not depend on ``jobs``.
    """
    source_f1 = evaluate_on(ensemble, source_test).macro_f1
    report = TransferReport(source_f1, manifest=exp.manifest())
    cells, per_domain = [], {}
    for seed in exp.seeds:
        d = shifted_domain(corpus, exp.shift, exp.noise, seed, exp.pool_size + exp.test_size, exp.style_tokens)
        pool, test = d.split(exp.test_size, seed)
        z = zero_shot_eval(ensemble, test, source_f1)
        report.zero_shot[d.domain] = z.to_dict()
        per_domain[d.domain] = z.metrics
        budgets = [b for b in exp.budgets if b <= len(pool)]
        if exp.full_reference:
            budgets.append(len(pool))
        cells.append((ensemble, pool, test, budgets, seed, exp.few_shot))
    report.aspects = aspect_matrix(per_domain)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_few_shot_cell, cells))
    else:
        results = [_few_shot_cell(c) for c in cells]
    rows = [r for cell in results for r in cell]
    family = f"shift{exp.shift:.2f}"
    for r in rows:
        # curves aggregate seeds, so rows are keyed by the domain family
        r["target"], r["domain"] = r["domain"], family
        r["full_reference"] = r["budget"] == exp.pool_size
    report.few_shot = sorted(rows, key=lambda r: (r["domain"], r["budget"], r["seed"]))
    report.manifest["sweep"] = {str(k): v for k, v in shift_sweep(ensemble, corpus, source_f1, exp).items()}
    return report


def relative_to_full(report: TransferReport, budget: int) -> float:
    """Mean over seeds of F1(budget) divided by mean F1 of the full-pool reference."""
    few = [r["f1"] for r in report.few_shot if r["budget"] == budget and not r.get("full_reference")]
    full = [r["f1"] for r in report.few_shot if r.get("full_reference")]
    if not few or not full:
        raise ValueError("report lacks the requested budget or the full reference")
    return float(np.mean(few) / np.mean(full))
