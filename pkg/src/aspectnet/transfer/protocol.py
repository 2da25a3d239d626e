"""Cross-domain evaluation: zero-shot, domain gap, aspect breakdown, few-shot adaptation."""

from __future__ import annotations

import copy
import hashlib
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..data import ASPECTS, Review, encode_reviews
from ..encoders.training import TrainConfig, desk_train_config, train_individual
from ..ensemble.hybrid import HybridEnsemble
from ..ensemble.pipeline import EnsembleSettings, fit_ensemble_head
from ..gradcore import checkpoint
from ..metrics import Metrics, evaluate
from ..rng import derive_rng
from .synth import ShiftSpec, SyntheticCorpus, carrier_substitutions

log = logging.getLogger(__name__)

BUDGETS = (50, 100, 500, 1000, 5000)
REGIMENS = ("all", "recurrent")


@dataclass
class DomainDataset:
    domain: str
    reviews: list[Review]
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.reviews:
            raise ValueError(f"domain {self.domain!r} has no reviews")
        for r in self.reviews:
            if r.domain != self.domain:
                raise ValueError(f"review {r.id} tagged {r.domain!r}, expected {self.domain!r}")

    def __len__(self) -> int:
        return len(self.reviews)

    def split(self, n_test: int, seed: int) -> tuple["DomainDataset", "DomainDataset"]:
        """(adaptation pool, test) by one seeded permutation."""
        if not 0 < n_test < len(self):
            raise ValueError("test size must leave a nonempty pool")
        order = derive_rng(seed, "domain-split", self.domain).permutation(len(self))
        pick = lambda ix: [self.reviews[int(i)] for i in ix]  # noqa: E731
        return (DomainDataset(self.domain, pick(order[n_test:]), dict(self.notes, part="pool")),
                DomainDataset(self.domain, pick(order[:n_test]), dict(self.notes, part="test")))


def synth_domain(source: SyntheticCorpus, spec: ShiftSpec, n: int, domain: str = "target") -> DomainDataset:
    """Target domain derived from the source generator.

    A ``vocab_shift`` fraction of sentiment carriers is swapped for unseen
    synonyms, ``style_tokens`` unseen filler words are mixed in at
    ``style_rate``, and labels flip at ``label_noise``.
    """
    subs = carrier_substitutions(source, spec.vocab_shift, spec.seed)
    reserve = source.lexicon.reserve
    # style words come from the far end of the reserve, disjoint from synonyms
    style = reserve[len(reserve) - spec.style_tokens:] if spec.style_tokens else None
    reviews = source.generate(n, seed=spec.seed, domain=domain, id_prefix=f"{domain}-", substitutions=subs,
                              style_tokens=style, style_rate=spec.style_rate, label_noise=spec.label_noise)
    notes = {"generator_seed": source.seed, "vocab_shift": spec.vocab_shift, "label_noise": spec.label_noise,
             "style_tokens": spec.style_tokens, "style_rate": spec.style_rate, "seed": spec.seed,
             "substituted_carriers": len(subs)}
    return DomainDataset(domain, reviews, notes)


def ensemble_checksum(ensemble: HybridEnsemble) -> str:
    h = hashlib.sha256()
    for kind in sorted(ensemble.components):
        h.update(kind.encode())
        h.update(checkpoint.dumps(ensemble.components[kind].state_dict()))
    h.update(repr(sorted(ensemble.weights.to_dict()["params"].items())).encode())
    h.update(repr(ensemble.calibration.temperature).encode())
    return h.hexdigest()


def domain_gap(source_f1: float, target_f1: float) -> float:
    """Relative F1 drop in percent."""
    if source_f1 <= 0:
        raise ValueError("source F1 must be positive")
    return (source_f1 - target_f1) / source_f1 * 100.0


def evaluate_on(ensemble: HybridEnsemble, reviews: Sequence[Review], jobs: int = 1) -> Metrics:
    data = encode_reviews(reviews, ensemble.vocab, ensemble.max_len)
    return evaluate(ensemble.predict(data, jobs=jobs).labels(), data.labels, data.mask)


@dataclass
class ZeroShotResult:
    domain: str
    metrics: Metrics
    source_f1: float
    gap: float
    checksum_before: str
    checksum_after: str

    def to_dict(self) -> dict:
        return {"domain": self.domain, "f1": self.metrics.macro_f1, "accuracy": self.metrics.accuracy,
                "source_f1": self.source_f1, "gap_percent": self.gap, "metrics": self.metrics.to_dict(),
                "checksum_before": self.checksum_before, "checksum_after": self.checksum_after}


def zero_shot_eval(ensemble: HybridEnsemble, target: DomainDataset, source_f1: float) -> ZeroShotResult:
    """Evaluate through the source vocabulary with no parameter updates."""
    if len(target) == 0:
        raise ValueError("empty target domain")
    before = ensemble_checksum(ensemble)
    m = evaluate_on(ensemble, target.reviews)
    after = ensemble_checksum(ensemble)
    if before != after:
        raise RuntimeError("zero-shot evaluation modified the ensemble")
    return ZeroShotResult(target.domain, m, source_f1, domain_gap(source_f1, m.macro_f1), before, after)


# -- few-shot --------------------------------------------------------------------------


def stratified_order(reviews: Sequence[Review], seed: int) -> list[int]:
    """One seeded ordering of ``reviews`` whose every prefix is a stratified sample.

    Strata are (aspect, sentiment) of a review's first annotation. The
    ordering opens with one review per stratum, then repeatedly takes from
    the stratum furthest below its proportional share, so budgets are nested
    and small strata are not left empty.
    """
    rng = derive_rng(seed, "few-shot-order")
    strata: dict[tuple, list[int]] = {}
    for i in rng.permutation(len(reviews)):
        strata.setdefault(reviews[int(i)].annotations[0], []).append(int(i))
    keys = sorted(strata)
    share = {k: len(strata[k]) / len(reviews) for k in keys}
    taken = {k: 0 for k in keys}
    order = []
    for k in keys:
        order.append(strata[k][0])
        taken[k] = 1
    while len(order) < len(reviews):
        n = len(order) + 1
        k = max((k for k in keys if taken[k] < len(strata[k])), key=lambda k: (share[k] * n - taken[k], -keys.index(k)))
        order.append(strata[k][taken[k]])
        taken[k] += 1
    return order


@dataclass
class FewShotConfig:
    epochs: int = 5
    lr_scale: float = 0.1
    regimen: str = "all"
    inner_train_fraction: float = 0.8
    extend_vocabulary: bool = True
    settings: EnsembleSettings = field(default_factory=EnsembleSettings)

    def __post_init__(self):
        if self.regimen not in REGIMENS:
            raise ValueError(f"regimen must be one of {REGIMENS}")


@dataclass
class FewShotResult:
    domain: str
    budget: int
    seed: int
    regimen: str
    metrics: Metrics
    sample_ids: list[str]

    def to_dict(self) -> dict:
        return {"domain": self.domain, "budget": self.budget, "seed": self.seed, "regimen": self.regimen,
                "f1": self.metrics.macro_f1, "accuracy": self.metrics.accuracy,
                "metrics": self.metrics.to_dict(), "sample_ids": self.sample_ids}


def few_shot_finetune(ensemble: HybridEnsemble, pool: DomainDataset, budget: int, seed: int,
                      test: DomainDataset, config: FewShotConfig | None = None,
                      base_train_configs: dict[str, TrainConfig] | None = None
                      ) -> tuple[HybridEnsemble, FewShotResult]:
    """Adapt a private copy of ``ensemble`` on ``budget`` labelled target reviews.

    Members are fine-tuned at ``lr_scale`` times their original learning rate
    for ``epochs`` epochs on the inner-train part of the sample; the ensemble
    weights and temperature are then re-learned on the held-out part. New
    target tokens get embedding rows initialized from UNK.
    """
    config = config or FewShotConfig()
    if budget < 0 or budget > len(pool):
        raise ValueError(f"budget {budget} outside 0..{len(pool)}")
    adapted = copy.deepcopy(ensemble)
    order = stratified_order(pool.reviews, seed)[:budget]
    sample = [pool.reviews[i] for i in order]
    if budget > 0:
        perm = derive_rng(seed, "inner-split", budget).permutation(budget)
        cut = max(1, int(np.floor(config.inner_train_fraction * budget + 1e-9)))
        inner_train = [sample[i] for i in sorted(perm[:cut])]
        inner_val = [sample[i] for i in sorted(perm[cut:])] or inner_train
        if config.extend_vocabulary:
            tokens = sorted({t for toks in encode_reviews(inner_train, adapted.vocab, adapted.max_len).tokens
                             for t in toks})
            adapted.vocab = adapted.vocab.extend(tokens)
            for m in adapted.components.values():
                m.grow_vocabulary(len(adapted.vocab))
        tr = encode_reviews(inner_train, adapted.vocab, adapted.max_len)
        va = encode_reviews(inner_val, adapted.vocab, adapted.max_len)
        for kind, model in adapted.components.items():
            if config.regimen == "recurrent" and kind == "transformer":
                continue
            base = (base_train_configs or {}).get(kind) or desk_train_config(kind)
            tc = replace(base, lr=base.lr * config.lr_scale, epochs=config.epochs, patience=config.epochs,
                         warmup_fraction=0.0)
            train_individual(model, tr, va, tc, derive_rng(seed, "few-shot", kind, budget))
        fit_ensemble_head(adapted, va, config.settings, seed)
    m = evaluate_on(adapted, test.reviews)
    return adapted, FewShotResult(pool.domain, budget, seed, config.regimen, m, [r.id for r in sample])


# -- aspect breakdown ------------------------------------------------------------------


@dataclass
class AspectMatrix:
    domains: list[str]
    f1: dict[str, dict[str, float | None]]
    averages: dict[str, float | None]

    def to_dict(self) -> dict:
        return {"domains": self.domains, "f1": self.f1, "averages": self.averages}

    def to_csv(self) -> str:
        lines = ["aspect," + ",".join(self.domains) + ",average"]
        fmt = lambda v: "" if v is None else f"{v:.4f}"  # noqa: E731
        for a in ASPECTS:
            lines.append(",".join([a, *(fmt(self.f1[a][d]) for d in self.domains), fmt(self.averages[a])]))
        return "\n".join(lines) + "\n"


def aspect_matrix(per_domain: dict[str, Metrics]) -> AspectMatrix:
    domains = list(per_domain)
    f1 = {a: {} for a in ASPECTS}
    for d, m in per_domain.items():
        for a in ASPECTS:
            cell = m.per_aspect.get(a)
            f1[a][d] = None if cell is None else cell["macro_f1"]
    averages = {}
    for a in ASPECTS:
        vals = [v for v in f1[a].values() if v is not None]
        if not vals:
            warnings.warn(f"aspect {a} has no annotations in any domain", stacklevel=2)
        averages[a] = float(np.mean(vals)) if vals else None
    return AspectMatrix(domains, f1, averages)


def aspect_wise_report(ensemble: HybridEnsemble, domains: Sequence[DomainDataset]) -> AspectMatrix:
    return aspect_matrix({d.domain: evaluate_on(ensemble, d.reviews) for d in domains})


# -- report ----------------------------------------------------------------------------


@dataclass
class TransferReport:
    source_f1: float
    zero_shot: dict[str, dict] = field(default_factory=dict)
    aspects: AspectMatrix | None = None
    few_shot: list[dict] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    @property
    def gaps(self) -> dict[str, float]:
        return {d: z["gap_percent"] for d, z in self.zero_shot.items()}

    def check_gaps(self, tol_pp: float = 0.1) -> None:
        for d, z in self.zero_shot.items():
            if abs(domain_gap(self.source_f1, z["f1"]) - z["gap_percent"]) > tol_pp:
                raise AssertionError(f"stored gap for {d} disagrees with stored F1s")

    def curves(self) -> dict[str, dict[int, list[float]]]:
        out: dict[str, dict[int, list[float]]] = {}
        for row in sorted(self.few_shot, key=lambda r: (r["domain"], r["budget"], r["seed"])):
            out.setdefault(row["domain"], {}).setdefault(row["budget"], []).append(row["f1"])
        return out

    def to_dict(self) -> dict:
        return {"source_f1": self.source_f1, "zero_shot": self.zero_shot, "gaps": self.gaps,
                "aspects": None if self.aspects is None else self.aspects.to_dict(),
                "few_shot": [{k: v for k, v in r.items() if k != "metrics"} for r in self.few_shot],
                "curves": {d: {str(b): v for b, v in c.items()} for d, c in self.curves().items()},
                "manifest": self.manifest}

    def zero_shot_csv(self) -> str:
        lines = ["domain,f1,accuracy,gap_percent"]
        for d, z in self.zero_shot.items():
            lines.append(f"{d},{z['f1']:.4f},{z['accuracy']:.4f},{z['gap_percent']:.2f}")
        return "\n".join(lines) + "\n"

    def few_shot_csv(self) -> str:
        lines = ["domain,budget,mean_f1,seeds"]
        for d, c in self.curves().items():
            for b, v in sorted(c.items()):
                lines.append(f"{d},{b},{np.mean(v):.4f},{len(v)}")
        return "\n".join(lines) + "\n"
