"""Pipeline stages. Each reads its predecessor's artifacts and returns the files it wrote."""

from __future__ import annotations

import json
import logging
from pathlib import Path

from ..data import (
    NormalizationPolicy,
    Review,
    build_vocab,
    corpus_stats,
    encode_reviews,
    load_dataset,
    split,
    tokenize,
    write_jsonl,
)
from ..encoders.model import desk_config
from ..encoders.training import desk_train_config
from ..ensemble import (
    EnsembleSettings,
    ablate,
    ablation_csv,
    calibrate_ensemble,
    learn_ensemble_weights,
    load_ensemble,
    save_calibration,
    save_members,
    save_weights,
    train_members,
)
from ..explain import ExplainSettings, explain_review, render_text, report_json
from ..metrics import evaluate
from ..rng import derive_seed
from ..transfer import (
    DomainDataset,
    FewShotConfig,
    SyntheticCorpus,
    TransferExperiment,
    aspect_matrix,
    evaluate_on,
    few_shot_finetune,
    run_transfer,
    zero_shot_eval,
)
from ..transfer.protocol import TransferReport
from .config import RunConfig
from .tables import render_stats, render_summary, write_figures

log = logging.getLogger(__name__)

REVIEWS, SPLITS, REJECTIONS = "data/reviews.jsonl", "data/splits.json", "data/rejections.json"
MODELS = "models"


def write_json(root: Path, rel: str, obj) -> str:
    p = root / rel
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return rel


def write_text(root: Path, rel: str, text: str) -> str:
    p = root / rel
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")
    return rel


def read_reviews(root: Path) -> tuple[list[Review], list[Review], list[Review]]:
    reviews, _ = load_dataset(root / REVIEWS, "JSONL")
    splits = json.loads((root / SPLITS).read_text(encoding="utf-8"))
    # ids may repeat; the split manifest lists positions as well
    pos = splits["positions"]
    return tuple([reviews[i] for i in pos[part]] for part in ("train", "validation", "test"))


def ensemble_settings(cfg: RunConfig) -> EnsembleSettings:
    e = cfg["ensemble"]
    return EnsembleSettings(mode=e["mode"], lambda_diversity=e["lambda_diversity"], threshold=e["threshold"],
                            space=e["space"], weight_steps=e["weight_steps"], weight_lr=e["weight_lr"],
                            shrinkage=e["shrinkage"])


# -- stages ------------------------------------------------------------------------------


def stage_ingest(root: Path, cfg: RunConfig, seed: int) -> tuple[list[str], dict]:
    d = cfg["data"]
    if d["path"]:
        policy = None
        if d["normalize"]:
            policy = NormalizationPolicy(d["strip_emoji"], d["strip_latin"], d["strip_punctuation"], d["bangla_only"])
        reviews, report = load_dataset(d["path"], d["format"] or None, policy)
        rejections = report.to_dict()
    else:
        reviews = SyntheticCorpus(d["synthetic_seed"]).generate(d["synthetic_reviews"],
                                                                seed=derive_seed(seed, "ingest", "synthetic"))
        rejections = {"rejected": [], "warnings": []}
    sp = split(reviews, tuple(d["ratios"]), seed=derive_seed(seed, "split"))
    index = {id(r): i for i, r in enumerate(reviews)}
    positions = {part: [index[id(r)] for r in getattr(sp, part)] for part in ("train", "validation", "test")}
    (root / "data").mkdir(parents=True, exist_ok=True)
    write_jsonl(reviews, root / REVIEWS)
    outs = [REVIEWS, write_json(root, SPLITS, sp.manifest() | {"positions": positions}),
            write_json(root, REJECTIONS, rejections)]
    return outs, {"reviews": len(reviews), "rejected": len(rejections["rejected"]),
                  "sizes": [len(sp.train), len(sp.validation), len(sp.test)]}


def stage_stats(root: Path, cfg: RunConfig, seed: int) -> tuple[list[str], dict]:
    reviews, _ = load_dataset(root / REVIEWS, "JSONL")
    stats = corpus_stats(reviews)
    return ([write_json(root, "reports/stats.json", stats), write_text(root, "reports/stats.txt", render_stats(stats))],
            {"n_reviews": stats["n_reviews"], "aspects": {a: sum(v.values()) for a, v in stats["aspects"].items()}})


def stage_train(root: Path, cfg: RunConfig, seed: int) -> tuple[list[str], dict]:
    train, val, _ = read_reviews(root)
    kinds = cfg["model"]["components"]
    max_len = cfg["data"]["max_len"]
    configs = {k: desk_config(k, **({"max_len": max_len} | cfg.member_overrides(k))) for k in kinds}
    tconfigs = {k: desk_train_config(k, **cfg.train_overrides(k)) for k in kinds}
    vocab = build_vocab((tokenize(r.text) for r in train), cfg["data"]["min_frequency"])
    ensemble, report = train_members(train, val, derive_seed(seed, "train"), configs, tconfigs, vocab, kinds)
    digests = save_members(ensemble, root / MODELS)
    outs = [f"{MODELS}/{name}" for name in digests]
    history = {k: v for k, v in report.to_dict().items() if k != "seconds"}
    outs.append(write_json(root, "reports/training.json", history))
    summary = {k: round(v["best_val_macro_f1"], 4) for k, v in report.members.items()}
    return outs, {"val_macro_f1": summary, "member_seconds": {k: round(v, 2) for k, v in report.seconds.items()}}


def stage_ensemble(root: Path, cfg: RunConfig, seed: int) -> tuple[list[str], dict]:
    _, val, _ = read_reviews(root)
    ensemble = load_ensemble(root / MODELS)
    va = encode_reviews(val, ensemble.vocab, ensemble.max_len)
    learn_ensemble_weights(ensemble, va, ensemble_settings(cfg), derive_seed(seed, "ensemble"))
    digests = save_weights(ensemble, root / MODELS)
    outs = [f"{MODELS}/{n}" for n in digests]
    if ensemble.weights.mode != "gated":
        outs.append(write_text(root, "reports/weights.csv", ensemble.weights.table_csv()))
    outs.append(write_text(root, "reports/ensemble.ini", ensemble.config_section()))
    return outs, {"mode": ensemble.weights.mode, "final_objective": ensemble.weights.trace[-1]}


def stage_calibrate(root: Path, cfg: RunConfig, seed: int) -> tuple[list[str], dict]:
    _, val, _ = read_reviews(root)
    ensemble = load_ensemble(root / MODELS)
    calibrate_ensemble(ensemble, encode_reviews(val, ensemble.vocab, ensemble.max_len))
    digests = save_calibration(ensemble, root / MODELS)
    return [f"{MODELS}/{n}" for n in digests], ensemble.calibration.to_dict()


def stage_evaluate(root: Path, cfg: RunConfig, seed: int, jobs: int = 1) -> tuple[list[str], dict]:
    _, _, test = read_reviews(root)
    ensemble = load_ensemble(root / MODELS)
    te = encode_reviews(test, ensemble.vocab, ensemble.max_len)
    preds = ensemble.component_predictions(te, jobs=jobs)
    members = {k: evaluate(p.labels(), te.labels, te.mask).to_dict() for k, p in preds.items()}
    full = ensemble.combine_cached(preds, ensemble.features(te))
    result = {"ensemble": evaluate(full.labels(), te.labels, te.mask).to_dict(), "members": members,
              "n_test": len(test)}
    return [write_json(root, "reports/evaluation.json", result)], {"macro_f1": result["ensemble"]["macro_f1"]}


def stage_explain(root: Path, cfg: RunConfig, seed: int) -> tuple[list[str], dict]:
    _, _, test = read_reviews(root)
    ensemble = load_ensemble(root / MODELS)
    e = cfg["explain"]
    settings = ExplainSettings(tuple(e["methods"]), e["shap_budget"], e["lime_samples"], None,
                               e["lime_kernel_width"], e["masking"], derive_seed(seed, "explain"))
    outs = []
    for r in test[: e["instances"]]:
        rep = explain_review(ensemble, r, settings=settings)
        safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in r.id)
        outs.append(write_text(root, f"explanations/{safe}.json", report_json(rep)))
        outs.append(write_text(root, f"explanations/{safe}.txt", render_text(rep)))
    return outs, {"instances": len(outs) // 2}


def stage_ablate(root: Path, cfg: RunConfig, seed: int, jobs: int = 1) -> tuple[list[str], dict]:
    _, _, test = read_reviews(root)
    ensemble = load_ensemble(root / MODELS)
    te = encode_reviews(test, ensemble.vocab, ensemble.max_len)
    rows = ablate(ensemble, te, preds=ensemble.component_predictions(te, jobs=jobs))
    return ([write_json(root, "reports/ablation.json", [r.to_dict() for r in rows]),
             write_text(root, "reports/ablation.csv", ablation_csv(rows))],
            {r.configuration: round(r.metrics.macro_f1, 4) for r in rows})


def _transfer_config(cfg: RunConfig) -> TransferExperiment:
    t = cfg["transfer"]
    return TransferExperiment(shift=t["shift"], noise=t["noise"], style_tokens=t["style_tokens"],
                              seeds=tuple(t["seeds"]), budgets=tuple(t["budgets"]),
                              full_reference=t["full_reference"], pool_size=t["pool_size"],
                              test_size=t["test_size"], sweep_shifts=tuple(t["sweep_shifts"]),
                              few_shot=FewShotConfig(epochs=t["epochs"], lr_scale=t["lr_scale"], regimen=t["regimen"],
                                                     settings=ensemble_settings(cfg)))


def _transfer_real(ensemble, test, paths: list[str], exp: TransferExperiment, seed: int) -> TransferReport:
    source_f1 = evaluate_on(ensemble, test).macro_f1
    report = TransferReport(source_f1, manifest=exp.manifest() | {"domains": paths})
    per_domain = {}
    for path in paths:
        reviews, _ = load_dataset(path, default_domain=Path(path).stem)
        domain = DomainDataset(reviews[0].domain, [r for r in reviews if r.domain == reviews[0].domain],
                               {"path": str(path)})
        z = zero_shot_eval(ensemble, domain, source_f1)
        report.zero_shot[domain.domain] = z.to_dict()
        per_domain[domain.domain] = z.metrics
        if len(domain) <= exp.test_size:
            continue
        for s in exp.seeds:
            pool, tgt_test = domain.split(exp.test_size, derive_seed(seed, "transfer", s))
            for b in [b for b in exp.budgets if b <= len(pool)]:
                _, res = few_shot_finetune(ensemble, pool, b, s, tgt_test, exp.few_shot)
                report.few_shot.append(res.to_dict())
    report.aspects = aspect_matrix(per_domain)
    return report


def stage_transfer(root: Path, cfg: RunConfig, seed: int, jobs: int = 1) -> tuple[list[str], dict]:
    _, _, test = read_reviews(root)
    ensemble = load_ensemble(root / MODELS)
    exp = _transfer_config(cfg)
    if cfg["transfer"]["domains"]:
        report = _transfer_real(ensemble, test, cfg["transfer"]["domains"], exp, seed)
    elif not cfg["data"]["path"]:
        corpus = SyntheticCorpus(cfg["data"]["synthetic_seed"])
        report = run_transfer(ensemble, corpus, test, exp, jobs=jobs)
    else:
        raise ValueError("transfer needs [transfer] domains when the source corpus is not synthetic")
    report.check_gaps()
    outs = [write_json(root, "reports/transfer.json", report.to_dict()),
            write_text(root, "reports/transfer_zero_shot.csv", report.zero_shot_csv()),
            write_text(root, "reports/transfer_few_shot.csv", report.few_shot_csv())]
    if report.aspects is not None:
        outs.append(write_text(root, "reports/transfer_aspects.csv", report.aspects.to_csv()))
    return outs, {"source_f1": round(report.source_f1, 4), "gaps": {k: round(v, 2) for k, v in report.gaps.items()}}


def stage_report(root: Path, cfg: RunConfig, seed: int) -> tuple[list[str], dict]:
    def maybe(rel):
        p = root / rel
        return json.loads(p.read_text(encoding="utf-8")) if p.exists() else None

    weights_csv = root / "reports/weights.csv"
    summary = {
        "evaluation": maybe("reports/evaluation.json"),
        "ablation": maybe("reports/ablation.json"),
        "weights": weights_csv.read_text(encoding="utf-8") if weights_csv.exists() else None,
        "calibration": maybe(f"{MODELS}/calibration.json"),
        "transfer": maybe("reports/transfer.json"),
        "stats": maybe("reports/stats.json"),
    }
    outs = [write_json(root, "reports/summary.json", summary),
            write_text(root, "reports/summary.txt", render_summary(summary))]
    figures = write_figures(summary, root / "reports/figures")
    outs += [str(Path("reports/figures") / f.name) for f in figures]
    return outs, {"figures": len(figures)}


STAGES = {
    "ingest": stage_ingest,
    "stats": stage_stats,
    "train": stage_train,
    "ensemble": stage_ensemble,
    "calibrate": stage_calibrate,
    "evaluate": stage_evaluate,
    "explain": stage_explain,
    "ablate": stage_ablate,
    "transfer": stage_transfer,
    "report": stage_report,
}
PARALLEL = {"evaluate", "ablate", "transfer"}
