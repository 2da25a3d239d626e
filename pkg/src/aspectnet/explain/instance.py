"""Run several explanation methods on one review against a trained ensemble."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..data import ASPECTS, SENTIMENTS, Review, encode_reviews
from ..ensemble.decision import decide
from ..ensemble.hybrid import HybridEnsemble, renormalized
from .attention import attention_attribution
from .lime import lime_explain
from .report import Explanation, explanation_report, rounded
from .shapley import MAX_EXACT_TOKENS, exact_shapley, kernel_shap
from .value import MaskingPolicy, ensemble_value_function, token_positions


@dataclass
class ExplainSettings:
    methods: tuple[str, ...] = ("ExactShapley", "KernelSHAP", "LIMESurrogate", "Attention")
    shap_budget: int = 2048
    lime_samples: int = 1000
    lime_features: int | None = None
    lime_kernel_width: float = 0.25
    masking: str = "PAD"
    seed: int = 0


def explain_review(ensemble: HybridEnsemble, review: Review, aspect: str | None = None,
                   target_class: str | None = None, settings: ExplainSettings | None = None) -> dict:
    """Explanation report for one (aspect, class) probability of ``review``.

    Defaults: the first annotated aspect and the ensemble's predicted class
    for it. Exact Shapley is skipped above the enumeration limit.
    """
    settings = settings or ExplainSettings()
    data = encode_reviews([review], ensemble.vocab, ensemble.max_len)
    ids = data.ids[0]
    pos = token_positions(ids)
    tokens = [data.tokens[0][i] for i in range(len(pos))]
    n = len(tokens)
    feats = ensemble.features(data)
    _, coef = renormalized(ensemble.weights, feats, 1)
    coef = np.asarray(coef).reshape(-1, len(ensemble.order))[0]
    preds = ensemble.component_predictions(data, with_attention="Attention" in settings.methods)
    pred = ensemble.combine_cached(preds, feats)
    aspect = aspect or (review.annotations[0][0] if review.annotations else ASPECTS[0])
    a = ASPECTS.index(aspect)
    target_class = target_class or SENTIMENTS[int(np.argmax(pred.probs[0, a]))]
    policy = MaskingPolicy(settings.masking)
    fn = ensemble_value_function(ensemble, ids, coef, aspect, target_class, policy)

    out: list[Explanation] = []
    for method in settings.methods:
        if method == "ExactShapley":
            if n > MAX_EXACT_TOKENS:
                continue
            r = exact_shapley(fn, n)
            out.append(Explanation(method, aspect, target_class, tokens, rounded(r.values), round(r.base_value, 12),
                                   {"evaluations": r.evaluations, "masking": policy.token,
                                    "full_value": round(r.full_value, 12)}))
        elif method == "KernelSHAP":
            budget = max(settings.shap_budget, 2 * n + 2)
            r = kernel_shap(fn, n, budget, settings.seed)
            out.append(Explanation(method, aspect, target_class, tokens, rounded(r.values), round(r.base_value, 12),
                                   {"evaluations": r.evaluations, "budget": budget, "seed": settings.seed,
                                    "masking": policy.token, "full_value": round(r.full_value, 12)}))
        elif method == "LIMESurrogate":
            r = lime_explain(fn, n, settings.lime_samples, settings.lime_features, settings.lime_kernel_width,
                             settings.seed)
            out.append(Explanation(method, aspect, target_class, tokens, rounded(r.coefficients),
                                   round(r.intercept, 12),
                                   {"samples": r.samples, "seed": settings.seed, "r2": round(r.r2, 12),
                                    "kernel_width": settings.lime_kernel_width,
                                    "selected": [int(i) for i in r.selected], "masking": policy.token}))
        elif method == "Attention":
            attn = preds["transformer"].attention if "transformer" in preds else None
            scores = attention_attribution(None if attn is None else attn[0], ids != 0)
            out.append(Explanation(method, aspect, target_class, tokens, rounded(scores), None,
                                   {"layer": "last", "reduction": "head-mean, pooled query"}))
        else:
            raise ValueError(f"unknown method {method!r}")
    decisions = [asdict(d) for d in decide(pred.probs[0], ensemble.threshold)]
    instance = {"id": review.id, "text": review.text, "domain": review.domain}
    meta = {"coefficients": dict(zip(ensemble.order, rounded(coef))),
            "temperature": ensemble.calibration.temperature, "threshold": ensemble.threshold,
            "settings": asdict(settings) | {"methods": list(settings.methods)}}
    return explanation_report(instance, out, decisions, meta)
