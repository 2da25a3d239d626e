"""Token-level explanations: Shapley values, a local surrogate and attention."""

from .attention import AttributionUnavailable, attention_attribution
from .instance import ExplainSettings, explain_review
from .lime import DegeneratePerturbations, SurrogateResult, lime_explain, perturbation_masks, weighted_ridge
from .report import (
    EXPLANATION_SCHEMA,
    METHODS,
    REPORT_SCHEMA,
    AlignmentError,
    Explanation,
    explanation_report,
    load_report,
    render_text,
    report_json,
)
from .shapley import MAX_EXACT_TOKENS, ShapleyError, ShapleyResult, all_coalitions, exact_shapley, kernel_shap
from .value import MaskingPolicy, ensemble_value_function, masked_ids, model_value_function, token_positions

__all__ = [
    "AlignmentError", "AttributionUnavailable", "DegeneratePerturbations", "EXPLANATION_SCHEMA",
    "ExplainSettings", "Explanation", "MAX_EXACT_TOKENS", "METHODS", "MaskingPolicy", "REPORT_SCHEMA",
    "ShapleyError", "ShapleyResult", "SurrogateResult", "all_coalitions", "attention_attribution",
    "ensemble_value_function", "exact_shapley", "explain_review", "explanation_report", "kernel_shap",
    "lime_explain", "load_report", "masked_ids", "model_value_function", "perturbation_masks", "render_text",
    "report_json", "token_positions", "weighted_ridge",
]
