"""Cross-domain transfer protocol and synthetic shifted domains."""

from .experiment import TransferExperiment, relative_to_full, run_transfer, shift_sweep, shifted_domain
from .protocol import (
    BUDGETS,
    REGIMENS,
    AspectMatrix,
    DomainDataset,
    FewShotConfig,
    FewShotResult,
    TransferReport,
    ZeroShotResult,
    aspect_matrix,
    aspect_wise_report,
    domain_gap,
    ensemble_checksum,
    evaluate_on,
    few_shot_finetune,
    stratified_order,
    synth_domain,
    zero_shot_eval,
)
from .synth import Lexicon, ShiftSpec, SyntheticCorpus, carrier_substitutions

__all__ = [
    "AspectMatrix", "BUDGETS", "DomainDataset", "FewShotConfig", "FewShotResult", "Lexicon", "REGIMENS",
    "ShiftSpec", "SyntheticCorpus", "TransferExperiment", "TransferReport", "ZeroShotResult", "aspect_matrix",
    "aspect_wise_report", "carrier_substitutions", "domain_gap", "ensemble_checksum", "evaluate_on",
    "few_shot_finetune", "relative_to_full", "run_transfer", "shift_sweep", "shifted_domain",
    "stratified_order", "synth_domain", "zero_shot_eval",
]
