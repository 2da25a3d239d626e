"""Accuracy, macro precision/recall/F1 and confusion matrices.

Macro averages are unweighted means over the classes. A class with no gold
support contributes 0 to each macro mean and triggers a warning.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .data import ASPECTS, SENTIMENTS

log = logging.getLogger(__name__)


class ZeroSupportWarning(UserWarning):
    pass


def confusion_matrix(gold, pred, n_classes: int = len(SENTIMENTS)) -> np.ndarray:
    """Rows are gold classes, columns predicted classes."""
    gold, pred = np.asarray(gold, dtype=np.int64), np.asarray(pred, dtype=np.int64)
    if gold.shape != pred.shape:
        raise ValueError(f"length mismatch: gold {gold.shape} vs pred {pred.shape}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (gold, pred), 1)
    return cm


def _div(a, b, exact: bool):
    if b == 0:
        return Fraction(0) if exact else 0.0
    return Fraction(int(a), int(b)) if exact else float(a) / float(b)


def scores_from_confusion(cm, exact: bool = False, warn: bool = True) -> dict:
    """Per-class and macro precision/recall/F1 plus accuracy from a k x k confusion matrix.

    With ``exact=True`` every value is a :class:`fractions.Fraction`.
    """
    cm = np.asarray(cm, dtype=np.int64)
    k = cm.shape[0]
    tp = np.diag(cm)
    pred_tot = cm.sum(axis=0)
    gold_tot = cm.sum(axis=1)
    precision, recall, f1 = [], [], []
    for c in range(k):
        if gold_tot[c] == 0 and warn:
            warnings.warn(f"class {c} has zero support; it contributes 0 to macro averages",
                          ZeroSupportWarning, stacklevel=2)
        p = _div(tp[c], pred_tot[c], exact) if gold_tot[c] else _div(0, 1, exact)
        r = _div(tp[c], gold_tot[c], exact)
        if p + r > 0:
            f = 2 * p * r / (p + r)
        else:
            f = Fraction(0) if exact else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(f)
    if exact:
        macro = lambda xs: sum(xs, Fraction(0)) / k  # noqa: E731
        acc = _div(int(tp.sum()), int(cm.sum()), True)
    else:
        macro = lambda xs: float(np.mean(xs))  # noqa: E731
        acc = float(tp.sum() / cm.sum()) if cm.sum() else 0.0
    return {
        "accuracy": acc,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "support": gold_tot.tolist(),
        "macro_precision": macro(precision),
        "macro_recall": macro(recall),
        "macro_f1": macro(f1),
    }


@dataclass
class Metrics:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: list
    per_aspect: dict = field(default_factory=dict)
    n: int = 0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "confusion": self.confusion,
            "per_aspect": self.per_aspect,
        }


def evaluate(pred, gold, mask=None) -> Metrics:
    """Score aspect-level predictions.

    ``pred`` and ``gold`` are integer arrays (N, 4) of sentiment indices; only
    cells with ``mask == 1`` (annotated aspects) are counted. Pooled scores go
    over every annotated cell; ``per_aspect`` repeats them per aspect, with
    ``None`` for aspects that have no annotations.
    """
    pred, gold = np.asarray(pred), np.asarray(gold)
    if pred.shape != gold.shape:
        raise ValueError(f"length mismatch: predictions {pred.shape} vs gold {gold.shape}")
    mask = np.ones(gold.shape, dtype=bool) if mask is None else np.asarray(mask).astype(bool)
    if mask.shape != gold.shape:
        raise ValueError(f"mask {mask.shape} vs gold {gold.shape}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroSupportWarning)
        cm = confusion_matrix(gold[mask], pred[mask])
        pooled = scores_from_confusion(cm, warn=False)
        per_aspect = {}
        if gold.ndim == 2:
            for j, aspect in enumerate(ASPECTS[: gold.shape[1]]):
                sel = mask[:, j]
                if not sel.any():
                    per_aspect[aspect] = None
                    continue
                acm = confusion_matrix(gold[sel, j], pred[sel, j])
                s = scores_from_confusion(acm, warn=False)
                per_aspect[aspect] = {
                    "n": int(sel.sum()),
                    "accuracy": s["accuracy"],
                    "macro_f1": s["macro_f1"],
                    "macro_precision": s["macro_precision"],
                    "macro_recall": s["macro_recall"],
                    "confusion": acm.tolist(),
                }
    missing = [SENTIMENTS[c] for c, n in enumerate(pooled["support"]) if n == 0]
    if missing and cm.sum():
        warnings.warn(f"zero-support classes {missing} contribute 0 to macro averages",
                      ZeroSupportWarning, stacklevel=2)
    return Metrics(
        accuracy=pooled["accuracy"],
        macro_precision=pooled["macro_precision"],
        macro_recall=pooled["macro_recall"],
        macro_f1=pooled["macro_f1"],
        confusion=cm.tolist(),
        per_aspect=per_aspect,
        n=int(mask.sum()),
    )
