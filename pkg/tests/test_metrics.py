import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aspectnet.metrics import ZeroSupportWarning, confusion_matrix, evaluate, scores_from_confusion

from oracles import GOLDEN_CONFUSION as GOLDEN
from oracles import macro_scores_exact


@pytest.mark.parametrize("cm,expected", GOLDEN)
def test_macro_scores_match_hand_values(cm, expected):
    with _maybe_zero_support(cm):
        got = scores_from_confusion(cm, exact=True)
    assert got["macro_precision"] == expected["precision"]
    assert got["macro_recall"] == expected["recall"]
    assert got["macro_f1"] == expected["f1"]
    assert got["accuracy"] == expected["accuracy"]
    assert macro_scores_exact(cm) == expected
    floats = scores_from_confusion(cm, warn=False)
    assert floats["macro_f1"] == pytest.approx(float(expected["f1"]), abs=1e-15)


def _maybe_zero_support(cm):
    import contextlib

    if any(sum(row) == 0 for row in cm):
        return pytest.warns(ZeroSupportWarning)
    return contextlib.nullcontext()


@given(st.lists(st.lists(st.integers(0, 30), min_size=3, max_size=3), min_size=3, max_size=3)
       .filter(lambda m: sum(map(sum, m)) > 0))
def test_exact_scores_match_oracle(cm):
    got = scores_from_confusion(cm, exact=True, warn=False)
    ref = macro_scores_exact(cm)
    assert (got["macro_precision"], got["macro_recall"], got["macro_f1"], got["accuracy"]) == (
        ref["precision"], ref["recall"], ref["f1"], ref["accuracy"])


@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=60))
def test_confusion_counts_pairs(pairs):
    gold, pred = zip(*pairs)
    cm = confusion_matrix(gold, pred)
    assert cm.sum() == len(pairs)
    assert cm[gold[0], pred[0]] >= 1


def test_evaluate_respects_mask_and_reports_per_aspect():
    gold = np.array([[0, 1, 2, 0], [1, 1, 0, 0]])
    pred = np.array([[0, 2, 2, 1], [1, 1, 0, 2]])
    mask = np.array([[1, 1, 1, 0], [1, 1, 0, 0]])
    m = evaluate(pred, gold, mask)
    assert m.n == 5
    assert m.accuracy == pytest.approx(4 / 5)
    assert m.per_aspect["Decoration"] is None
    assert m.per_aspect["Service"]["n"] == 2
    assert sum(map(sum, m.confusion)) == 5


def test_evaluate_rejects_length_mismatch():
    with pytest.raises(ValueError):
        evaluate(np.zeros((2, 4)), np.zeros((3, 4)))


def test_macro_f1_is_permutation_invariant(rng):
    gold = rng.integers(0, 3, size=50)
    pred = rng.integers(0, 3, size=50)
    perm = rng.permutation(50)
    a = scores_from_confusion(confusion_matrix(gold, pred))["macro_f1"]
    b = scores_from_confusion(confusion_matrix(gold[perm], pred[perm]))["macro_f1"]
    assert a == b
