from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aspectnet.data import encode_reviews
from aspectnet.encoders import ModelPrediction
from aspectnet.ensemble import (
    ABLATION_CONFIGS,
    AspectDecision,
    CalibrationState,
    EnsembleWeights,
    InputFeatures,
    SimplexError,
    ablate,
    ablation_csv,
    addressed_f1,
    build_lexicon,
    check_simplex,
    combine,
    correlation_matrix,
    decide,
    ensemble_objective,
    fit_temperature,
    learn_weights,
    length_bucket,
    load_ensemble,
    nll,
    renormalized,
    save_ensemble,
    search_threshold,
)
from aspectnet.ensemble.weights import PUBLISHED_BUCKET_WEIGHTS
from aspectnet.gradcore import Tensor
from aspectnet.metrics import evaluate


def _probs(rng, k=4, n=6):
    z = rng.normal(size=(k, n, 4, 3)) * 2
    return np.exp(z) / np.exp(z).sum(-1, keepdims=True)


def _preds(P):
    return [ModelPrediction.from_probs(p) for p in P]


def test_combine_worked_example_in_exact_arithmetic():
    w = [Fraction(25, 100), Fraction(30, 100), Fraction(25, 100), Fraction(20, 100)]
    p = [Fraction(8, 10), Fraction(6, 10), Fraction(7, 10), Fraction(5, 10)]
    exact = sum(a * b for a, b in zip(w, p))
    assert exact == Fraction(655, 1000)
    probs = np.zeros((4, 1, 4, 3))
    probs[:, 0, :, 0] = np.array([0.8, 0.6, 0.7, 0.5])[:, None]
    probs[:, 0, :, 1] = 1 - probs[:, 0, :, 0]
    out = combine(_preds(probs), [0.25, 0.30, 0.25, 0.20])
    assert out.probs[0, 0, 0] == pytest.approx(float(exact), abs=1e-15)


@pytest.mark.parametrize("k", range(4))
def test_one_hot_weights_return_the_component_exactly(k, rng):
    P = _probs(rng)
    w = np.eye(4)[k]
    np.testing.assert_array_equal(combine(_preds(P), w).probs, P[k])


@given(st.integers(0, 2**31), st.floats(0, 1))
def test_combination_is_affine_in_weights(seed, t):
    rng = np.random.default_rng(seed)
    P = _probs(rng)
    a, b = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
    mixed = combine(_preds(P), t * a + (1 - t) * b).probs
    parts = t * combine(_preds(P), a).probs + (1 - t) * combine(_preds(P), b).probs
    assert np.max(np.abs(mixed - parts)) <= 1e-12


def test_per_sample_weights_broadcast(rng):
    P = _probs(rng, n=3)
    W = rng.dirichlet(np.ones(4), size=3)
    out = combine(_preds(P), W).probs
    for i in range(3):
        np.testing.assert_allclose(out[i], np.tensordot(W[i], P[:, i], axes=1), atol=1e-15)


def test_combine_rejects_off_simplex_weights(rng):
    P = _probs(rng)
    with pytest.raises(SimplexError):
        combine(_preds(P), [0.5, 0.5, 0.5, -0.5])
    with pytest.raises(ValueError):
        combine(_preds(P), [0.5, 0.5])


def test_logit_space_combination_is_normalized(rng):
    out = combine(_preds(_probs(rng)), [0.1, 0.2, 0.3, 0.4], space="logit")
    np.testing.assert_allclose(out.probs.sum(-1), 1.0, atol=1e-12)


@pytest.mark.parametrize("mode", ["static", "bucketed", "gated"])
def test_learning_keeps_weights_on_simplex_and_descends(mode, rng):
    P = _probs(rng, n=40)
    labels = rng.integers(0, 3, size=(40, 4))
    mask = (rng.random((40, 4)) < 0.6).astype(float)
    feats = InputFeatures(rng.integers(1, 30, size=40).astype(float), rng.random(40), rng.normal(size=40))
    w = learn_weights(_preds(P), labels, mask, 0.1, mode, feats, steps=40, seed=1)
    assert len(w.trace) == 41
    assert w.trace[-1] < w.trace[0]
    check_simplex(w.per_sample(feats, 40))


def test_learning_prefers_the_informative_member(rng):
    n = 80
    labels = rng.integers(0, 3, size=(n, 4))
    good = np.eye(3)[labels] * 0.9 + 0.1 / 3
    noise = [np.exp(z) / np.exp(z).sum(-1, keepdims=True) for z in rng.normal(size=(3, n, 4, 3))]
    P = np.stack([noise[0], good, noise[1], noise[2]])
    w = learn_weights(_preds(P), labels, np.ones((n, 4)), 0.0, "static", steps=300, shrinkage=0.0)
    assert np.argmax(w.coefficients()) == 1
    assert w.coefficients()[1] > 0.9


def test_zero_diversity_objective_is_plain_cross_entropy(rng):
    P = _probs(rng, n=10)
    labels = rng.integers(0, 3, size=(10, 4))
    mask = np.ones((10, 4))
    c = rng.dirichlet(np.ones(4))
    w = EnsembleWeights.from_coefficients(c)
    params = {k: Tensor(v) for k, v in w.params.items()}
    obj, ce, _ = ensemble_objective(w, params, P, labels, mask, 0.0, None)
    mix = np.tensordot(c, P, axes=1)
    expected = -np.log(np.take_along_axis(mix, labels[..., None], -1)).mean()
    assert obj.item() == pytest.approx(expected, rel=1e-12)
    assert ce.item() == pytest.approx(expected, rel=1e-12)


def test_diversity_term_matches_pairwise_sum(rng):
    P = _probs(rng, n=10)
    mask = np.ones((10, 4))
    rho = correlation_matrix(P, mask)
    c = rng.dirichlet(np.ones(4))
    w = EnsembleWeights.from_coefficients(c)
    _, _, div = ensemble_objective(w, {k: Tensor(v) for k, v in w.params.items()}, P,
                                   np.zeros((10, 4), dtype=int), mask, 0.3, None)
    ref = sum(c[i] * c[j] * (1 - rho[i, j]) for i in range(4) for j in range(4) if i != j)
    assert div.item() == pytest.approx(ref, rel=1e-12)
    np.testing.assert_allclose(np.diag(rho), 1.0)


def test_published_weight_table_is_on_simplex():
    check_simplex(PUBLISHED_BUCKET_WEIGHTS)
    w = EnsembleWeights.published()
    np.testing.assert_allclose(w.coefficients(InputFeatures(np.array([5.0, 15.0, 25.0]), np.zeros(3),
                                                            np.zeros(3))), PUBLISHED_BUCKET_WEIGHTS, atol=1e-12)
    assert w.table_csv().splitlines()[1] == "short,0.250000,0.300000,0.250000,0.200000"


@pytest.mark.parametrize("n,bucket", [(0, "short"), (9, "short"), (10, "medium"), (20, "medium"), (21, "long")])
def test_length_buckets(n, bucket):
    assert length_bucket(n) == bucket


def test_weights_serialize(rng):
    w = EnsembleWeights.uniform("gated", rng=rng)
    back = EnsembleWeights.from_dict(w.to_dict())
    feats = InputFeatures(np.array([3.0, 30.0]), np.array([0.1, 0.5]), np.array([0.0, -1.0]))
    np.testing.assert_array_equal(back.coefficients(feats, 2), w.coefficients(feats, 2))


# -- calibration -----------------------------------------------------------------


@pytest.mark.parametrize("seed", range(50))
def test_temperature_never_increases_nll(seed):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(30, 4, 3)) * rng.uniform(0.1, 10)
    labels = rng.integers(0, 3, size=(30, 4))
    mask = (rng.random((30, 4)) < 0.7).astype(float)
    mask[0, 0] = 1
    state = fit_temperature(logits, labels, mask)
    assert state.nll_after <= state.nll_before
    assert nll(logits, labels, mask, state.temperature) <= nll(logits, labels, mask) + 1e-15


def test_temperature_recovers_overconfidence():
    rng = np.random.default_rng(0)
    true_logits = rng.normal(size=(3000, 4, 3))
    p = np.exp(true_logits) / np.exp(true_logits).sum(-1, keepdims=True)
    labels = (rng.random((3000, 4, 1)) > p.cumsum(-1)).sum(-1)
    state = fit_temperature(true_logits * 10, labels, np.ones((3000, 4)))
    assert abs(state.temperature - 10) / 10 < 0.1


def test_temperature_preserves_argmax(rng):
    logits = rng.normal(size=(20, 4, 3))
    scaled = CalibrationState(3.7).apply(logits)
    np.testing.assert_array_equal(logits.argmax(-1), scaled.argmax(-1))
    with pytest.raises(ValueError):
        CalibrationState(0.0).apply(logits)


# -- decisions -------------------------------------------------------------------


def test_decision_threshold_and_tie_order():
    probs = np.array([[0.4, 0.4, 0.2], [0.2, 0.5, 0.3], [0.1, 0.1, 0.8], [1 / 3, 1 / 3, 1 / 3]])
    d = decide(probs)
    assert d[0] == AspectDecision("Quality", False, "Positive", 0.4)
    assert d[1].addressed and d[1].sentiment == "Negative"
    assert d[2].sentiment == "Neutral"
    assert d[3].sentiment == "Positive"
    with pytest.raises(ValueError):
        decide(probs[:3])


def test_threshold_search_prefers_smaller_on_ties():
    probs = np.full((2, 4, 3), 1 / 3)
    probs[..., 0] = 0.9
    probs[..., 1:] = 0.05
    best, scores = search_threshold(probs, np.ones((2, 4)))
    assert best == 0.3 and scores[0.7] == 1.0
    assert addressed_f1(probs, np.zeros((2, 4)), 0.95) == 0.0


# -- hybrid ensemble, ablation, persistence ---------------------------------------


def test_ablation_of_nothing_is_the_full_ensemble(tiny_ensemble):
    ens, reviews = tiny_ensemble
    data = encode_reviews(reviews, ens.vocab, ens.max_len)
    rows = ablate(ens, data)
    full = evaluate(ens.predict(data).labels(), data.labels, data.mask)
    assert rows[0].configuration == "Full ensemble" and rows[0].excluded == ()
    assert rows[0].metrics == full
    assert [r.configuration for r in rows] == [c for c, _ in ABLATION_CONFIGS]
    assert ablation_csv(rows).startswith("configuration,accuracy,precision,recall,f1\n")


def test_ablation_renormalizes_remaining_weights():
    w = EnsembleWeights.from_coefficients([0.4, 0.3, 0.2, 0.1])
    keep, c = renormalized(w, None, 1, ["transformer"])
    assert keep == ["bilstm", "lstm", "gru"]
    np.testing.assert_allclose(c, [0.5, 1 / 3, 1 / 6])
    with pytest.raises(ValueError):
        renormalized(w, None, 1, ["transformer", "bilstm", "lstm", "gru"])
    with pytest.raises(ValueError):
        renormalized(w, None, 1, ["cnn"])


def test_ensemble_round_trips_through_disk(tiny_ensemble, tmp_path):
    ens, reviews = tiny_ensemble
    ens.weights = EnsembleWeights.from_coefficients([0.1, 0.2, 0.3, 0.4])
    ens.calibration = CalibrationState(1.7, 0.9, 0.8)
    data = encode_reviews(reviews, ens.vocab, ens.max_len)
    first = save_ensemble(ens, tmp_path)
    back = load_ensemble(tmp_path)
    np.testing.assert_array_equal(back.predict(data).probs, ens.predict(data).probs)
    assert save_ensemble(back, tmp_path / "again") == first


def test_parallel_member_predictions_match_serial(tiny_ensemble):
    ens, reviews = tiny_ensemble
    data = encode_reviews(reviews, ens.vocab, ens.max_len)
    a, b = ens.component_predictions(data), ens.component_predictions(data, jobs=3)
    for k in a:
        np.testing.assert_array_equal(a[k].probs, b[k].probs)


def test_lexicon_signs(fixture_reviews):
    lex = build_lexicon(fixture_reviews * 3, min_count=1, threshold=0.5)
    assert lex.get("ভালো") == 1.0
    assert lex.get("দেরি") == -1.0
