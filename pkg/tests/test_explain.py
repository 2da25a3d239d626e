import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aspectnet.data import ASPECTS, encode_reviews
from aspectnet.explain import (
    MAX_EXACT_TOKENS,
    AlignmentError,
    AttributionUnavailable,
    DegeneratePerturbations,
    ExplainSettings,
    Explanation,
    MaskingPolicy,
    ShapleyError,
    all_coalitions,
    attention_attribution,
    ensemble_value_function,
    exact_shapley,
    explain_review,
    explanation_report,
    kernel_shap,
    lime_explain,
    load_report,
    masked_ids,
    model_value_function,
    perturbation_masks,
    render_text,
    report_json,
    token_positions,
    weighted_ridge,
)
from oracles import shapley_by_permutations


def random_token_model(n: int, seed: int):
    """Sigmoid of a random linear-plus-pairwise score over kept tokens."""
    rng = np.random.default_rng(seed)
    a = rng.normal(0, 1.0, n)
    c = np.triu(rng.normal(0, 0.5, (n, n)), 1)
    b = rng.normal()

    def fn(masks):
        z = np.asarray(masks, dtype=np.float64)
        return 1.0 / (1.0 + np.exp(-(b + z @ a + np.einsum("mi,ij,mj->m", z, c, z))))
    return fn


def table_game(values: dict[int, float], n: int):
    """Value function from an explicit table keyed by coalition bit code."""
    def fn(masks):
        codes = np.asarray(masks, dtype=np.int64) @ (1 << np.arange(n))
        return np.array([values[int(k)] for k in codes])
    return fn


# -- exact Shapley ----------------------------------------------------------------------


def test_all_coalitions_binary_order():
    m = all_coalitions(3)
    assert m.shape == (8, 3)
    for k, row in enumerate(m):
        assert sum(int(b) << i for i, b in enumerate(row)) == k


@pytest.mark.parametrize("seed", range(5))
def test_exact_matches_permutation_oracle(seed):
    n = 6
    fn = random_token_model(n, seed)
    phi = exact_shapley(fn, n).values
    np.testing.assert_allclose(phi, shapley_by_permutations(fn, n), atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_efficiency(seed):
    n = 8
    fn = random_token_model(n, seed)
    r = exact_shapley(fn, n)
    assert abs(r.values.sum() - (r.full_value - r.base_value)) <= 1e-9
    assert r.efficiency_gap <= 1e-9
    assert r.evaluations == 2 ** n


def test_symmetry_and_null_player():
    # players 0 and 1 interchangeable; player 3 contributes nothing
    n = 4
    rng = np.random.default_rng(7)
    base = {}
    for code in range(2 ** n):
        bits = [(code >> i) & 1 for i in range(n)]
        key = (bits[0] + bits[1], bits[2])
        base.setdefault(key, rng.normal())
    values = {code: base[(((code >> 0) & 1) + ((code >> 1) & 1), (code >> 2) & 1)] for code in range(2 ** n)}
    phi = exact_shapley(table_game(values, n), n).values
    assert abs(phi[0] - phi[1]) <= 1e-9
    assert abs(phi[3]) <= 1e-9


@given(st.integers(1, 7), st.integers(0, 2 ** 31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(n, seed, alpha, beta):
    f, g = random_token_model(n, seed), random_token_model(n, seed + 1)
    h = lambda m: alpha * f(m) + beta * g(m)  # noqa: E731
    lhs = exact_shapley(h, n).values
    rhs = alpha * exact_shapley(f, n).values + beta * exact_shapley(g, n).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_additive_game_recovers_weights():
    w = np.array([0.3, -1.2, 0.0, 2.5, 0.7])
    r = exact_shapley(lambda m: np.asarray(m, float) @ w + 4.0, 5)
    np.testing.assert_allclose(r.values, w, atol=1e-12)
    assert r.base_value == pytest.approx(4.0)


def test_exact_enumeration_limit():
    with pytest.raises(ShapleyError):
        exact_shapley(lambda m: np.zeros(len(m)), MAX_EXACT_TOKENS + 1)
    r = exact_shapley(lambda m: np.full(len(m), 0.25), 0)
    assert r.values.shape == (0,) and r.base_value == 0.25


def test_exact_rejects_wrong_value_shape():
    with pytest.raises(ShapleyError):
        exact_shapley(lambda m: np.zeros((len(m), 2)), 3)


# -- KernelSHAP -------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_kernel_shap_close_to_exact_n10(seed):
    n = 10
    fn = random_token_model(n, 100 + seed)
    exact = exact_shapley(fn, n).values
    approx = kernel_shap(fn, n, budget=4000, seed=seed).values
    assert np.max(np.abs(approx - exact)) < 0.01


@pytest.mark.parametrize("seed", range(3))
def test_kernel_shap_sampling_regime_n14(seed):
    # 4000 < 2^14 - 2, so the larger sizes are sampled rather than enumerated
    n = 14
    fn = random_token_model(n, 200 + seed)
    exact = exact_shapley(fn, n).values
    r = kernel_shap(fn, n, budget=4000, seed=seed)
    assert r.evaluations <= 2 * 4000 + 2
    assert np.max(np.abs(r.values - exact)) < 0.01


@pytest.mark.parametrize("n", [2, 5, 9])
def test_kernel_shap_efficiency_exact(n):
    fn = random_token_model(n, n)
    r = kernel_shap(fn, n, budget=2 * n + 2, seed=0)
    assert abs(r.values.sum() - (r.full_value - r.base_value)) <= 1e-9


def test_kernel_shap_full_budget_is_exact():
    n = 7
    fn = random_token_model(n, 3)
    np.testing.assert_allclose(kernel_shap(fn, n, budget=10 ** 4).values, exact_shapley(fn, n).values, atol=1e-10)


def test_kernel_shap_deterministic_per_seed():
    n = 14
    fn = random_token_model(n, 9)
    a = kernel_shap(fn, n, 500, seed=4).values
    b = kernel_shap(fn, n, 500, seed=4).values
    assert np.array_equal(a, b)


def test_kernel_shap_budget_floor_and_single_token():
    with pytest.raises(ShapleyError):
        kernel_shap(random_token_model(5, 0), 5, budget=11)
    r = kernel_shap(lambda m: np.asarray(m, float)[:, 0] * 3.0, 1, budget=4)
    assert r.values.tolist() == [3.0]


# -- LIME -------------------------------------------------------------------------------


def test_perturbation_masks_contract(rng):
    m = perturbation_masks(8, 200, rng)
    assert m.shape == (200, 8)
    assert m[0].all()
    assert not m[1:].all(axis=1).any()
    full = perturbation_masks(3, 100, rng)
    assert len(full) == 8 and full[0].all() and len(np.unique(full, axis=0)) == 8


def test_lime_recovers_linear_model():
    w = np.array([0.5, -0.8, 0.0, 1.1, 0.2, -0.3])
    r = lime_explain(lambda m: np.asarray(m, float) @ w + 0.1, 6, num_samples=400, alpha=1e-9)
    np.testing.assert_allclose(r.coefficients, w, atol=1e-6)
    assert r.intercept == pytest.approx(0.1, abs=1e-6)
    assert r.r2 == pytest.approx(1.0)


def test_lime_feature_selection_keeps_largest():
    w = np.array([0.05, -2.0, 0.01, 1.5, 0.02])
    r = lime_explain(lambda m: np.asarray(m, float) @ w, 5, num_samples=200, num_features=2, alpha=1e-9)
    assert r.selected.tolist() == [1, 3]
    assert np.count_nonzero(r.coefficients) == 2
    with pytest.raises(ValueError):
        lime_explain(lambda m: np.zeros(len(m)), 5, num_features=6)


def test_lime_degenerate_single_sample():
    with pytest.raises(DegeneratePerturbations):
        lime_explain(lambda m: np.zeros(len(m)), 4, num_samples=1)


def test_weighted_ridge_matches_normal_equations(rng):
    X = rng.normal(size=(50, 4))
    y = rng.normal(size=50)
    w = rng.uniform(0.1, 2.0, 50)
    alpha = 0.3
    coef, b = weighted_ridge(X, y, w, alpha)
    # brute force: minimize sum w (y - Xc - b)^2 + alpha |c|^2 over [c, b] jointly
    Xa = np.hstack([X, np.ones((50, 1))])
    P = np.diag([alpha] * 4 + [0.0])
    sol = np.linalg.solve(Xa.T @ (Xa * w[:, None]) + P, Xa.T @ (w * y))
    np.testing.assert_allclose(coef, sol[:4], atol=1e-10)
    assert b == pytest.approx(sol[4], abs=1e-10)


def test_lime_seeded():
    fn = random_token_model(9, 2)
    a = lime_explain(fn, 9, 300, seed=5)
    b = lime_explain(fn, 9, 300, seed=5)
    assert np.array_equal(a.coefficients, b.coefficients)


# -- attention --------------------------------------------------------------------------


def test_attention_pooled_query_renormalized(rng):
    T = 5
    att = rng.uniform(size=(2, 3, T, T))
    att /= att.sum(axis=-1, keepdims=True)
    mask = np.array([1, 1, 1, 0, 0], bool)
    s = attention_attribution(att, mask)
    expected = att[-1].mean(axis=0)[:3].mean(axis=0)[:3]
    np.testing.assert_allclose(s, expected / expected.sum())
    assert s.sum() == pytest.approx(1.0)
    s0 = attention_attribution(list(att), mask, layer=0)
    assert s0.shape == (3,)


def test_attention_unavailable_and_bad_shape():
    with pytest.raises(AttributionUnavailable):
        attention_attribution(None, np.ones(3, bool))
    with pytest.raises(ValueError):
        attention_attribution(np.ones((3, 3)), np.ones(3, bool))
    with pytest.raises(ValueError):
        attention_attribution(np.ones((1, 1, 3, 3)), np.zeros(3, bool))


# -- value functions --------------------------------------------------------------------


def test_masked_ids_keeps_length_and_positions():
    ids = np.array([5, 7, 9, 0, 0])
    np.testing.assert_array_equal(token_positions(ids), [0, 1, 2])
    masks = np.array([[1, 0, 1], [0, 0, 0]], bool)
    np.testing.assert_array_equal(masked_ids(ids, masks, MaskingPolicy("PAD")), [[5, 0, 9, 0, 0], [0, 0, 0, 0, 0]])
    np.testing.assert_array_equal(masked_ids(ids, masks, MaskingPolicy("UNK"))[0], [5, 1, 9, 0, 0])
    with pytest.raises(ValueError):
        masked_ids(ids, np.ones((1, 4), bool), MaskingPolicy())
    with pytest.raises(ValueError):
        MaskingPolicy("MASK")


def test_model_value_function_full_mask_is_prediction(tiny_ensemble):
    ens, reviews = tiny_ensemble
    data = encode_reviews(reviews[:1], ens.vocab, ens.max_len)
    model = ens.components["gru"]
    n = len(token_positions(data.ids[0]))
    fn = model_value_function(model, data.ids[0], "Price", "Positive")
    full = fn(np.ones((1, n), bool))[0]
    assert full == pytest.approx(model.predict(data.ids[:1]).probs[0, _aspect("Price"), _cls("Positive")])
    empty = fn(np.zeros((1, n), bool))[0]
    assert 0.0 < empty < 1.0


def _aspect(name):
    from aspectnet.data import ASPECTS
    return ASPECTS.index(name)


def _cls(name):
    from aspectnet.data import SENTIMENTS
    return SENTIMENTS.index(name)


def test_ensemble_value_function_is_weighted_member_mix(tiny_ensemble):
    ens, reviews = tiny_ensemble
    data = encode_reviews(reviews[:1], ens.vocab, ens.max_len)
    ids = data.ids[0]
    n = len(token_positions(ids))
    coef = np.array([0.4, 0.3, 0.2, 0.1])
    fn = ensemble_value_function(ens, ids, coef, "Quality", "Negative")
    rng = np.random.default_rng(0)
    masks = rng.random((6, n)) < 0.5
    mix = sum(c * model_value_function(ens.components[k], ids, "Quality", "Negative")(masks)
              for c, k in zip(coef, ens.order))
    np.testing.assert_allclose(fn(masks), mix, atol=1e-12)


# -- reports ----------------------------------------------------------------------------


def test_explanation_alignment_checks():
    with pytest.raises(AlignmentError):
        Explanation("KernelSHAP", "Price", "Positive", ["a", "b"], [0.1])
    with pytest.raises(ValueError):
        Explanation("Gradient", "Price", "Positive", ["a"], [0.1])
    a = Explanation("KernelSHAP", "Price", "Positive", ["a", "b"], [0.1, 0.2])
    b = Explanation("Attention", "Price", "Positive", ["a", "c"], [0.5, 0.5])
    with pytest.raises(AlignmentError):
        explanation_report({"id": "x"}, [a, b])
    with pytest.raises(ValueError):
        explanation_report({"id": "x"}, [])


@pytest.fixture
def explained(tiny_ensemble):
    ens, reviews = tiny_ensemble
    review = next(r for r in reviews if 3 <= len(r.text.split()) <= 10)
    settings = ExplainSettings(shap_budget=4000, lime_samples=300, seed=3)
    return ens, review, settings, explain_review(ens, review, settings=settings)


def test_explain_review_report_contents(explained):
    ens, review, settings, report = explained
    methods = [e["method"] for e in report["explanations"]]
    assert methods == ["ExactShapley", "KernelSHAP", "LIMESurrogate", "Attention"]
    by = {e["method"]: e for e in report["explanations"]}
    exact = by["ExactShapley"]
    n = len(report["tokens"])
    assert exact["meta"]["evaluations"] == 2 ** n
    gap = sum(exact["scores"]) - (exact["meta"]["full_value"] - exact["base_value"])
    assert abs(gap) <= 1e-9
    assert np.max(np.abs(np.subtract(by["KernelSHAP"]["scores"], exact["scores"]))) < 0.01
    assert sum(by["Attention"]["scores"]) == pytest.approx(1.0)
    assert report["instance"]["id"] == review.id
    assert [d["aspect"] for d in report["decisions"]] == list(ASPECTS)
    assert {e["aspect"] for e in report["explanations"]} == {review.annotations[0][0]}


def test_report_round_trip_and_determinism(explained):
    ens, review, settings, report = explained
    text = report_json(report)
    loaded, exps = load_report(text)
    assert loaded == json.loads(text)
    assert [e.method for e in exps] == [e["method"] for e in report["explanations"]]
    assert report_json(explain_review(ens, review, settings=settings)) == text


def test_render_text_rows(explained):
    _, _, _, report = explained
    out = render_text(report)
    lines = out.splitlines()
    header = next(i for i, l in enumerate(lines) if l.startswith("token"))
    for i, tok in enumerate(report["tokens"]):
        assert lines[header + 2 + i].startswith(tok)
    assert out.endswith("\n")
    for e in report["explanations"]:
        assert f"{e['method']}: aspect=" in out


def test_load_report_rejects_bad_schema(explained):
    _, _, _, report = explained
    bad = json.loads(report_json(report))
    bad["explanations"][0]["method"] = "Saliency"
    import jsonschema
    with pytest.raises(jsonschema.ValidationError):
        load_report(json.dumps(bad))


def test_explain_skips_exact_above_limit(tiny_ensemble):
    from aspectnet.data import Review
    ens, reviews = tiny_ensemble
    words = [w for r in reviews for w in r.text.split()]
    long = Review("long", " ".join(words[:MAX_EXACT_TOKENS + 2]), (("Price", "Positive"),), "Daraz")
    settings = ExplainSettings(methods=("ExactShapley", "KernelSHAP"), shap_budget=600)
    report = explain_review(ens, long, settings=settings)
    assert [e["method"] for e in report["explanations"]] == ["KernelSHAP"]

