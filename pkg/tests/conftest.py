import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from aspectnet.data import Review

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixture_reviews():
    """The 3-row fixture used across data and CLI tests."""
    return [
        Review("f1", "পণ্যটি খুব ভালো মানের", (("Quality", "Positive"),), "Daraz"),
        Review("f2", "ডেলিভারি দেরি হয়েছে দাম বেশি", (("Service", "Negative"), ("Price", "Negative")), "Facebook"),
        Review("f3", "প্যাকেজিং সুন্দর দাম ঠিক আছে", (("Decoration", "Positive"), ("Price", "Neutral")), "Daraz"),
    ]


def make_tiny_ensemble(seed: int = 0, n: int = 40):
    """Random-init members on a small synthetic corpus: fast, deterministic, not trained."""
    from aspectnet.data import build_vocab, tokenize
    from aspectnet.encoders import COMPONENTS, ComponentModel, ModelConfig
    from aspectnet.ensemble import EnsembleWeights, HybridEnsemble, build_lexicon
    from aspectnet.transfer import SyntheticCorpus

    reviews = SyntheticCorpus(seed).generate(n, seed=seed + 1)
    vocab = build_vocab(tokenize(r.text) for r in reviews)
    members = {}
    for i, kind in enumerate(COMPONENTS):
        cfg = ModelConfig(kind, embed_dim=6, hidden=6, layers=1, heads=2, ff=8, max_len=32, dropout=0.0)
        members[kind] = ComponentModel(cfg, len(vocab), np.random.default_rng(seed * 10 + i)).eval()
    ens = HybridEnsemble(members, EnsembleWeights.uniform("static"), vocab, build_lexicon(reviews, min_count=1))
    return ens, reviews


@pytest.fixture
def tiny_ensemble():
    return make_tiny_ensemble()


# -- acceptance summary: one line per criterion, printed after the run ------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        n = int(report.nodeid.split("test_criterion_")[1].split("_")[0])
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[n] = ("PASS" if report.outcome == "passed" else report.outcome.upper(), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}".rstrip())
