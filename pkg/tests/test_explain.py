import json
import math
import warnings
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicdetect.errors import LowFidelity
from bicdetect.explain import (
    SUPPORTS_BUGGY,
    SUPPORTS_CLEAN,
    Explanation,
    RuleCondition,
    aggregate_conditions,
    conditions_markdown,
    explain_instance,
    write_explain_json,
)
from bicdetect.featurize import FeatureVocabulary


def threshold_model(X):
    X = X.toarray() if hasattr(X, "toarray") else np.asarray(X)
    return (X[:, 0] > 10).astype(float)


def _train(seed=0, n=200):
    rng = np.random.default_rng(seed)
    return np.column_stack([rng.uniform(0, 20, n), rng.uniform(0, 5, n)])


def test_threshold_recovered():
    X = _train()
    e = explain_instance(threshold_model, np.array([12.0, 2.0]), X, n_synthetic=400, seed=1)
    assert e.predicted == 1 and e.fidelity == 1.0
    r0 = [r for r in e.rules if r.column == 0]
    assert r0 and r0[0].direction == SUPPORTS_BUGGY
    assert abs(r0[0].lower - 10.0) <= 0.5


def test_clean_instance_supports_clean():
    e = explain_instance(threshold_model, np.array([4.0, 1.0]), _train(), n_synthetic=300, seed=2)
    assert e.predicted == 0
    assert e.rules and all(r.direction == SUPPORTS_CLEAN for r in e.rules)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 19.5), st.floats(0.1, 4.9), st.integers(0, 1000))
def test_rules_bracket_instance(v0, v1, seed):
    x = np.array([v0, v1])
    e = explain_instance(threshold_model, x, _train(seed % 7), n_synthetic=150, seed=seed)
    assert 0.0 <= e.fidelity <= 1.0
    for r in e.rules:
        assert r.holds(x[r.column])


def test_deterministic():
    X = _train(3)
    a = explain_instance(threshold_model, np.array([15.0, 3.0]), X, n_synthetic=200, seed=9)
    b = explain_instance(threshold_model, np.array([15.0, 3.0]), X, n_synthetic=200, seed=9)
    assert a.rules == b.rules and a.fidelity == b.fidelity


def test_low_fidelity_warns():
    rng = np.random.default_rng(0)

    def noisy(X):  # label flips at random, unlearnable for a depth-1 tree
        return rng.random(X.shape[0])

    with pytest.warns(LowFidelity):
        e = explain_instance(noisy, np.array([12.0, 2.0]), _train(), n_synthetic=200, seed=0,
                             max_depth=1, fidelity_floor=0.99)
    assert "low_fidelity" in e.flags


def test_condition_text():
    f = ("gs", "la")
    assert RuleCondition(0, f, 1.84, 15.32, SUPPORTS_BUGGY).text() == "1.84 < la <= 15.32"
    assert RuleCondition(0, f, 2.0, math.inf, SUPPORTS_BUGGY).text() == "la > 2.00"
    assert RuleCondition(0, f, -math.inf, 0.5, SUPPORTS_BUGGY).text() == "la <= 0.50"


def _exp(cid, feats, direction=SUPPORTS_BUGGY):
    rules = [RuleCondition(i, f, float(i), float(i + 1), direction) for i, f in enumerate(feats)]
    return Explanation(cid, rules, 1.0, 1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), unique=True, max_size=4), max_size=12))
def test_aggregate_matches_brute_force(bags):
    exps = [_exp(str(i), [("tp", n) for n in bag]) for i, bag in enumerate(bags)]
    agg = aggregate_conditions(exps, top_k=10)
    want = Counter(n for bag in bags for n in bag)
    got = {e["feature"][1]: e["frequency"] for e in agg.get("tp", [])}
    assert got == dict(want)
    freqs = [e["frequency"] for e in agg.get("tp", [])]
    assert freqs == sorted(freqs, reverse=True)


def test_aggregate_order_and_direction():
    exps = [_exp("1", [("tp", "switch"), ("tp", "do")]), _exp("2", [("tp", "switch"), ("tp", "do")]),
            _exp("3", [("tp", "switch")]), _exp("4", [("tp", "do")], SUPPORTS_CLEAN)]
    agg = aggregate_conditions(exps, top_k=5)
    assert [(e["feature"][1], e["frequency"], e["rank"]) for e in agg["tp"]] == [("switch", 3, 1), ("do", 2, 2)]
    md = conditions_markdown(agg)
    assert "| 1 | 0.00 < switch <= 1.00 | 3 |" in md


def test_json_writes_null_bounds(tmp_path):
    e = Explanation("c1", [RuleCondition(0, ("gs", "la"), -math.inf, 3.0, SUPPORTS_BUGGY)], 0.95, 1)
    write_explain_json([e], tmp_path / "x.json")
    doc = json.loads((tmp_path / "x.json").read_text())
    assert doc["c1"]["rules"][0]["lower"] is None and doc["c1"]["rules"][0]["upper"] == 3.0


def test_vocabulary_names_and_count_rounding():
    vocab = FeatureVocabulary([("gs", "la"), ("tp", "switch")])
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(0, 20, 100), rng.integers(0, 3, 100)])

    def model(M):
        M = M.toarray() if hasattr(M, "toarray") else M
        return (M[:, 1] >= 1).astype(float)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowFidelity)
        e = explain_instance(model, np.array([5.0, 2.0]), X, n_synthetic=200, vocabulary=vocab)
    assert any(r.feature == ("tp", "switch") for r in e.rules)
