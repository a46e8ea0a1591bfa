import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from bicdetect.errors import DegenerateLabels, NonFiniteFeature, ShapeMismatch, ValidationError
from bicdetect.learn import (
    ClassifierSpec,
    fit,
    fit_tree,
    load_external_predictions,
    load_model,
    predict,
    predict_proba,
    save_model,
    tree_predict,
)

KINDS = ("rf", "knn", "gbc", "pct")
FAST = {"rf": "rf:n_trees=25", "knn": "knn", "gbc": "gbc:n_stages=20", "pct": "pct:epochs=200"}


def _spec(kind, seed=7):
    return ClassifierSpec.parse(FAST[kind], seed)


def _separable(rng, n=20):
    X = rng.uniform(0, 10, size=(n, 2))
    y = (X[:, 0] > 5).astype(int)
    if y.min() == y.max():
        y[0] = 1 - y[0]
        X[0, 0] = 9.0 if y[0] else 1.0
    return X, y


def _best_stump_accuracy(X, y):
    """Exhaustive oracle: best single-threshold accuracy over all features."""
    best = 0.0
    for j in range(X.shape[1]):
        for t in np.unique(X[:, j]):
            pred = (X[:, j] > t).astype(int)
            best = max(best, (pred == y).mean(), (1 - pred == y).mean())
    return best


def test_spec_defaults_and_parse():
    s = ClassifierSpec("rf")
    assert s.params["n_trees"] == 100 and s.params["max_depth"] is None and s.params["min_leaf"] == 1
    assert ClassifierSpec("knn").params == {"k": 5, "distance": "euclidean"}
    assert ClassifierSpec("gbc").params == {"n_stages": 100, "learning_rate": 0.1, "max_depth": 3}
    assert ClassifierSpec("pct").params == {"epochs": 1000, "learning_rate": 1.0}
    p = ClassifierSpec.parse("rf:n_trees=50,max_depth=8", seed=3)
    assert p.params["n_trees"] == 50 and p.params["max_depth"] == 8 and p.seed == 3
    assert ClassifierSpec.from_dict(p.to_dict()) == p


@pytest.mark.parametrize("bad", ["svm", "rf:n_trees=0", "gbc:learning_rate=0", "knn:distance=manhattan",
                                 "rf:depth=3"])
def test_spec_validation(bad):
    with pytest.raises(ValidationError):
        ClassifierSpec.parse(bad)


def test_rf_separable_training_accuracy(rng):
    X, y = _separable(rng)
    assert _best_stump_accuracy(X, y) == 1.0
    model = fit(_spec("rf"), X, y)
    assert (predict(model, X) == y).all()


@pytest.mark.parametrize("kind", KINDS)
def test_constant_features_predict_majority(kind):
    X = np.ones((9, 3))
    y = np.array([1, 1, 1, 1, 1, 0, 0, 0, 0])
    assert (predict(fit(_spec(kind), X, y), X) == 1).all()


@pytest.mark.parametrize("kind", KINDS)
def test_determinism(kind, rng):
    X = rng.poisson(1.0, size=(60, 8)).astype(float)
    y = (X[:, 0] + rng.random(60) > 1.2).astype(int)
    Xh = rng.poisson(1.0, size=(30, 8)).astype(float)
    a = predict_proba(fit(_spec(kind), X, y), Xh)
    b = predict_proba(fit(_spec(kind), X, y), Xh)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("kind", KINDS)
def test_predict_matches_threshold(kind, rng):
    X = sp.random(50, 12, density=0.3, random_state=3, format="csr")
    y = (np.asarray(X[:, 0].todense()).ravel() > 0).astype(int)
    y[:2] = [0, 1]
    model = fit(_spec(kind), X, y)
    p = predict_proba(model, X)
    assert ((p >= 0) & (p <= 1)).all()
    assert np.array_equal(predict(model, X), (p >= 0.5).astype(int))


def test_rf_unanimous_vote_is_exact(rng):
    y = np.tile([0, 1], 10)
    x = np.where(y == 1, rng.uniform(7, 10, 20), rng.uniform(0, 3, 20))
    X = np.column_stack([x, x])  # wide gap between classes: every tree splits inside it
    p = predict_proba(fit(ClassifierSpec.parse("rf:n_trees=15,max_features=all"), X, y), X)
    assert set(np.unique(p)) <= {0.0, 1.0}


def test_knn_k1_returns_own_label(rng):
    X = rng.uniform(size=(15, 3))
    y = rng.integers(0, 2, 15)
    y[:2] = [0, 1]
    p = predict_proba(fit(ClassifierSpec.parse("knn:k=1"), X, y), X)
    assert np.array_equal(p, y.astype(float))


def test_tie_goes_to_class_one():
    X = np.array([[0.0], [2.0]])
    y = np.array([0, 1])
    model = fit(ClassifierSpec.parse("knn:k=2"), X, y)
    assert predict_proba(model, np.array([[1.0]]))[0] == 0.5
    assert predict(model, np.array([[1.0]]))[0] == 1


def test_knn_cosine(rng):
    X = np.array([[1.0, 0.0], [5.0, 0.1], [0.0, 1.0], [0.1, 4.0]])
    y = np.array([0, 0, 1, 1])
    m = fit(ClassifierSpec.parse("knn:k=1,distance=cosine"), X, y)
    assert predict(m, np.array([[100.0, 1.0], [0.0, 0.02]])).tolist() == [0, 1]


def _walk(tree, x):
    node = 0
    while tree["feature"][node] >= 0:
        node = tree["left"][node] if x[tree["feature"][node]] <= tree["threshold"][node] else tree["right"][node]
    return tree["value"][node]


def test_hand_built_tree_evaluation(rng):
    tree = {
        "feature": np.array([0, 1, -1, -1, -1]),
        "threshold": np.array([2.5, 1.0, 0.0, 0.0, 0.0]),
        "left": np.array([1, 3, -1, -1, -1]),
        "right": np.array([2, 4, -1, -1, -1]),
        "value": np.array([0.5, 0.5, 1.0, 0.0, 0.75]),
    }
    X = rng.uniform(0, 5, size=(40, 2))
    X[:3] = [[2.5, 1.0], [2.5, 1.1], [2.6, 0.0]]
    assert np.array_equal(tree_predict(tree, X), [_walk(tree, x) for x in X])


def test_fit_tree_agrees_with_manual_walk(rng):
    X = rng.integers(0, 4, size=(60, 3)).astype(float)
    y = ((X[:, 0] > 1) ^ (X[:, 2] > 2)).astype(float)
    t = fit_tree(X, y, max_depth=2)
    assert np.array_equal(tree_predict(t, X), [_walk(t, x) for x in X])


def _sse_stump(X, y):
    best = (np.inf, None, None)
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        for a, b in zip(vals[:-1], vals[1:]):
            left = X[:, j] <= (a + b) / 2
            sse = ((y[left] - y[left].mean()) ** 2).sum() + ((y[~left] - y[~left].mean()) ** 2).sum()
            if sse < best[0] - 1e-12:
                best = (sse, j, (a + b) / 2)
    return best


def test_gbc_single_stump_equals_stump_oracle(rng):
    X = rng.integers(0, 6, size=(40, 3)).astype(float)
    y = ((X[:, 1] >= 3) ^ (rng.random(40) < 0.15)).astype(int)
    model = fit(ClassifierSpec.parse("gbc:n_stages=1,max_depth=1,learning_rate=1.0"), X, y)
    _, j, t = _sse_stump(X, y)
    assert model.state["feature"][0, 0] == j
    assert model.state["threshold"][0, 0] == pytest.approx(t)
    stump = (X[:, j] > t)
    p = predict_proba(model, X)
    # one prediction per side of the split
    assert len(np.unique(p[stump])) == 1 and len(np.unique(p[~stump])) == 1


def test_perceptron_converges_on_margin_data(rng):
    w = np.array([1.0, -2.0, 0.5])
    X = rng.uniform(-1, 1, size=(80, 3))
    m = X @ w / np.linalg.norm(w)
    X = X[np.abs(m) >= 0.1]
    y = (X @ w > 0).astype(int)
    model = fit(ClassifierSpec.parse("pct:epochs=1000"), X, y)
    assert (predict(model, X) == y).all()


def test_rf_importances(rng):
    wins = 0
    for seed in range(10):
        r = np.random.default_rng(seed)
        X = r.integers(0, 3, size=(200, 3)).astype(float)
        y = (X[:, 0] >= 1).astype(int)
        model = fit(ClassifierSpec.parse("rf:n_trees=30", seed), X, y)
        imp = model.importances
        assert imp.shape == (3,) and (imp >= 0).all() and imp.sum() == pytest.approx(1.0)
        wins += int(np.argmax(imp) == 0)
    assert wins >= 9


def test_gbc_importances_sum_to_one(rng):
    X = rng.uniform(size=(40, 4))
    y = (X[:, 2] > 0.5).astype(int)
    imp = fit(_spec("gbc"), X, y).importances
    assert imp.sum() == pytest.approx(1.0) and np.argmax(imp) == 2


def test_knn_pct_have_no_importances(rng):
    X, y = _separable(rng)
    assert fit(_spec("knn"), X, y).importances is None
    assert fit(_spec("pct"), X, y).importances is None


def test_fit_errors():
    X = np.zeros((4, 2))
    with pytest.raises(DegenerateLabels):
        fit(ClassifierSpec("rf"), X, [1, 1, 1, 1])
    with pytest.raises(NonFiniteFeature):
        fit(ClassifierSpec("rf"), np.array([[np.nan, 0], [1, 1], [0, 0], [1, 0]]), [0, 1, 0, 1])
    with pytest.raises(ShapeMismatch):
        fit(ClassifierSpec("rf"), X, [0, 1])
    model = fit(ClassifierSpec.parse("rf:n_trees=3"), np.eye(4), [0, 1, 0, 1])
    with pytest.raises(ShapeMismatch):
        predict_proba(model, np.zeros((2, 3)))


@pytest.mark.parametrize("kind", KINDS)
def test_save_load_round_trip(kind, tmp_path, rng):
    X = sp.random(40, 6, density=0.4, random_state=1, format="csr")
    y = rng.integers(0, 2, 40)
    y[:2] = [0, 1]
    model = fit(_spec(kind), X, y)
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back.spec == model.spec
    assert np.array_equal(predict_proba(back, X), predict_proba(model, X))


def test_external_predictions(tmp_path):
    p = tmp_path / "pred.csv"
    p.write_text("commit_id,proba\na,0.2\nb,0.9\n")
    assert load_external_predictions(p, ["b", "a"]).tolist() == [0.9, 0.2]
    p.write_text("commit_id,proba\na,1.5\n")
    with pytest.raises(Exception):
        load_external_predictions(p)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_rf_seed_changes_nothing_about_validity(seed):
    r = np.random.default_rng(seed)
    X = r.integers(0, 3, size=(30, 4)).astype(float)
    y = r.integers(0, 2, 30)
    y[:2] = [0, 1]
    model = fit(ClassifierSpec.parse("rf:n_trees=5", seed % 1000), X, y)
    p = predict_proba(model, X)
    assert np.all(np.isin(np.round(p * 5), np.arange(6)))
