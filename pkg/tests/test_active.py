import json

import numpy as np
import pytest
from sklearn.base import clone

from feedrank.active import (
    ALParams,
    LogisticScorer,
    OracleStore,
    PoolInstance,
    al_loop,
    oracle_annotate,
    predict_relevance,
    select_uncertain,
    train_logreg,
    uncertainty,
)
from feedrank.features import FeatureVector
from feedrank.textsim import FormatError


def _vec(*values):
    padded = tuple(values) + (0.0,) * (7 - len(values))
    return FeatureVector.from_values(padded)


def _separable(n=20, seed=0):
    rng = np.random.default_rng(seed)
    X = np.zeros((n, 7))
    y = np.zeros(n, dtype=int)
    half = n // 2
    X[:half, 0] = rng.uniform(0.7, 1.0, size=half)
    X[half:, 0] = rng.uniform(0.0, 0.3, size=n - half)
    y[:half] = 1
    return X, y


# ----------------------------------------------------------------------
# classifier
# ----------------------------------------------------------------------

def test_logreg_separable_training_accuracy():
    X, y = _separable()
    model = train_logreg(X, y)
    assert (model.predict(X) == y).mean() == 1.0


def test_logreg_zero_weights_predict_half():
    model = LogisticScorer()
    model.weights_ = np.zeros(7)
    model.bias_ = 0.0
    model.n_features_in_ = 7
    assert predict_relevance(model, _vec(1, 2, 3)) == pytest.approx(0.5)


def test_logreg_deterministic_retrain():
    X, y = _separable(seed=3)
    a = train_logreg(X, y)
    b = train_logreg(X, y)
    np.testing.assert_array_equal(a.weights_, b.weights_)
    assert a.bias_ == b.bias_ and a.n_iter_ == b.n_iter_


def test_logreg_degenerate_labels():
    X = np.zeros((4, 7))
    with pytest.raises(ValueError, match="degenerate labels"):
        train_logreg(X, [1, 1, 1, 1])


def test_predict_relevance_saturation_and_open_interval():
    model = LogisticScorer()
    model.weights_ = np.zeros(7)
    model.bias_ = 50.0
    model.n_features_in_ = 7
    p = predict_relevance(model, _vec(0, 0, 0))
    assert p == pytest.approx(1.0, abs=1e-9)
    assert 0.0 < p < 1.0
    model.bias_ = -50.0
    p = predict_relevance(model, _vec(0, 0, 0))
    assert p == pytest.approx(0.0, abs=1e-9)
    assert 0.0 < p < 1.0


def test_predict_relevance_monotone_in_positive_weight():
    X, y = _separable()
    model = train_logreg(X, y)
    assert model.weights_[0] > 0
    low = predict_relevance(model, _vec(0.2))
    high = predict_relevance(model, _vec(0.9))
    assert high > low


def test_logreg_sklearn_protocol():
    scorer = LogisticScorer(l2=1e-3, step=0.05)
    assert clone(scorer).get_params() == scorer.get_params()
    X, y = _separable()
    proba = scorer.fit(X, y).predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)


# ----------------------------------------------------------------------
# uncertainty sampling
# ----------------------------------------------------------------------

class _FixedModel:
    """Stub returning preset probabilities by pool order."""

    def __init__(self, probs):
        self.probs = list(probs)

    def predict_relevance(self, X):
        return np.array(self.probs[: X.shape[0]])


def _pool(n):
    return [PoolInstance(query=f"q{i}", api_id=f"api{i}", vector=_vec(i / 10)) for i in range(n)]


def test_uncertainty_definition():
    np.testing.assert_allclose(
        uncertainty(np.array([0.5, 0.9, 0.05])), [0.5, 0.1, 0.05]
    )


def test_select_uncertain_picks_closest_to_half():
    picked = select_uncertain(_FixedModel([0.95, 0.55]), _pool(2), batch=1)
    assert picked == [1]
    picked = select_uncertain(_FixedModel([0.5, 0.9]), _pool(2), batch=1)
    assert picked == [0]


def test_select_uncertain_batch_two():
    picked = select_uncertain(_FixedModel([0.5, 0.6, 0.99]), _pool(3), batch=2)
    assert sorted(picked) == [0, 1]


def test_select_uncertain_ties_by_pool_order():
    picked = select_uncertain(_FixedModel([0.6, 0.4, 0.6]), _pool(3), batch=2)
    assert picked == [0, 1]


def test_select_uncertain_empty_pool():
    with pytest.raises(ValueError, match="empty pool"):
        select_uncertain(_FixedModel([]), [], batch=1)


def test_selected_attains_max_uncertainty_brute_force():
    rng = np.random.default_rng(9)
    for _ in range(50):
        n = int(rng.integers(1, 30))
        probs = rng.uniform(0, 1, size=n)
        model = _FixedModel(probs)
        picked = select_uncertain(model, _pool(n), batch=1)[0]
        u = 1 - np.maximum(probs, 1 - probs)
        assert u[picked] == pytest.approx(float(u.max()))


# ----------------------------------------------------------------------
# oracle
# ----------------------------------------------------------------------

def test_oracle_load_and_annotate(tmp_path):
    path = tmp_path / "oracle.jsonl"
    path.write_text(
        json.dumps({"query": "Killing a running thread", "apis": ["api.kill"]})
        + "\n"
        + json.dumps({"query": "parse the file", "apis": ["api.parse", "api.read"]})
        + "\n"
    )
    oracle = OracleStore.load(path)
    assert oracle_annotate(oracle, "kill running thread!", "api.kill") == 1
    assert oracle_annotate(oracle, "kill running thread!", "api.other") == 0


def test_oracle_unknown_query_warns_and_returns_none(tmp_path, caplog):
    path = tmp_path / "oracle.jsonl"
    path.write_text(json.dumps({"query": "alpha", "apis": ["x"]}) + "\n")
    oracle = OracleStore.load(path)
    with caplog.at_level("WARNING"):
        assert oracle_annotate(oracle, "completely different", "x") is None
    assert any("skipped" in m for m in caplog.messages)


def test_oracle_rejects_empty_answer_sets(tmp_path):
    path = tmp_path / "oracle.jsonl"
    path.write_text(json.dumps({"query": "alpha", "apis": []}) + "\n")
    with pytest.raises(FormatError, match="empty answer set"):
        OracleStore.load(path)


# ----------------------------------------------------------------------
# the loop
# ----------------------------------------------------------------------

def _loop_fixture(pool_queries):
    X, y = _separable(10)
    oracle = OracleStore(
        {
            OracleStore.normalize("known query"): frozenset(["api.good"]),
        }
    )
    pool = [
        PoolInstance(query=q, api_id=api, vector=_vec(0.5 + 0.01 * i))
        for i, (q, api) in enumerate(pool_queries)
    ]
    return X, y, pool, oracle


def test_al_loop_exhausts_small_pool():
    X, y, pool, oracle = _loop_fixture(
        [("known query", "api.good"), ("known query", "api.bad"), ("known query", "api.good")]
    )
    result = al_loop(X, y, pool, oracle, ALParams(max_iterations=10))
    assert result.annotations == 3
    assert result.pool == []
    assert result.y.shape[0] == 13


def test_al_loop_zero_iterations_keeps_initial_model():
    X, y, pool, oracle = _loop_fixture([("known query", "api.good")])
    result = al_loop(X, y, pool, oracle, ALParams(max_iterations=0))
    baseline = train_logreg(X, y)
    np.testing.assert_array_equal(result.model.weights_, baseline.weights_)
    assert result.annotations == 0 and len(result.pool) == 1


def test_al_loop_conservation_and_growth():
    X, y, pool, oracle = _loop_fixture(
        [("known query", "api.good"), ("mystery", "api.x"), ("known query", "api.bad")]
    )
    total = len(pool)
    result = al_loop(X, y, pool, oracle, ALParams(max_iterations=10))
    assert len(result.pool) + len(result.skipped) + result.annotations == total
    assert result.y.shape[0] == y.shape[0] + result.annotations
    assert len(result.skipped) == 1


def test_al_loop_positive_callback():
    X, y, pool, oracle = _loop_fixture(
        [("known query", "api.good"), ("known query", "api.bad")]
    )
    positives = []
    al_loop(X, y, pool, oracle, ALParams(max_iterations=10), on_positive=positives.append)
    assert [p.api_id for p in positives] == ["api.good"]


def test_al_loop_iteration_budget():
    X, y, pool, oracle = _loop_fixture([("known query", "api.good")] * 8)
    result = al_loop(X, y, pool, oracle, ALParams(max_iterations=3))
    assert result.annotations == 3
    assert len(result.pool) == 5
