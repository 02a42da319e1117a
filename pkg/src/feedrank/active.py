"""Pool-based active learning around a logistic relevance classifier.

The loop trains on the labeled set, picks the pool instance the classifier
is least confident about, asks the file-backed oracle for its label, and
moves it into the labeled set; positively labeled picks are also offered
to the caller so they can flow into the feedback repository.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .features import FeatureVector
from .textsim import FormatError, preprocess
from .validation import check_feature_matrix

logger = logging.getLogger(__name__)

_P_LO = np.nextafter(0.0, 1.0)
_P_HI = np.nextafter(1.0, 0.0)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


class LogisticScorer(BaseEstimator):
    """L2-regularized logistic regression, fit by deterministic full-batch
    gradient descent from zero initialization."""

    def __init__(
        self,
        l2: float = 1e-4,
        step: float = 0.1,
        max_iter: int = 500,
        tol: float = 1e-6,
    ):
        self.l2 = l2
        self.step = step
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X = check_feature_matrix(X)
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (X.shape[0],):
            raise ValueError("y must match X")
        if np.unique(y).size < 2:
            raise ValueError("degenerate labels")
        n, d = X.shape
        w = np.zeros(d)
        b = 0.0
        iterations = 0
        for _ in range(self.max_iter):
            p = _sigmoid(X @ w + b)
            residual = p - y
            grad_w = X.T @ residual / n + self.l2 * w
            grad_b = float(residual.mean())
            iterations += 1
            if float(np.sqrt(grad_w @ grad_w + grad_b * grad_b)) < self.tol:
                break
            w -= self.step * grad_w
            b -= self.step * grad_b
        self.weights_ = w
        self.bias_ = b
        self.n_iter_ = iterations
        self.n_features_in_ = d
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise ValueError("LogisticScorer is not fitted yet; call fit first")

    def predict_relevance(self, X) -> np.ndarray:
        """P(relevant) per row, clipped into the open interval (0, 1)."""
        self._check_fitted()
        X = check_feature_matrix(X)
        return np.clip(_sigmoid(X @ self.weights_ + self.bias_), _P_LO, _P_HI)

    def predict_proba(self, X) -> np.ndarray:
        p = self.predict_relevance(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_relevance(X) >= 0.5).astype(np.int64)


def train_logreg(X, y, **kwargs) -> LogisticScorer:
    return LogisticScorer(**kwargs).fit(X, y)


def predict_relevance(model: LogisticScorer, vector) -> float:
    if isinstance(vector, FeatureVector):
        vector = vector.as_array()
    return float(model.predict_relevance(np.asarray(vector).reshape(1, -1))[0])


class OracleStore:
    """Curated query -> API answer sets; queries are matched on their
    preprocessed form."""

    def __init__(self, entries: Dict[str, FrozenSet[str]]):
        for key, apis in entries.items():
            if not apis:
                raise ValueError(f"empty answer set for query {key!r}")
        self._entries = dict(entries)

    def __len__(self) -> int:
        return len(self._entries)

    def queries(self):
        return self._entries.keys()

    @staticmethod
    def normalize(query: str) -> str:
        return preprocess(query).as_text()

    def lookup(self, query: str) -> Optional[FrozenSet[str]]:
        return self._entries.get(self.normalize(query))

    @classmethod
    def load(cls, path) -> "OracleStore":
        """Parse the JSON Lines oracle: {"query", "apis"} per line."""
        entries: Dict[str, FrozenSet[str]] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
                if "query" not in obj or "apis" not in obj:
                    raise FormatError(f"line {lineno}: missing query/apis")
                apis = frozenset(str(a) for a in obj["apis"])
                if not apis:
                    raise FormatError(f"line {lineno}: empty answer set")
                key = cls.normalize(str(obj["query"]))
                entries[key] = entries.get(key, frozenset()) | apis
        return cls(entries)


def oracle_annotate(oracle: OracleStore, query: str, api_id: str) -> Optional[int]:
    """1 if the oracle lists the API for this query, 0 if it knows the query
    but not the API, None (with a warning) for an unknown query."""
    answers = oracle.lookup(query)
    if answers is None:
        logger.warning("oracle has no entry for query %r; instance skipped", query)
        return None
    return 1 if api_id in answers else 0


@dataclass(frozen=True)
class PoolInstance:
    """Unlabeled candidate: an API recommended for a source query."""

    query: str
    api_id: str
    vector: FeatureVector


def pool_matrix(pool: Sequence[PoolInstance]) -> np.ndarray:
    return np.stack([inst.vector.as_array() for inst in pool])


def uncertainty(probabilities: np.ndarray) -> np.ndarray:
    """Least-confidence value: 1 - max(p, 1-p), maximal at p = 0.5."""
    p = np.asarray(probabilities, dtype=np.float64)
    return 1.0 - np.maximum(p, 1.0 - p)


def select_uncertain(
    model: LogisticScorer, pool: Sequence[PoolInstance], batch: int = 1
) -> List[int]:
    """Indices of the `batch` most uncertain pool instances, ties broken
    by pool order."""
    if not pool:
        raise ValueError("empty pool")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    u = uncertainty(model.predict_relevance(pool_matrix(pool)))
    order = np.argsort(-u, kind="stable")
    return [int(i) for i in order[:batch]]


@dataclass(frozen=True)
class ALParams:
    batch_size: int = 1
    max_iterations: int = 10

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass
class ALResult:
    model: LogisticScorer
    X: np.ndarray
    y: np.ndarray
    pool: List[PoolInstance]
    skipped: List[PoolInstance] = field(default_factory=list)
    annotations: int = 0


def al_loop(
    X,
    y,
    pool: Sequence[PoolInstance],
    oracle: OracleStore,
    params: ALParams = ALParams(),
    on_positive: Optional[Callable[[PoolInstance], None]] = None,
) -> ALResult:
    """Run the train/select/annotate cycle until the pool empties or the
    iteration budget runs out. Labeled growth equals annotations performed;
    instances with unknown queries are skipped, never relabeled."""
    X = check_feature_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    model = train_logreg(X, y)
    pool = list(pool)
    skipped: List[PoolInstance] = []
    annotations = 0
    for _ in range(params.max_iterations):
        if not pool:
            break
        picked = select_uncertain(model, pool, params.batch_size)
        instances = [pool[i] for i in picked]
        for i in sorted(picked, reverse=True):
            del pool[i]
        grew = False
        for inst in instances:
            label = oracle_annotate(oracle, inst.query, inst.api_id)
            if label is None:
                skipped.append(inst)
                continue
            X = np.vstack([X, inst.vector.as_array()])
            y = np.append(y, label)
            annotations += 1
            grew = True
            if label == 1 and on_positive is not None:
                on_positive(inst)
        if grew:
            model = train_logreg(X, y)
    return ALResult(
        model=model, X=X, y=y, pool=pool, skipped=skipped, annotations=annotations
    )
