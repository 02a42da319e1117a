"""Pairwise learning-to-rank with gradient-boosted regression trees.

Training follows the lambda-gradient scheme: every label-discordant pair
inside a group contributes a pseudo-gradient sized by the sigmoid of the
score gap times the ranking-metric change obtained by swapping the pair,
and each boosting round fits a small regression tree to those gradients
with Newton-style leaf values G/(H + beta) and a split penalty gamma.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .features import FeatureVector
from .validation import check_binary_labels, check_feature_matrix, check_group_sizes

MODEL_FORMAT = "feedrank-mart"
MODEL_VERSION = 1

DELTA_METRICS = ("MAP", "NDCG")
LAMBDA_SIGNS = ("standard", "paper")


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


# ----------------------------------------------------------------------
# ranking metrics on a ranked list of binary labels
# ----------------------------------------------------------------------

def average_precision(ranked_labels: Sequence[int]) -> float:
    """Mean of num(k)/k over the relevant positions k of the ranked list;
    0 when nothing relevant is listed."""
    hits = 0
    acc = 0.0
    for pos, label in enumerate(ranked_labels, start=1):
        if label:
            hits += 1
            acc += hits / pos
    return acc / hits if hits else 0.0


def ndcg(ranked_labels: Sequence[int]) -> float:
    y = np.asarray(ranked_labels, dtype=np.float64)
    if y.size == 0:
        return 0.0
    discounts = 1.0 / np.log2(np.arange(2, y.size + 2))
    gains = np.power(2.0, y) - 1.0
    ideal = float(np.sort(gains)[::-1] @ discounts)
    if ideal == 0.0:
        return 0.0
    return float(gains @ discounts) / ideal


def _metric_value(ranked_labels, metric: str) -> float:
    if metric == "MAP":
        return average_precision(ranked_labels)
    if metric == "NDCG":
        return ndcg(ranked_labels)
    raise ValueError(f"unknown metric {metric!r}")


def swap_delta(ranked_labels: Sequence[int], i: int, j: int, metric: str = "MAP") -> float:
    """|metric change| when the items at 1-based positions i and j of the
    current ranking trade places."""
    if i == j:
        raise ValueError("positions must differ")
    labels = list(ranked_labels)
    n = len(labels)
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError("positions out of range")
    before = _metric_value(labels, metric)
    labels[i - 1], labels[j - 1] = labels[j - 1], labels[i - 1]
    after = _metric_value(labels, metric)
    return abs(after - before)


def _batch_metric(rows: np.ndarray, metric: str) -> np.ndarray:
    """Metric of each row of ranked binary labels."""
    n = rows.shape[1]
    if metric == "MAP":
        ranks = np.arange(1, n + 1, dtype=np.float64)
        cum = np.cumsum(rows, axis=1)
        hits = rows.sum(axis=1)
        ap = (rows * cum / ranks).sum(axis=1)
        return np.divide(ap, hits, out=np.zeros_like(ap, dtype=np.float64), where=hits > 0)
    discounts = 1.0 / np.log2(np.arange(2, n + 2))
    gains = np.power(2.0, rows) - 1.0
    ideal = np.sort(gains, axis=1)[:, ::-1] @ discounts
    dcg = gains @ discounts
    return np.divide(dcg, ideal, out=np.zeros_like(dcg), where=ideal > 0)


# ----------------------------------------------------------------------
# lambda gradients
# ----------------------------------------------------------------------

def pair_lambda(
    s_i: float,
    s_j: float,
    delta: float,
    sigma: float = 1.0,
    lambda_sign: str = "standard",
) -> float:
    """Pseudo-gradient for a pair where item i is preferred over item j.

    The standard convention vanishes once the pair is well ordered
    (s_i >> s_j). "paper" flips the exponent sign, making the magnitude
    grow with the correctly-ordered gap; kept for fidelity experiments.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    gap = sigma * (s_i - s_j)
    if lambda_sign == "standard":
        rho = _sigmoid(-gap)
    elif lambda_sign == "paper":
        rho = _sigmoid(gap)
    else:
        raise ValueError(f"unknown lambda_sign {lambda_sign!r}")
    return float(-sigma * delta * rho)


@dataclass(frozen=True)
class MartParams:
    n_trees: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 8
    min_samples_leaf: int = 1
    sigma: float = 1.0
    gamma: float = 0.3
    beta: float = 1.0
    delta_metric: str = "MAP"
    lambda_sign: str = "standard"

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValueError("n_trees must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_leaves < 1:
            raise ValueError("max_leaves must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.delta_metric not in DELTA_METRICS:
            raise ValueError(f"delta_metric must be one of {DELTA_METRICS}")
        if self.lambda_sign not in LAMBDA_SIGNS:
            raise ValueError(f"lambda_sign must be one of {LAMBDA_SIGNS}")


@dataclass(frozen=True)
class LabeledGroup:
    """One query's candidate list with binary relevance labels."""

    group_id: str
    vectors: Tuple[FeatureVector, ...]
    labels: Tuple[int, ...]

    def __post_init__(self):
        if not self.vectors:
            raise ValueError("group needs at least one instance")
        if len(self.vectors) != len(self.labels):
            raise ValueError("vectors and labels must have equal length")
        if any(label not in (0, 1) for label in self.labels):
            raise ValueError("labels must be binary")

    def feature_matrix(self) -> np.ndarray:
        return np.stack([v.as_array() for v in self.vectors])

    def label_array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int64)

    def has_both_labels(self) -> bool:
        return 0 in self.labels and 1 in self.labels


def _lambdas_arrays(
    y: np.ndarray, scores: np.ndarray, params: MartParams
) -> Tuple[np.ndarray, np.ndarray]:
    """Accumulated lambda and curvature per instance of one group."""
    n = y.shape[0]
    lam = np.zeros(n)
    hess = np.zeros(n)
    pos_idx = np.flatnonzero(y == 1)
    neg_idx = np.flatnonzero(y == 0)
    if pos_idx.size == 0 or neg_idx.size == 0:
        return lam, hess

    order = np.argsort(-scores, kind="stable")
    ranked_labels = y[order].astype(np.float64)
    position = np.empty(n, dtype=np.int64)
    position[order] = np.arange(n)
    base = _batch_metric(ranked_labels[None, :], params.delta_metric)[0]

    a = np.repeat(pos_idx, neg_idx.size)
    b = np.tile(neg_idx, pos_idx.size)
    rows = np.tile(ranked_labels, (a.size, 1))
    rr = np.arange(a.size)
    pa, pb = position[a], position[b]
    rows[rr, pa], rows[rr, pb] = rows[rr, pb], rows[rr, pa]
    delta = np.abs(_batch_metric(rows, params.delta_metric) - base)

    gap = params.sigma * (scores[a] - scores[b])
    rho = _sigmoid(-gap) if params.lambda_sign == "standard" else _sigmoid(gap)
    grad = params.sigma * delta * rho
    curv = params.sigma * params.sigma * delta * rho * (1.0 - rho)
    np.add.at(lam, a, grad)
    np.add.at(lam, b, -grad)
    np.add.at(hess, a, curv)
    np.add.at(hess, b, curv)
    return lam, hess


def group_lambdas(
    group: LabeledGroup, scores: Sequence[float], params: MartParams = MartParams()
) -> Tuple[np.ndarray, np.ndarray]:
    """Lambda and curvature for every instance of the group under the
    current scores. The preferred side of each discordant pair receives a
    positive pull, so positives scored below negatives get pushed up."""
    scores = np.asarray(scores, dtype=np.float64)
    y = group.label_array()
    if scores.shape[0] != y.shape[0]:
        raise ValueError("scores and instances must have equal length")
    return _lambdas_arrays(y, scores, params)


# ----------------------------------------------------------------------
# regression trees
# ----------------------------------------------------------------------

class RegressionTree:
    """Binary regression tree stored as flat preorder arrays."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def leaf_values(self) -> np.ndarray:
        return self.value[self.feature < 0]

    def predict_one(self, x: np.ndarray) -> float:
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return float(self.value[node])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            f = self.feature[node]
            if f < 0:
                out[idx] = self.value[node]
                continue
            goes_left = X[idx, f] <= self.threshold[node]
            stack.append((self.left[node], idx[goes_left]))
            stack.append((self.right[node], idx[~goes_left]))
        return out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RegressionTree":
        return cls(obj["feature"], obj["threshold"], obj["left"], obj["right"], obj["value"])


def _node_score(g_sum: float, h_sum: float, beta: float) -> float:
    return g_sum * g_sum / (h_sum + beta)


def _best_split(X, g, h, idx, params: MartParams):
    """Best (gain, feature, threshold, left_idx, right_idx) for one node,
    or None when no admissible split exists."""
    m = params.min_samples_leaf
    if idx.size < 2 * m:
        return None
    g_tot = float(g[idx].sum())
    h_tot = float(h[idx].sum())
    parent = _node_score(g_tot, h_tot, params.beta)
    best = None
    for f in range(X.shape[1]):
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cg = np.cumsum(g[idx][order])
        ch = np.cumsum(h[idx][order])
        k = np.arange(idx.size - 1)
        admissible = (sv[:-1] < sv[1:]) & (k + 1 >= m) & (idx.size - 1 - k >= m)
        if not np.any(admissible):
            continue
        gl, hl = cg[:-1], ch[:-1]
        gr, hr = g_tot - gl, h_tot - hl
        gain = 0.5 * (
            gl * gl / (hl + params.beta) + gr * gr / (hr + params.beta) - parent
        )
        gain = np.where(admissible, gain, -np.inf)
        k_best = int(np.argmax(gain))
        if not np.isfinite(gain[k_best]):
            continue
        if best is None or gain[k_best] > best[0] + 1e-15:
            threshold = (sv[k_best] + sv[k_best + 1]) / 2.0
            left_idx = idx[order[: k_best + 1]]
            right_idx = idx[order[k_best + 1:]]
            best = (float(gain[k_best]), f, float(threshold), left_idx, right_idx)
    return best


def fit_tree(X, lambdas, hessians, params: MartParams = MartParams()) -> RegressionTree:
    """Greedy best-first regression tree on the lambda targets.

    A leaf predicts sum(lambda) / (sum(hess) + beta); a split is kept only
    when its regularized gain exceeds gamma, and leaves are capped at
    max_leaves."""
    X = check_feature_matrix(X)
    g = np.asarray(lambdas, dtype=np.float64)
    h = np.asarray(hessians, dtype=np.float64)
    if g.shape[0] != X.shape[0] or h.shape[0] != X.shape[0]:
        raise ValueError("lambdas/hessians must match the sample count")

    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def new_node(idx) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(g[idx].sum() / (h[idx].sum() + params.beta)))
        return len(feature) - 1

    root_idx = np.arange(X.shape[0])
    root = new_node(root_idx)
    # frontier: node id -> (sample indices, cached best split)
    frontier = {root: (root_idx, _best_split(X, g, h, root_idx, params))}
    n_leaves = 1
    while n_leaves < params.max_leaves:
        candidates = [
            (split[0], node)
            for node, (_, split) in frontier.items()
            if split is not None and split[0] > params.gamma
        ]
        if not candidates:
            break
        _, node = max(candidates, key=lambda c: (c[0], -c[1]))
        _, f, thr, left_idx, right_idx = frontier.pop(node)[1]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(left_idx)
        right[node] = new_node(right_idx)
        frontier[left[node]] = (left_idx, _best_split(X, g, h, left_idx, params))
        frontier[right[node]] = (right_idx, _best_split(X, g, h, right_idx, params))
        n_leaves += 1
    return RegressionTree(feature, threshold, left, right, value)


# ----------------------------------------------------------------------
# boosted model
# ----------------------------------------------------------------------

class MartModel:
    """Additive ensemble: score(v) = sum_j alpha_j * tree_j(v)."""

    def __init__(
        self,
        trees: Optional[List[RegressionTree]] = None,
        weights: Optional[List[float]] = None,
        params: MartParams = MartParams(),
    ):
        self.trees = list(trees or [])
        self.weights = [float(w) for w in (weights or [])]
        if len(self.trees) != len(self.weights):
            raise ValueError("one weight per tree required")
        self.params = params

    def __len__(self) -> int:
        return len(self.trees)

    def score_batch(self, X) -> np.ndarray:
        X = check_feature_matrix(X)
        out = np.zeros(X.shape[0])
        for tree, w in zip(self.trees, self.weights):
            out += w * tree.predict_batch(X)
        return out

    def score(self, vector) -> float:
        if isinstance(vector, FeatureVector):
            vector = vector.as_array()
        x = np.asarray(vector, dtype=np.float64)
        return float(sum(w * t.predict_one(x) for t, w in zip(self.trees, self.weights)))

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "params": asdict(self.params),
            "trees": [t.to_dict() for t in self.trees],
            "weights": self.weights,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MartModel":
        if obj.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} file")
        if obj.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {obj.get('version')!r}")
        return cls(
            trees=[RegressionTree.from_dict(t) for t in obj["trees"]],
            weights=list(obj["weights"]),
            params=MartParams(**obj["params"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "MartModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def score(model: MartModel, vector) -> float:
    return model.score(vector)


def _train_arrays(X, y, sizes, params: MartParams) -> MartModel:
    starts = np.concatenate(([0], np.cumsum(sizes)))
    usable = [
        (starts[i], starts[i + 1])
        for i in range(len(sizes))
        if len(set(y[starts[i]:starts[i + 1]])) == 2
    ]
    if not usable:
        raise ValueError("no preference pairs")

    scores = np.zeros(X.shape[0])
    trees: List[RegressionTree] = []
    weights: List[float] = []
    lam = np.zeros(X.shape[0])
    hess = np.zeros(X.shape[0])
    for _ in range(params.n_trees):
        lam[:] = 0.0
        hess[:] = 0.0
        for lo, hi in usable:
            lam[lo:hi], hess[lo:hi] = _lambdas_arrays(y[lo:hi], scores[lo:hi], params)
        tree = fit_tree(X, lam, hess, params)
        trees.append(tree)
        weights.append(params.learning_rate)
        scores += params.learning_rate * tree.predict_batch(X)
    return MartModel(trees=trees, weights=weights, params=params)


def train(groups: Sequence[LabeledGroup], params: MartParams = MartParams()) -> MartModel:
    """Boost n_trees rounds over the labeled groups. Deterministic: no RNG
    enters training, so identical inputs reproduce the model bit for bit."""
    if not groups:
        raise ValueError("no training groups")
    X = np.concatenate([grp.feature_matrix() for grp in groups])
    y = np.concatenate([grp.label_array() for grp in groups])
    sizes = np.array([len(grp.labels) for grp in groups])
    return _train_arrays(X, y, sizes, params)


class MartRanker(BaseEstimator):
    """Estimator wrapper: fit(X, y, group) / predict(X) over flat arrays,
    with group passed lightgbm-style as per-query sizes."""

    def __init__(
        self,
        n_trees: int = 100,
        learning_rate: float = 0.1,
        max_leaves: int = 8,
        min_samples_leaf: int = 1,
        sigma: float = 1.0,
        gamma: float = 0.3,
        beta: float = 1.0,
        delta_metric: str = "MAP",
        lambda_sign: str = "standard",
    ):
        self.n_trees = n_trees
        self.learning_rate = learning_rate
        self.max_leaves = max_leaves
        self.min_samples_leaf = min_samples_leaf
        self.sigma = sigma
        self.gamma = gamma
        self.beta = beta
        self.delta_metric = delta_metric
        self.lambda_sign = lambda_sign

    def _params(self) -> MartParams:
        return MartParams(
            n_trees=self.n_trees,
            learning_rate=self.learning_rate,
            max_leaves=self.max_leaves,
            min_samples_leaf=self.min_samples_leaf,
            sigma=self.sigma,
            gamma=self.gamma,
            beta=self.beta,
            delta_metric=self.delta_metric,
            lambda_sign=self.lambda_sign,
        )

    def fit(self, X, y, group):
        X = check_feature_matrix(X)
        y = check_binary_labels(y, X.shape[0])
        sizes = check_group_sizes(group, X.shape[0])
        self.model_ = _train_arrays(X, y, sizes, self._params())
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise ValueError("MartRanker is not fitted yet; call fit first")
        return self.model_.score_batch(X)
