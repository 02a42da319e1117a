"""Ranking metrics, significance tests and the experiment protocols.

Metrics operate on QueryOutcome lists (ranked ids vs. a relevant set).
The statistical helpers are self-contained: exact-permutation
Mann-Whitney U for small samples, a tie-corrected normal approximation
beyond, and the rank-sum effect size.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .config import EngineConfig
from .corpus import BaseRecommender
from .feedback import FeedbackRecord
from .rank import Engine, rerank
from .textsim import BagOfWords, EmbeddingTable, FormatError, IdfTable, preprocess

logger = logging.getLogger(__name__)

REPORT_COLUMNS = (
    "config",
    "fraction",
    "hit1",
    "hit3",
    "hit5",
    "map",
    "mrr",
    "p",
    "a12",
    "extract_s",
    "train_s",
    "rank_s",
)


@dataclass(frozen=True)
class QueryOutcome:
    query_id: str
    ranked_ids: Tuple[str, ...]
    relevant_ids: FrozenSet[str]

    def first_relevant_rank(self) -> Optional[int]:
        for rank, api_id in enumerate(self.ranked_ids, start=1):
            if api_id in self.relevant_ids:
                return rank
        return None


def hit_at_k(outcomes: Sequence[QueryOutcome], k: int) -> float:
    """Fraction of queries with a relevant item in the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not outcomes:
        raise ValueError("no outcomes")
    hits = sum(
        1
        for out in outcomes
        if any(api in out.relevant_ids for api in out.ranked_ids[:k])
    )
    return hits / len(outcomes)


def average_precision_of(outcome: QueryOutcome) -> float:
    hits = 0
    acc = 0.0
    for rank, api_id in enumerate(outcome.ranked_ids, start=1):
        if api_id in outcome.relevant_ids:
            hits += 1
            acc += hits / rank
    return acc / hits if hits else 0.0


def mean_average_precision(outcomes: Sequence[QueryOutcome]) -> float:
    """Mean AP over queries; a query whose relevant API never shows up in
    the list contributes 0, and queries with no ground truth are excluded
    with a warning."""
    if not outcomes:
        raise ValueError("no outcomes")
    scored = []
    for out in outcomes:
        if not out.relevant_ids:
            logger.warning("query %s has no relevant set; excluded from MAP", out.query_id)
            continue
        scored.append(average_precision_of(out))
    if not scored:
        raise ValueError("no scorable outcomes")
    return float(np.mean(scored))


def mean_reciprocal_rank(outcomes: Sequence[QueryOutcome]) -> float:
    if not outcomes:
        raise ValueError("no outcomes")
    acc = 0.0
    for out in outcomes:
        rank = out.first_relevant_rank()
        if rank is not None:
            acc += 1.0 / rank
    return acc / len(outcomes)


# ----------------------------------------------------------------------
# statistics
# ----------------------------------------------------------------------

def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    n = values.size
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


EXACT_LIMIT = 8


def mann_whitney_u(sample_a: Sequence[float], sample_b: Sequence[float]) -> Tuple[float, float]:
    """U statistic of the first sample and a two-sided p value.

    Samples of at most 8 per side get the exact permutation distribution
    (midranks shared with the observed pooling, so ties are handled);
    larger samples use the tie-corrected normal approximation with
    continuity correction.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    m, n = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    r1 = float(ranks[:m].sum())
    u = r1 - m * (m + 1) / 2.0
    mid = m * n / 2.0
    observed = abs(u - mid)

    if m <= EXACT_LIMIT and n <= EXACT_LIMIT:
        total = 0
        extreme = 0
        for combo in combinations(range(m + n), m):
            total += 1
            u_perm = ranks[list(combo)].sum() - m * (m + 1) / 2.0
            if abs(u_perm - mid) >= observed - 1e-12:
                extreme += 1
        return u, extreme / total

    big_n = m + n
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts**3 - counts))
    var = (m * n / 12.0) * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    if var <= 0:
        return u, 1.0
    z = max(observed - 0.5, 0.0) / math.sqrt(var)
    return u, min(1.0, 2.0 * _normal_sf(z))


def a12(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """Rank-sum effect size: probability (with ties split) that a value
    from the first sample exceeds one from the second."""
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    m, n = a.size, b.size
    ranks = _midranks(np.concatenate([a, b]))
    r1 = float(ranks[:m].sum())
    return (r1 / m - (m + 1) / 2.0) / n


def bonferroni_adjust(p_values: Sequence[float]) -> List[float]:
    """Multiply each p by the comparison count, capped at 1."""
    k = len(p_values)
    return [min(1.0, p * k) for p in p_values]


# ----------------------------------------------------------------------
# datasets and reports
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class EvalQuery:
    query: str
    relevant: FrozenSet[str]

    def __post_init__(self):
        if not self.relevant:
            raise ValueError(f"query {self.query!r} has an empty relevant set")


def load_dataset(path) -> List[EvalQuery]:
    """JSON Lines: {"query", "relevant_apis"} per line."""
    queries: List[EvalQuery] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if "query" not in obj or "relevant_apis" not in obj:
                raise FormatError(f"line {lineno}: missing query/relevant_apis")
            try:
                queries.append(
                    EvalQuery(
                        query=str(obj["query"]),
                        relevant=frozenset(str(a) for a in obj["relevant_apis"]),
                    )
                )
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
    return queries


def save_dataset(queries: Sequence[EvalQuery], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(
                json.dumps({"query": q.query, "relevant_apis": sorted(q.relevant)}) + "\n"
            )


@dataclass
class ExperimentReport:
    rows: List[Dict[str, object]] = field(default_factory=list)

    def add(self, **values) -> None:
        unknown = set(values) - set(REPORT_COLUMNS)
        if unknown:
            raise ValueError(f"unknown report columns {sorted(unknown)}")
        self.rows.append(values)

    def column(self, name: str, config: Optional[str] = None) -> List[object]:
        return [
            row.get(name)
            for row in self.rows
            if config is None or row.get("config") == config
        ]

    def to_csv(self, path) -> None:
        lines = [",".join(REPORT_COLUMNS)]
        for row in self.rows:
            lines.append(
                ",".join(
                    "" if row.get(col) is None else str(row.get(col))
                    for col in REPORT_COLUMNS
                )
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.rows, indent=2), encoding="utf-8")


def _metric_values(outcomes: Sequence[QueryOutcome]) -> Dict[str, float]:
    return {
        "hit1": hit_at_k(outcomes, 1),
        "hit3": hit_at_k(outcomes, 3),
        "hit5": hit_at_k(outcomes, 5),
        "map": mean_average_precision(outcomes),
        "mrr": mean_reciprocal_rank(outcomes),
    }


# ----------------------------------------------------------------------
# experiment pipeline
# ----------------------------------------------------------------------

class EvalPipeline:
    """Builds fresh engines over one fixed world (recommender, embeddings,
    idf, config) so experiment runs stay independent."""

    def __init__(
        self,
        recommender: BaseRecommender,
        table: EmbeddingTable,
        idf: IdfTable,
        config: EngineConfig = EngineConfig(),
        oracle=None,
    ):
        self.recommender = recommender
        self.table = table
        self.idf = idf
        self.config = config
        self.oracle = oracle

    def make_engine(self) -> Engine:
        from .feedback import FeedbackRepository

        return Engine(
            recommender=self.recommender,
            table=self.table,
            idf=self.idf,
            repo=FeedbackRepository(),
            config=self.config,
            oracle=self.oracle,
            train_on_init=False,
        )

    @staticmethod
    def _pick(relevant: FrozenSet[str], listed_ids: Sequence[str]) -> Optional[str]:
        for api_id in listed_ids:
            if api_id in relevant:
                return api_id
        return None

    def seed_feedback(self, engine: Engine, pairs: Sequence[EvalQuery]) -> int:
        """Simulate past sessions: for each query whose ground truth shows
        up on the base list, record a selection with a snapshot extracted
        against the repository accumulated so far."""
        seeded = 0
        for i, pair in enumerate(pairs):
            rec_list = engine.recommender.recommend(pair.query, engine.config.top_n)
            picked = self._pick(pair.relevant, rec_list.api_ids)
            if picked is None:
                continue
            vectors = engine.extractor.extract(
                rec_list.query_bag, rec_list, engine.repo.records()
            )
            engine.repo.append(
                FeedbackRecord(
                    session_id="seed",
                    timestamp_ms=i,
                    query=pair.query,
                    selected_api=picked,
                    listed_apis=rec_list.api_ids,
                    features=tuple(v.as_tuple() for v in vectors),
                )
            )
            seeded += 1
        return seeded

    def run_query(
        self, engine: Engine, text: str, exclude_bag: Optional[BagOfWords] = None
    ) -> Tuple[Tuple[str, ...], Tuple[str, ...], float, float]:
        """One evaluation query outside any session. Returns the base
        order, the re-ranked order, and the extraction/ranking times."""
        rec_list = engine.recommender.recommend(text, engine.config.top_n)
        t0 = time.perf_counter()
        vectors = engine.extractor.extract(
            rec_list.query_bag, rec_list, engine.repo.records(), exclude_bag=exclude_bag
        )
        t1 = time.perf_counter()
        mart, logreg, version = engine.snapshot()
        result = rerank(rec_list, vectors, mart, logreg, version)
        t2 = time.perf_counter()
        return rec_list.api_ids, result.api_ids, t1 - t0, t2 - t1

    def evaluate(
        self, engine: Engine, queries: Sequence[EvalQuery], exclude_duplicates: bool = True
    ):
        """Outcomes for the base order and the re-ranked order, plus mean
        per-query extraction and ranking times."""
        base, ranked = [], []
        extract_times, rank_times = [], []
        for i, q in enumerate(queries):
            exclude = preprocess(q.query) if exclude_duplicates else None
            base_ids, ranked_ids, ext_s, rank_s = self.run_query(engine, q.query, exclude)
            base.append(QueryOutcome(f"q{i}", base_ids, q.relevant))
            ranked.append(QueryOutcome(f"q{i}", ranked_ids, q.relevant))
            extract_times.append(ext_s)
            rank_times.append(rank_s)
        timing = {
            "extract_s": float(np.mean(extract_times)) if extract_times else 0.0,
            "rank_s": float(np.mean(rank_times)) if rank_times else 0.0,
        }
        return base, ranked, timing


def cross_validate(
    dataset: Sequence[EvalQuery],
    pipeline: EvalPipeline,
    folds: int = 10,
    repeats: int = 5,
    seed: int = 0,
    train_pairs: Optional[int] = None,
) -> ExperimentReport:
    """Random fold split per repeat; metrics are computed over all held-out
    queries of a repeat, and the grand mean over repeats is appended.

    train_pairs caps how many training-fold pairs seed the repository
    (a small fixed repository per run, redrawn each repeat); None seeds
    every training pair.
    """
    dataset = list(dataset)
    if len(dataset) < folds:
        raise ValueError(f"dataset of {len(dataset)} queries cannot fill {folds} folds")
    rng = np.random.default_rng(seed)
    report = ExperimentReport()
    per_repeat: List[Dict[str, float]] = []
    base_repeat: List[Dict[str, float]] = []
    for rep in range(repeats):
        order = rng.permutation(len(dataset))
        fold_of = {int(q_idx): i % folds for i, q_idx in enumerate(order)}
        base_outcomes: List[QueryOutcome] = []
        ranked_outcomes: List[QueryOutcome] = []
        train_s = 0.0
        timing = {"extract_s": 0.0, "rank_s": 0.0}
        for fold in range(folds):
            test = [dataset[i] for i in range(len(dataset)) if fold_of[i] == fold]
            train = [dataset[i] for i in range(len(dataset)) if fold_of[i] != fold]
            if train_pairs is not None:
                picked = rng.permutation(len(train))[: max(0, train_pairs)]
                train = [train[i] for i in sorted(picked)]
            engine = pipeline.make_engine()
            seeded = pipeline.seed_feedback(engine, train)
            if seeded:
                t0 = time.perf_counter()
                engine.retrain()
                train_s += time.perf_counter() - t0
            b, r, t = pipeline.evaluate(engine, test)
            base_outcomes.extend(b)
            ranked_outcomes.extend(r)
            timing["extract_s"] += t["extract_s"]
            timing["rank_s"] += t["rank_s"]
        metrics = _metric_values(ranked_outcomes)
        base_metrics = _metric_values(base_outcomes)
        per_repeat.append(metrics)
        base_repeat.append(base_metrics)
        report.add(
            config=f"cv-rep{rep}",
            fraction=1.0,
            extract_s=timing["extract_s"] / folds,
            train_s=train_s / folds,
            rank_s=timing["rank_s"] / folds,
            **metrics,
        )
    mean_metrics = {
        key: float(np.mean([m[key] for m in per_repeat])) for key in per_repeat[0]
    }
    ranked_sample = [m["hit1"] for m in per_repeat]
    base_sample = [m["hit1"] for m in base_repeat]
    _, p = mann_whitney_u(ranked_sample, base_sample)
    report.add(
        config="cv-mean",
        fraction=1.0,
        p=p,
        a12=a12(ranked_sample, base_sample),
        **mean_metrics,
    )
    report.add(
        config="cv-base",
        fraction=0.0,
        **{key: float(np.mean([m[key] for m in base_repeat])) for key in base_repeat[0]},
    )
    return report


DEFAULT_FRACTIONS = tuple(round(0.1 * i, 1) for i in range(11))


def accumulation_experiment(
    dataset: Sequence[EvalQuery],
    pipeline: EvalPipeline,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    seeds: Sequence[int] = (0,),
    test_fraction: float = 0.25,
) -> ExperimentReport:
    """Grow the feedback repository from a training share and measure the
    held-out metrics per fraction; fraction 0 is the raw base recommender."""
    dataset = list(dataset)
    if len(dataset) < 4:
        raise ValueError("dataset too small")
    report = ExperimentReport()
    hit1_by_fraction: Dict[float, List[float]] = {f: [] for f in fractions}
    n_test = max(1, int(round(test_fraction * len(dataset))))
    for seed in seeds:
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(dataset))
        test = [dataset[i] for i in order[:n_test]]
        train = [dataset[i] for i in order[n_test:]]
        for fraction in fractions:
            take = int(round(fraction * len(train)))
            engine = pipeline.make_engine()
            seeded = pipeline.seed_feedback(engine, train[:take])
            train_s = 0.0
            if seeded:
                t0 = time.perf_counter()
                engine.retrain()
                train_s = time.perf_counter() - t0
            _, ranked, timing = pipeline.evaluate(engine, test)
            metrics = _metric_values(ranked)
            hit1_by_fraction[fraction].append(metrics["hit1"])
            report.add(
                config=f"seed{seed}",
                fraction=fraction,
                train_s=train_s,
                **metrics,
                **timing,
            )
    baseline = hit1_by_fraction[fractions[0]]
    for fraction in fractions:
        sample = hit1_by_fraction[fraction]
        row = {
            "config": "mean",
            "fraction": fraction,
            "hit1": float(np.mean(sample)),
        }
        if fraction != fractions[0] and len(sample) > 1:
            _, p = mann_whitney_u(sample, baseline)
            row["p"] = p
            row["a12"] = a12(sample, baseline)
        report.add(**row)
    return report


def pseudo_user_experiment(
    dataset: Sequence[EvalQuery],
    pipeline: EvalPipeline,
    n_queries: int = 50,
    seed: int = 0,
) -> ExperimentReport:
    """Sequentially issue queries on one engine; the pseudo-user picks the
    ground-truth API whenever it is listed. Models train once, as soon as
    feedback exists, and stay fixed for the rest of the run."""
    dataset = list(dataset)
    if not dataset:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(seed)
    chosen = [dataset[i] for i in rng.permutation(len(dataset))[: min(n_queries, len(dataset))]]
    engine = pipeline.make_engine()
    session = engine.open_session()
    base_outcomes: List[QueryOutcome] = []
    ranked_outcomes: List[QueryOutcome] = []
    trained = False
    train_s = 0.0
    for i, q in enumerate(chosen):
        query_id, result = engine.handle_query(session, q.query)
        cached = session.get(query_id)
        base_outcomes.append(QueryOutcome(f"q{i}", cached.rec_list.api_ids, q.relevant))
        ranked_outcomes.append(QueryOutcome(f"q{i}", result.api_ids, q.relevant))
        picked = EvalPipeline._pick(q.relevant, cached.rec_list.api_ids)
        if picked is not None:
            engine.record_feedback(session, query_id, picked)
            if not trained:
                t0 = time.perf_counter()
                engine.retrain(session)
                train_s = time.perf_counter() - t0
                trained = True
    report = ExperimentReport()
    report.add(config="base", fraction=0.0, **_metric_values(base_outcomes))
    report.add(
        config="reranked", fraction=1.0, train_s=train_s, **_metric_values(ranked_outcomes)
    )
    return report


def overhead_benchmark(
    pipeline: EvalPipeline,
    queries: Sequence[EvalQuery],
    train_pairs: Optional[Sequence[EvalQuery]] = None,
    train_repeats: int = 3,
) -> ExperimentReport:
    """Median wall-clock per phase: feature extraction and re-ranking per
    query, retraining per session close."""
    queries = list(queries)
    if not queries:
        raise ValueError("no queries to benchmark")
    engine = pipeline.make_engine()
    pipeline.seed_feedback(engine, train_pairs if train_pairs is not None else queries)
    if len(engine.repo) == 0:
        raise ValueError("benchmark needs at least one seedable feedback pair")
    train_times = []
    for _ in range(max(1, train_repeats)):
        t0 = time.perf_counter()
        engine.retrain()
        train_times.append(time.perf_counter() - t0)
    extract_times, rank_times = [], []
    for q in queries:
        _, _, ext_s, rank_s = pipeline.run_query(engine, q.query)
        extract_times.append(ext_s)
        rank_times.append(rank_s)
    report = ExperimentReport()
    report.add(
        config="overhead",
        extract_s=float(np.median(extract_times)),
        train_s=float(np.median(train_times)),
        rank_s=float(np.median(rank_times)),
    )
    return report
