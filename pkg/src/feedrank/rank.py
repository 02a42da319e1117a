"""The ranking engine: score fusion and the query/feedback/retrain cycle.

Per query: the base recommender proposes a list, the extractor builds one
feature vector per candidate, the boosted ranker and the relevance
classifier score them, and the fused prediction re-orders the list. With
no trained models (empty repository) the initial order passes through
unchanged. Models retrain when a session closes, never mid-session.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .active import (
    LogisticScorer,
    OracleStore,
    PoolInstance,
    al_loop,
    train_logreg,
)
from .config import EngineConfig
from .corpus import BaseRecommender, RecommendationList
from .features import FeatureExtractor, FeatureVector
from .feedback import FeedbackRecord, FeedbackRepository, build_training_groups
from .ltr import MartModel, train as train_mart
from .textsim import BagOfWords, EmbeddingTable, IdfTable, SimilarityIndex, preprocess


class EngineError(Exception):
    pass


class SessionClosedError(EngineError):
    pass


class UnknownQueryIdError(EngineError):
    pass


class ApiNotListedError(EngineError):
    pass


def normalize_scores(scores) -> np.ndarray:
    """Affine map onto [0, 1]; a constant vector maps to all 0.5."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores must be a non-empty 1-d array")
    lo = float(scores.min())
    hi = float(scores.max())
    if hi == lo:
        return np.full(scores.shape, 0.5)
    return (scores - lo) / (hi - lo)


def combine(scores, relevs, initial_positions) -> np.ndarray:
    """Fused prediction: normalized rank score plus a position-discounted
    relevance bonus of 2/(3*pos) per item."""
    scores = np.asarray(scores, dtype=np.float64)
    relevs = np.asarray(relevs, dtype=np.float64)
    pos = np.asarray(initial_positions, dtype=np.float64)
    if not (scores.shape == relevs.shape == pos.shape):
        raise ValueError("scores, relevs and positions must have equal length")
    if np.any(pos < 1):
        raise ValueError("positions are 1-based")
    return normalize_scores(scores) + (2.0 / (3.0 * pos)) * relevs


@dataclass(frozen=True)
class RankedItem:
    api_id: str
    pred_score: float
    initial_rank: int


@dataclass(frozen=True)
class RankedResult:
    items: Tuple[RankedItem, ...]
    model_version: int

    def __len__(self) -> int:
        return len(self.items)

    @property
    def api_ids(self) -> Tuple[str, ...]:
        return tuple(item.api_id for item in self.items)

    def rank_of(self, api_id: str) -> Optional[int]:
        for rank, item in enumerate(self.items, start=1):
            if item.api_id == api_id:
                return rank
        return None


def rerank(
    rec_list: RecommendationList,
    vectors: Sequence[FeatureVector],
    mart: Optional[MartModel],
    logreg: Optional[LogisticScorer],
    model_version: int = 0,
) -> RankedResult:
    """Fuse model scores and sort descending; ties keep the earlier initial
    rank. Output is always a permutation of the input list."""
    if len(vectors) != len(rec_list):
        raise ValueError("one feature vector required per listed api")
    n = len(rec_list)
    if mart is None and logreg is None:
        items = tuple(
            RankedItem(api_id=item.api.id, pred_score=0.0, initial_rank=item.initial_rank)
            for item in rec_list.items
        )
        return RankedResult(items=items, model_version=model_version)

    X = np.stack([v.as_array() for v in vectors]) if n else np.zeros((0, FeatureVector.WIDTH))
    raw = mart.score_batch(X) if mart is not None else np.zeros(n)
    relevs = logreg.predict_relevance(X) if logreg is not None else np.zeros(n)
    positions = np.array([item.initial_rank for item in rec_list.items], dtype=np.float64)
    pred = combine(raw, relevs, positions)
    ranked = sorted(
        zip(rec_list.items, pred), key=lambda pair: (-pair[1], pair[0].initial_rank)
    )
    items = tuple(
        RankedItem(api_id=item.api.id, pred_score=float(score), initial_rank=item.initial_rank)
        for item, score in ranked
    )
    return RankedResult(items=items, model_version=model_version)


@dataclass
class CachedQuery:
    query_id: str
    rec_list: RecommendationList
    vectors: List[FeatureVector]
    result: RankedResult


class Session:
    """One user's contiguous interaction window; query results are cached
    here so feedback can snapshot exactly what was shown."""

    def __init__(self, session_id: str, created_ms: int):
        self.id = session_id
        self.created_ms = created_ms
        self.open = True
        self._queries: Dict[str, CachedQuery] = {}
        self._counter = 0

    def cache(self, rec_list, vectors, result) -> str:
        self._counter += 1
        query_id = f"q{self._counter}"
        self._queries[query_id] = CachedQuery(query_id, rec_list, list(vectors), result)
        return query_id

    def get(self, query_id: str) -> Optional[CachedQuery]:
        return self._queries.get(query_id)

    def query_texts(self) -> List[str]:
        return [c.rec_list.query_text for c in self._queries.values()]


class Engine:
    """Couples recommender, extractor, repository and the two scorers.

    Queries read an immutable (models, version) snapshot; retraining swaps
    the snapshot atomically, so in-flight queries finish on the old one.
    """

    def __init__(
        self,
        recommender: BaseRecommender,
        table: EmbeddingTable,
        idf: IdfTable,
        repo: FeedbackRepository,
        config: EngineConfig = EngineConfig(),
        oracle: Optional[OracleStore] = None,
        clock: Callable[[], int] = lambda: time.time_ns() // 1_000_000,
        train_on_init: bool = True,
    ):
        self.recommender = recommender
        self.repo = repo
        self.config = config
        self.oracle = oracle
        self.clock = clock
        self.sim = getattr(recommender, "sim", None) or SimilarityIndex(table, idf)
        self.extractor = FeatureExtractor(
            self.sim, epsilon=config.epsilon, alg1_mode=config.alg1_mode
        )
        self._mart: Optional[MartModel] = None
        self._logreg: Optional[LogisticScorer] = None
        self._model_version = 0
        self._lock = threading.Lock()
        if train_on_init and len(repo) > 0:
            self.retrain()

    # -- state ---------------------------------------------------------

    def snapshot(self) -> Tuple[Optional[MartModel], Optional[LogisticScorer], int]:
        with self._lock:
            return self._mart, self._logreg, self._model_version

    @property
    def model_version(self) -> int:
        with self._lock:
            return self._model_version

    def stats(self) -> dict:
        mart, logreg, version = self.snapshot()
        return {
            "repo_size": len(self.repo),
            "model_version": version,
            "has_ranker": mart is not None,
            "has_classifier": logreg is not None,
        }

    # -- session lifecycle ----------------------------------------------

    def open_session(self) -> Session:
        return Session(session_id=uuid.uuid4().hex, created_ms=self.clock())

    def handle_query(
        self, session: Session, text: str, exclude_bag: Optional[BagOfWords] = None
    ) -> Tuple[str, RankedResult]:
        """Run the full per-query pipeline and cache the outcome under a
        fresh query id. exclude_bag suppresses feedback records matching
        that query (evaluation-time duplicate removal)."""
        if not session.open:
            raise SessionClosedError(f"session {session.id} is closed")
        rec_list = self.recommender.recommend(text, self.config.top_n)
        vectors = self.extractor.extract(
            rec_list.query_bag, rec_list, self.repo.records(), exclude_bag=exclude_bag
        )
        mart, logreg, version = self.snapshot()
        result = rerank(rec_list, vectors, mart, logreg, version)
        query_id = session.cache(rec_list, vectors, result)
        return query_id, result

    def record_feedback(self, session: Session, query_id: str, api_id: str) -> FeedbackRecord:
        if not session.open:
            raise SessionClosedError(f"session {session.id} is closed")
        cached = session.get(query_id)
        if cached is None:
            raise UnknownQueryIdError(f"unknown query id {query_id!r}")
        if api_id not in cached.rec_list.api_ids:
            raise ApiNotListedError(f"api {api_id!r} was not on the shown list")
        record = FeedbackRecord(
            session_id=session.id,
            timestamp_ms=self.clock(),
            query=cached.rec_list.query_text,
            selected_api=api_id,
            listed_apis=cached.rec_list.api_ids,
            features=tuple(v.as_tuple() for v in cached.vectors),
        )
        self.repo.append(record)
        return record

    def close_session(self, session: Session) -> int:
        """Mark the session closed and retrain on the repository (a no-op
        close when the repository is empty). Returns the model version."""
        if not session.open:
            raise SessionClosedError(f"session {session.id} already closed")
        session.open = False
        if len(self.repo) > 0:
            self.retrain(session)
        return self.model_version

    # -- training --------------------------------------------------------

    def _training_groups(self, records) -> List:
        """Rebuild one labeled group per record with features re-extracted
        against the full current repository.

        The persisted snapshots keep what the user saw; training instead
        re-featurizes each stored list so a record's own selection shows
        up in its feedback slots (its query matches itself at similarity
        1), which is what lets the models learn that those slots predict
        relevance. Records whose APIs are gone from the corpus fall back
        to their snapshot vectors.
        """
        corpus = getattr(self.recommender, "corpus", None)
        if corpus is None:
            return build_training_groups(records)
        from .corpus import make_list
        from .ltr import LabeledGroup

        groups = []
        for i, record in enumerate(records):
            entries = [corpus.get(api_id) for api_id in record.listed_apis]
            if any(entry is None for entry in entries):
                vectors = tuple(FeatureVector.from_values(fv) for fv in record.features)
            else:
                scored = [(entry, 1.0 / (r + 1)) for r, entry in enumerate(entries)]
                rec_list = make_list(record.query, scored)
                vectors = tuple(
                    self.extractor.extract(rec_list.query_bag, rec_list, records)
                )
            labels = tuple(
                1 if api == record.selected_api else 0 for api in record.listed_apis
            )
            groups.append(LabeledGroup(group_id=f"fb-{i:05d}", vectors=vectors, labels=labels))
        return groups

    def retrain(self, session: Optional[Session] = None) -> int:
        """Rebuild training groups from the repository, run the active
        learning loop when an oracle is configured, retrain both scorers
        and atomically bump the model version."""
        records = self.repo.records()
        if not records:
            raise EngineError("cannot retrain on an empty repository")
        logreg: Optional[LogisticScorer] = None
        if self.oracle is not None:
            logreg = self._active_learning(session, records)
            records = self.repo.records()
        groups = self._training_groups(records)
        mart = train_mart(groups, self.config.mart_params())
        if logreg is None:
            X = np.concatenate([g.feature_matrix() for g in groups])
            y = np.concatenate([g.label_array() for g in groups])
            if np.unique(y).size == 2:
                logreg = train_logreg(X, y)
        with self._lock:
            self._mart = mart
            self._logreg = logreg
            self._model_version += 1
            return self._model_version

    def _active_learning(
        self, session: Optional[Session], records
    ) -> Optional[LogisticScorer]:
        groups = self._training_groups(records)
        X = np.concatenate([g.feature_matrix() for g in groups])
        y = np.concatenate([g.label_array() for g in groups])
        if np.unique(y).size < 2:
            return None
        pool, context = self._build_pool(session, records)
        if not pool:
            return train_logreg(X, y)

        def on_positive(inst: PoolInstance) -> None:
            rec_list, vectors = context[inst.query]
            self.repo.append(
                FeedbackRecord(
                    session_id=f"al:{session.id if session else 'init'}",
                    timestamp_ms=self.clock(),
                    query=inst.query,
                    selected_api=inst.api_id,
                    listed_apis=rec_list.api_ids,
                    features=tuple(v.as_tuple() for v in vectors),
                )
            )

        result = al_loop(X, y, pool, self.oracle, self.config.al_params(), on_positive)
        return result.model

    def _build_pool(self, session: Optional[Session], records):
        """Unlabeled instances from oracle queries on-topic for this session:
        every candidate the base recommender lists for a sufficiently similar
        oracle query, minus pairs already labeled by feedback."""
        pool: List[PoolInstance] = []
        context: Dict[str, Tuple[RecommendationList, List[FeatureVector]]] = {}
        if session is None:
            return pool, context
        session_bags = [preprocess(t) for t in session.query_texts()]
        session_bags = [b for b in session_bags if b]
        if not session_bags:
            return pool, context
        labeled = {(OracleStore.normalize(r.query), r.selected_api) for r in records}
        for oracle_query in sorted(self.oracle.queries()):
            bag = preprocess(oracle_query)
            if not bag:
                continue
            if max(self.sim.sym(bag, sb) for sb in session_bags) < self.config.pool_similarity:
                continue
            rec_list = self.recommender.recommend(oracle_query, self.config.top_n)
            vectors = self.extractor.extract(bag, rec_list, records)
            context[oracle_query] = (rec_list, vectors)
            for item, vec in zip(rec_list.items, vectors):
                if (oracle_query, item.api.id) in labeled:
                    continue
                pool.append(PoolInstance(query=oracle_query, api_id=item.api.id, vector=vec))
        return pool, context
