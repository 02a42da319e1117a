"""Query-aware feature vectors for candidate APIs.

Each candidate gets a fixed 7-wide vector: five feedback features (the
strongest similarities to stored queries whose selected API is this
candidate, descending, zero-padded) followed by the query-to-path and
query-to-description similarities.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TYPE_CHECKING, ClassVar, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import ApiEntry, RecommendationList
from .textsim import BagOfWords, SimilarityIndex

if TYPE_CHECKING:  # pragma: no cover
    from .feedback import FeedbackRecord, SimilarPairSet

FF_SLOTS = 5

FEATURE_NAMES = ("ff1", "ff2", "ff3", "ff4", "ff5", "path_sim", "desc_sim")


@dataclass(frozen=True)
class FeatureVector:
    WIDTH: ClassVar[int] = 7

    ff: Tuple[float, ...]
    path_sim: float
    desc_sim: float

    def __post_init__(self):
        if len(self.ff) != FF_SLOTS:
            raise ValueError(f"ff must have exactly {FF_SLOTS} entries")

    def as_tuple(self) -> Tuple[float, ...]:
        return self.ff + (self.path_sim, self.desc_sim)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "FeatureVector":
        values = tuple(float(v) for v in values)
        if len(values) != cls.WIDTH:
            raise ValueError(f"expected {cls.WIDTH} values, got {len(values)}")
        return cls(ff=values[:FF_SLOTS], path_sim=values[5], desc_sim=values[6])

    @classmethod
    def cold(cls, path_sim: float, desc_sim: float) -> "FeatureVector":
        return cls(ff=(0.0,) * FF_SLOTS, path_sim=path_sim, desc_sim=desc_sim)


@dataclass(frozen=True)
class FeedbackTuple:
    """A similar stored query whose selected API is on the current list."""

    record: "FeedbackRecord"
    similarity: float

    @property
    def api_id(self) -> str:
        return self.record.selected_api


def collect_tuples(
    listed_api_ids: Sequence[str], similar: "SimilarPairSet"
) -> List[FeedbackTuple]:
    """Keep similar pairs whose API is on the list; sort by similarity
    descending, equal similarities oldest first."""
    listed = set(listed_api_ids)
    tuples = [
        FeedbackTuple(record=pair.record, similarity=pair.similarity)
        for pair in similar
        if pair.record.selected_api in listed
    ]
    tuples.sort(key=lambda t: (-t.similarity, t.record.timestamp_ms))
    return tuples


def feedback_features(
    listed_api_ids: Sequence[str],
    tuples: Sequence[FeedbackTuple],
    mode: str = "per_api",
) -> Dict[str, Tuple[float, ...]]:
    """Five similarity slots per listed API.

    "per_api" collects each API's own matching similarities (descending,
    truncated to five, zero-padded). "literal" follows the shared-index
    pseudo-code reading instead: slot i holds the i-th strongest tuple's
    similarity when that tuple matches the API, else 0, for the first
    five tuples. Both agree whenever no API matches more than one tuple.
    """
    if mode not in ("per_api", "literal"):
        raise ValueError(f"unknown feedback-feature mode {mode!r}")
    out: Dict[str, Tuple[float, ...]] = {}
    for api_id in listed_api_ids:
        if mode == "per_api":
            sims = [t.similarity for t in tuples if t.api_id == api_id][:FF_SLOTS]
            sims += [0.0] * (FF_SLOTS - len(sims))
        else:
            sims = [0.0] * FF_SLOTS
            for i, t in enumerate(tuples[:FF_SLOTS]):
                if t.api_id == api_id:
                    sims[i] = t.similarity
        out[api_id] = tuple(sims)
    return out


def related_info_features(
    query_bag: BagOfWords, api: ApiEntry, sim: SimilarityIndex
) -> Tuple[float, float]:
    """Similarity of the query to the API path and to its description;
    an empty description contributes 0."""
    return sim.sym(query_bag, api.path_bag), sim.sym(query_bag, api.desc_bag)


class FeatureExtractor:
    """Assembles the per-candidate vectors for one query against the
    current repository snapshot."""

    def __init__(
        self,
        sim: SimilarityIndex,
        epsilon: float = 0.64,
        alg1_mode: str = "per_api",
    ):
        self.sim = sim
        self.epsilon = epsilon
        self.alg1_mode = alg1_mode
        self._rif_cache: Dict[Tuple[Tuple[str, ...], str], Tuple[float, float]] = {}

    def related_info(self, query_bag: BagOfWords, api: ApiEntry) -> Tuple[float, float]:
        key = (query_bag.tokens, api.id)
        hit = self._rif_cache.get(key)
        if hit is None:
            hit = related_info_features(query_bag, api, self.sim)
            self._rif_cache[key] = hit
        return hit

    def extract(
        self,
        query_bag: BagOfWords,
        rec_list: RecommendationList,
        records: Iterable["FeedbackRecord"],
        exclude_bag: Optional[BagOfWords] = None,
    ) -> List[FeatureVector]:
        """One vector per listed API, in list order. With no similar stored
        query the feedback slots are all zero and only the related-information
        features carry signal."""
        from .feedback import FeedbackConfig, lookup_similar

        similar = lookup_similar(
            query_bag,
            list(records),
            self.sim,
            FeedbackConfig(epsilon=self.epsilon),
            exclude_bag=exclude_bag,
        )
        tuples = collect_tuples(rec_list.api_ids, similar)
        ff_map = feedback_features(rec_list.api_ids, tuples, self.alg1_mode)
        vectors = []
        for item in rec_list.items:
            path_sim, desc_sim = self.related_info(query_bag, item.api)
            vectors.append(
                FeatureVector(ff=ff_map[item.api.id], path_sim=path_sim, desc_sim=desc_sim)
            )
        return vectors


def write_feature_csv(
    path,
    api_ids: Sequence[str],
    vectors: Sequence[FeatureVector],
    labels: Optional[Sequence[int]] = None,
) -> None:
    """Debug/eval dump: api_id,ff1..ff5,path_sim,desc_sim,label."""
    if len(api_ids) != len(vectors):
        raise ValueError("api_ids and vectors must have equal length")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("api_id",) + FEATURE_NAMES + ("label",))
        for i, (api_id, vec) in enumerate(zip(api_ids, vectors)):
            label = "" if labels is None else labels[i]
            writer.writerow((api_id,) + vec.as_tuple() + (label,))
