"""API corpus ingestion and base recommenders.

The engine consumes an initial candidate list from any recommender that
maps a query to a RecommendationList; two implementations are provided,
an embedding-similarity recommender over a local corpus and an adapter
that replays externally produced ranked lists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

from .textsim import (
    BagOfWords,
    EmbeddingTable,
    FormatError,
    IdfTable,
    SimilarityIndex,
    preprocess,
)

DEFAULT_TOP_N = 10


@dataclass(frozen=True)
class ApiEntry:
    id: str
    path: str
    description: str
    path_bag: BagOfWords
    desc_bag: BagOfWords

    @classmethod
    def build(cls, id: str, path: str, description: str) -> "ApiEntry":
        if not id:
            raise ValueError("empty api id")
        if not path:
            raise ValueError(f"api {id!r}: empty path")
        return cls(
            id=id,
            path=path,
            description=description,
            path_bag=preprocess(path),
            desc_bag=preprocess(description),
        )


class ApiCorpus:
    """Immutable id-indexed collection of ApiEntry."""

    def __init__(self, entries: List[ApiEntry]):
        by_id: Dict[str, ApiEntry] = {}
        for entry in entries:
            if entry.id in by_id:
                raise ValueError(f"duplicate id {entry.id!r}")
            by_id[entry.id] = entry
        self._entries = tuple(entries)
        self._by_id = by_id

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[ApiEntry]:
        return iter(self._entries)

    def __contains__(self, api_id: str) -> bool:
        return api_id in self._by_id

    def get(self, api_id: str) -> Optional[ApiEntry]:
        return self._by_id.get(api_id)

    def __getitem__(self, api_id: str) -> ApiEntry:
        return self._by_id[api_id]


def load_api_corpus(path) -> ApiCorpus:
    """Parse the JSON Lines corpus: {"id", "path", "description"} per line."""
    entries: List[ApiEntry] = []
    seen: Dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or not {"id", "path", "description"} <= obj.keys():
                raise FormatError(f"line {lineno}: missing id/path/description")
            api_id = str(obj["id"])
            if api_id in seen:
                raise FormatError(f"duplicate id {api_id!r} at line {lineno}")
            seen[api_id] = lineno
            try:
                entries.append(ApiEntry.build(api_id, str(obj["path"]), str(obj["description"])))
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
    return ApiCorpus(entries)


@dataclass(frozen=True)
class RecommendationItem:
    api: ApiEntry
    initial_rank: int
    initial_score: float


@dataclass(frozen=True)
class RecommendationList:
    """The initial top-N candidate list for one query."""

    query_text: str
    query_bag: BagOfWords
    items: Tuple[RecommendationItem, ...]

    def __post_init__(self):
        seen = set()
        for i, item in enumerate(self.items, start=1):
            if item.initial_rank != i:
                raise ValueError("ranks must be contiguous from 1")
            if item.api.id in seen:
                raise ValueError(f"duplicate api id {item.api.id!r}")
            seen.add(item.api.id)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def api_ids(self) -> Tuple[str, ...]:
        return tuple(item.api.id for item in self.items)

    def get(self, api_id: str) -> Optional[RecommendationItem]:
        for item in self.items:
            if item.api.id == api_id:
                return item
        return None


def make_list(query_text: str, scored: List[Tuple[ApiEntry, float]]) -> RecommendationList:
    items = tuple(
        RecommendationItem(api=api, initial_rank=i, initial_score=float(score))
        for i, (api, score) in enumerate(scored, start=1)
    )
    return RecommendationList(query_text=query_text, query_bag=preprocess(query_text), items=items)


class BaseRecommender:
    """Interface for initial list providers: query text in, ranked list out."""

    def recommend(self, query_text: str, n: int = DEFAULT_TOP_N) -> RecommendationList:
        raise NotImplementedError


class EmbeddingRecommender(BaseRecommender):
    """Scores corpus entries by the mean of path and description similarity.

    Ties break toward the lexicographically smaller id so identical inputs
    always reproduce the same list.
    """

    def __init__(self, corpus: ApiCorpus, table: EmbeddingTable, idf: IdfTable):
        if len(corpus) == 0:
            raise ValueError("empty corpus")
        self.corpus = corpus
        self.sim = SimilarityIndex(table, idf)

    def score(self, query_bag: BagOfWords, entry: ApiEntry) -> float:
        return 0.5 * self.sim.sym(query_bag, entry.path_bag) + 0.5 * self.sim.sym(
            query_bag, entry.desc_bag
        )

    def recommend(self, query_text: str, n: int = DEFAULT_TOP_N) -> RecommendationList:
        if n < 1:
            raise ValueError("n must be >= 1")
        query_bag = preprocess(query_text)
        scored = [(entry, self.score(query_bag, entry)) for entry in self.corpus]
        scored.sort(key=lambda pair: (-pair[1], pair[0].id))
        return make_list(query_text, scored[:n])


class RankedListRecommender(BaseRecommender):
    """Adapter replaying ranked lists produced by an external tool.

    The list file is JSON Lines with fields "query" and ordered "api_ids";
    queries are matched on their preprocessed form. Items are scored 1/rank
    so downstream invariants (non-increasing scores) hold.
    """

    def __init__(self, corpus: ApiCorpus, lists: Dict[str, List[str]]):
        self.corpus = corpus
        self._lists = dict(lists)

    @classmethod
    def load(cls, corpus: ApiCorpus, path) -> "RankedListRecommender":
        lists: Dict[str, List[str]] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
                if "query" not in obj or "api_ids" not in obj:
                    raise FormatError(f"line {lineno}: missing query/api_ids")
                key = preprocess(str(obj["query"])).as_text()
                ids = [str(a) for a in obj["api_ids"]]
                unknown = [a for a in ids if a not in corpus]
                if unknown:
                    raise FormatError(f"line {lineno}: unknown api ids {unknown}")
                lists[key] = ids
        return cls(corpus, lists)

    def recommend(self, query_text: str, n: int = DEFAULT_TOP_N) -> RecommendationList:
        if n < 1:
            raise ValueError("n must be >= 1")
        key = preprocess(query_text).as_text()
        ids = self._lists.get(key)
        if ids is None:
            raise KeyError(f"no ranked list for query {query_text!r}")
        scored = [(self.corpus[a], 1.0 / (i + 1)) for i, a in enumerate(ids[:n])]
        return make_list(query_text, scored)


def base_recommend(
    query_text: str,
    corpus: ApiCorpus,
    n: int,
    table: EmbeddingTable,
    idf: IdfTable,
) -> RecommendationList:
    """Top-n corpus entries for a query via the embedding recommender."""
    return EmbeddingRecommender(corpus, table, idf).recommend(query_text, n)
