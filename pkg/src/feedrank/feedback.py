"""Feedback repository: durable (query, selected API) pairs with list snapshots.

Each record snapshots the full list and feature vectors shown to the user,
so training groups derived later are exactly what the user reacted to,
independent of how the repository grows afterwards.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .textsim import BagOfWords, FormatError, SimilarityIndex, preprocess
from .ltr import LabeledGroup
from .features import FeatureVector

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.64


@dataclass(frozen=True)
class FeedbackConfig:
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


@dataclass(frozen=True)
class FeedbackRecord:
    session_id: str
    timestamp_ms: int
    query: str
    selected_api: str
    listed_apis: Tuple[str, ...]
    features: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        if self.selected_api not in self.listed_apis:
            raise ValueError(
                f"selected api {self.selected_api!r} not in the shown list"
            )
        if len(self.features) != len(self.listed_apis):
            raise ValueError("one feature vector required per listed api")
        for fv in self.features:
            if len(fv) != FeatureVector.WIDTH:
                raise ValueError(f"feature vectors must have {FeatureVector.WIDTH} entries")

    @property
    def query_bag(self) -> BagOfWords:
        return preprocess(self.query)

    def to_json(self) -> str:
        return json.dumps(
            {
                "session": self.session_id,
                "ts": self.timestamp_ms,
                "query": self.query,
                "selected": self.selected_api,
                "list": list(self.listed_apis),
                "features": [list(fv) for fv in self.features],
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, text: str) -> "FeedbackRecord":
        obj = json.loads(text)
        return cls(
            session_id=str(obj["session"]),
            timestamp_ms=int(obj["ts"]),
            query=str(obj["query"]),
            selected_api=str(obj["selected"]),
            listed_apis=tuple(str(a) for a in obj["list"]),
            features=tuple(tuple(float(x) for x in fv) for fv in obj["features"]),
        )


class FeedbackRepository:
    """Append-only record log, optionally backed by a JSON Lines file.

    Appends are serialized by the caller (single writer); reads hand out
    immutable snapshots so concurrent readers never see a partial record.
    """

    def __init__(self, path: Optional[Path] = None, records: Sequence[FeedbackRecord] = ()):
        self.path = Path(path) if path is not None else None
        self._records: List[FeedbackRecord] = list(records)
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> Tuple[FeedbackRecord, ...]:
        return tuple(self._records)

    def append(self, record: FeedbackRecord) -> None:
        """Validate and durably append one record; writers are serialized."""
        if not isinstance(record, FeedbackRecord):
            raise TypeError("append expects a FeedbackRecord")
        with self._write_lock:
            if self.path is not None:
                line = record.to_json() + "\n"
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line)
                    fh.flush()
                    os.fsync(fh.fileno())
            self._records.append(record)


def load_repository(path) -> FeedbackRepository:
    """Reload a repository from its log; a missing file is a cold start.

    A trailing line that does not decode (interrupted append) is dropped
    with a warning; any earlier undecodable line is a hard error.
    """
    path = Path(path)
    if not path.exists():
        return FeedbackRepository(path=path)
    records: List[FeedbackRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    numbered = [(i + 1, line) for i, line in enumerate(lines) if line.strip()]
    for pos, (lineno, line) in enumerate(numbered):
        try:
            records.append(FeedbackRecord.from_json(line))
        except (json.JSONDecodeError, KeyError, TypeError):
            if pos == len(numbered) - 1:
                logger.warning("dropping partial trailing record at line %d of %s", lineno, path)
                break
            raise FormatError(f"line {lineno}: malformed feedback record") from None
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    return FeedbackRepository(path=path, records=records)


@dataclass(frozen=True)
class SimilarPair:
    record: FeedbackRecord
    similarity: float


@dataclass(frozen=True)
class SimilarPairSet:
    entries: Tuple[SimilarPair, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def lookup_similar(
    query_bag: BagOfWords,
    records: Sequence[FeedbackRecord],
    sim: SimilarityIndex,
    config: FeedbackConfig = FeedbackConfig(),
    exclude_bag: Optional[BagOfWords] = None,
) -> SimilarPairSet:
    """Records whose stored query is similar to the given one (>= epsilon).

    exclude_bag drops records whose query preprocesses to exactly that bag;
    evaluation uses it to remove duplicates of the query under test.
    """
    entries = []
    for record in records:
        bag = record.query_bag
        if exclude_bag is not None and bag.tokens == exclude_bag.tokens:
            continue
        score = sim.sym(query_bag, bag)
        if score >= config.epsilon:
            entries.append(SimilarPair(record=record, similarity=score))
    return SimilarPairSet(entries=tuple(entries))


def build_training_groups(records: Sequence[FeedbackRecord]) -> List[LabeledGroup]:
    """One labeled group per record: the snapshot's vectors, the selected
    API labeled 1 and every other listed API labeled 0."""
    if not records:
        raise ValueError("no training data")
    groups = []
    for i, record in enumerate(records):
        labels = tuple(
            1 if api == record.selected_api else 0 for api in record.listed_apis
        )
        vectors = tuple(FeatureVector.from_values(fv) for fv in record.features)
        groups.append(
            LabeledGroup(group_id=f"fb-{i:05d}", vectors=vectors, labels=labels)
        )
    return groups
