"""Text preprocessing and IDF-weighted embedding similarity.

The similarity between two token bags Q and S is built in four levels:
word-to-word cosine, word-to-bag maximum, an IDF-weighted asymmetric
mean over the query bag, and the symmetric arithmetic mean of the two
asymmetric directions.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Dict, Iterable, Iterator, Mapping, Tuple

import numpy as np

from ._porter import stem


class FormatError(ValueError):
    """Raised when an input file does not match its declared format."""


# Splits on punctuation/whitespace, camelCase boundaries and letter/digit
# boundaries: "java.lang.Thread.start" -> java lang Thread start,
# "newFixedThreadPool" -> new Fixed Thread Pool.
_TOKEN_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+")


def _load_stopwords() -> frozenset:
    text = resources.files("feedrank.data").joinpath("stopwords_en.txt").read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


STOPWORDS = _load_stopwords()


@dataclass(frozen=True)
class BagOfWords:
    """Ordered multiset of lowercase stemmed tokens."""

    tokens: Tuple[str, ...] = ()

    def __post_init__(self):
        for t in self.tokens:
            if not t:
                raise ValueError("empty token in bag")
            if t in STOPWORDS:
                raise ValueError(f"stopword {t!r} in bag")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __bool__(self) -> bool:
        return bool(self.tokens)

    def as_text(self) -> str:
        return " ".join(self.tokens)

    def counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for t in self.tokens:
            out[t] = out.get(t, 0) + 1
        return out


def _stem_fixpoint(token: str) -> str:
    # iterate so re-preprocessing stemmed output is a no-op
    for _ in range(5):
        nxt = stem(token)
        if nxt == token:
            return token
        token = nxt
    return token


@lru_cache(maxsize=65536)
def preprocess(text: str) -> BagOfWords:
    """Lowercase, split, drop stopwords, Porter-stem. Idempotent."""
    tokens = []
    for raw in _TOKEN_RE.findall(text):
        low = raw.lower()
        if low in STOPWORDS:
            continue
        stemmed = _stem_fixpoint(low)
        if stemmed and stemmed not in STOPWORDS:
            tokens.append(stemmed)
    return BagOfWords(tuple(tokens))


class EmbeddingTable:
    """Token embeddings, stored unit-normalized so cosine is a dot product."""

    def __init__(self, vectors: Mapping[str, Iterable[float]]):
        units: Dict[str, np.ndarray] = {}
        dimension = None
        for token, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"vector for {token!r} is not one-dimensional")
            if dimension is None:
                dimension = arr.shape[0]
            elif arr.shape[0] != dimension:
                raise ValueError(
                    f"vector for {token!r} has dimension {arr.shape[0]}, expected {dimension}"
                )
            norm = float(np.linalg.norm(arr))
            if norm == 0.0:
                raise ValueError(f"all-zero vector for token {token!r}")
            units[token] = arr / norm
        if dimension is None:
            raise ValueError("no embeddings")
        self._units = units
        self.dimension = int(dimension)

    def __contains__(self, token: str) -> bool:
        return token in self._units

    def __len__(self) -> int:
        return len(self._units)

    def get(self, token: str):
        return self._units.get(token)

    def tokens(self):
        return self._units.keys()


def load_embeddings(path) -> EmbeddingTable:
    """Parse the text embedding format: optional "<count> <dim>" header,
    then one "token v1 ... vD" line per token."""
    vectors: Dict[str, list] = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    declared_count, declared_dim = int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    if declared_count >= 0 and declared_dim > 0:
                        dim = declared_dim
                        continue
            token, values = parts[0], parts[1:]
            if not values:
                raise FormatError(f"line {lineno}: no vector values for {token!r}")
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise FormatError(
                    f"line {lineno}: expected {dim} values, found {len(values)}"
                )
            if token in vectors:
                raise FormatError(f"line {lineno}: duplicate token {token!r}")
            try:
                vec = [float(v) for v in values]
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vec):
                raise FormatError(f"line {lineno}: non-finite value")
            if not any(vec):
                raise FormatError(f"line {lineno}: all-zero vector for {token!r}")
            vectors[token] = vec
    if not vectors:
        raise FormatError("no embeddings")
    return EmbeddingTable(vectors)


@dataclass(frozen=True)
class IdfTable:
    """Document frequencies plus the derived idf weighting.

    mode "smooth" weighs rare words more: ln((1+docs)/(1+df)) + 1.
    mode "raw_df" uses the bare document-containing count.
    """

    doc_count: int
    df: Mapping[str, int] = field(default_factory=dict)
    mode: str = "smooth"

    def __post_init__(self):
        if self.doc_count < 1:
            raise ValueError("doc_count must be positive")
        if self.mode not in ("smooth", "raw_df"):
            raise ValueError(f"unknown idf mode {self.mode!r}")
        for token, count in self.df.items():
            if not 0 <= count <= self.doc_count:
                raise ValueError(f"df({token!r})={count} outside [0, {self.doc_count}]")

    def weight(self, token: str) -> float:
        df = self.df.get(token, 0)
        if self.mode == "raw_df":
            return float(df)
        return math.log((1.0 + self.doc_count) / (1.0 + df)) + 1.0

    @property
    def weights(self) -> Dict[str, float]:
        return {token: self.weight(token) for token in self.df}


def build_idf(corpus: Iterable[BagOfWords], mode: str = "smooth") -> IdfTable:
    """Count document frequencies over a corpus of bags."""
    df: Dict[str, int] = {}
    n = 0
    for bag in corpus:
        n += 1
        for token in set(bag.tokens):
            df[token] = df.get(token, 0) + 1
    if n == 0:
        raise ValueError("empty corpus")
    return IdfTable(doc_count=n, df=df, mode=mode)


def load_idf(path, mode: str = "smooth") -> IdfTable:
    """Parse the idf file format: "#docs=<N>" header then "token<TAB>df" lines."""
    doc_count = None
    df: Dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#docs="):
                doc_count = int(line[len("#docs="):])
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"line {lineno}: expected token<TAB>df")
            try:
                df[parts[0]] = int(parts[1])
            except ValueError:
                raise FormatError(f"line {lineno}: bad df value {parts[1]!r}") from None
    if doc_count is None:
        raise FormatError("missing #docs= header")
    return IdfTable(doc_count=doc_count, df=df, mode=mode)


def save_idf(table: IdfTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#docs={table.doc_count}\n")
        for token in sorted(table.df):
            fh.write(f"{token}\t{table.df[token]}\n")


def word_sim(w: str, w2: str, table: EmbeddingTable) -> float:
    """Cosine of the two token embeddings; 0 when either is out of vocabulary."""
    u = table.get(w)
    v = table.get(w2)
    if u is None or v is None:
        return 0.0
    return float(min(1.0, max(-1.0, float(u @ v))))


def word_to_bag_sim(w: str, bag: BagOfWords, table: EmbeddingTable) -> float:
    """max over w' in bag of word_sim(w, w'); 0 for an empty bag."""
    if not bag:
        return 0.0
    return max(word_sim(w, w2, table) for w2 in bag)


def asym_sim(q: BagOfWords, s: BagOfWords, table: EmbeddingTable, idf: IdfTable) -> float:
    """IDF-weighted mean over q of the word-to-bag similarity against s.

    Duplicates in q count per occurrence. An all-zero weight total (possible
    only in raw_df mode) yields 0.
    """
    if not q:
        raise ValueError("empty query bag")
    total = 0.0
    acc = 0.0
    for w in q:
        weight = idf.weight(w)
        total += weight
        if weight != 0.0:
            acc += word_to_bag_sim(w, s, table) * weight
    if total == 0.0:
        return 0.0
    return acc / total


def sym_sim(q: BagOfWords, s: BagOfWords, table: EmbeddingTable, idf: IdfTable) -> float:
    """Arithmetic mean of the two asymmetric directions."""
    if not q or not s:
        raise ValueError("empty bag")
    return (asym_sim(q, s, table, idf) + asym_sim(s, q, table, idf)) / 2.0


def sym_sim_or_zero(q: BagOfWords, s: BagOfWords, table: EmbeddingTable, idf: IdfTable) -> float:
    """Total variant of sym_sim: an empty side contributes no evidence."""
    if not q or not s:
        return 0.0
    return sym_sim(q, s, table, idf)


class SimilarityIndex:
    """Memoizing front-end for repeated bag-pair similarity lookups."""

    def __init__(self, table: EmbeddingTable, idf: IdfTable):
        self.table = table
        self.idf = idf
        self._cache: Dict[Tuple[Tuple[str, ...], Tuple[str, ...]], float] = {}

    def sym(self, q: BagOfWords, s: BagOfWords) -> float:
        key = (q.tokens, s.tokens)
        if key[0] > key[1]:
            key = (key[1], key[0])
        hit = self._cache.get(key)
        if hit is None:
            hit = sym_sim_or_zero(q, s, self.table, self.idf)
            self._cache[key] = hit
        return hit
