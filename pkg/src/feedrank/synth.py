"""Deterministic synthetic world for desk-scale experiments.

Queries come in topic families (paraphrases sharing one ground-truth API)
over an engineered embedding space: synonyms of one topic sit close
together, different topics are near-orthogonal, and filler words are
shared across everything. A noise-wrapped base recommender then degrades
the initial ordering so there is headroom for feedback to recover.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np

from .corpus import ApiCorpus, ApiEntry, BaseRecommender, EmbeddingRecommender, make_list
from .evalstat import EvalQuery, load_dataset, save_dataset
from .textsim import EmbeddingTable, IdfTable, build_idf, load_embeddings, load_idf, preprocess, save_idf

# consonant-only alphabet: tokens built from it are Porter fixed points
_ALPHA = "bcdfghjklmnpqrtvwz"


def _syn_token(topic: int, synonym: int) -> str:
    return "v" + _ALPHA[topic // len(_ALPHA)] + _ALPHA[topic % len(_ALPHA)] + _ALPHA[synonym]

def _filler_token(i: int) -> str:
    return "w" + _ALPHA[i // len(_ALPHA)] + _ALPHA[i % len(_ALPHA)]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


class NoisyRecommender(BaseRecommender):
    """Adds query-keyed deterministic score noise to a clean recommender,
    then re-sorts; the same query always yields the same perturbed list."""

    def __init__(self, inner: EmbeddingRecommender, amplitude: float = 0.6, noise_seed: int = 0):
        self.inner = inner
        self.amplitude = amplitude
        self.noise_seed = noise_seed

    @property
    def sim(self):
        return self.inner.sim

    @property
    def corpus(self):
        return self.inner.corpus

    def _rng(self, query_text: str) -> np.random.Generator:
        digest = hashlib.sha256(f"{self.noise_seed}|{query_text}".encode("utf-8")).digest()
        return np.random.default_rng(int.from_bytes(digest[:8], "big"))

    def recommend(self, query_text: str, n: int = 10):
        full = self.inner.recommend(query_text, len(self.inner.corpus))
        noise = self.amplitude * self._rng(query_text).random(len(full))
        scored = [
            (item.api, item.initial_score + noise[i]) for i, item in enumerate(full.items)
        ]
        scored.sort(key=lambda pair: (-pair[1], pair[0].id))
        return make_list(query_text, scored[:n])


@dataclass
class SynthWorld:
    corpus: ApiCorpus
    table: EmbeddingTable
    idf: IdfTable
    dataset: List[EvalQuery]
    amplitude: float
    noise_seed: int

    def clean_recommender(self) -> EmbeddingRecommender:
        return EmbeddingRecommender(self.corpus, self.table, self.idf)

    def noisy_recommender(self) -> NoisyRecommender:
        return NoisyRecommender(self.clean_recommender(), self.amplitude, self.noise_seed)


def generate_world(
    n_topics: int = 40,
    paraphrases: int = 5,
    synonyms: int = 4,
    distractors_per_topic: int = 2,
    n_fillers: int = 24,
    dim: int = 8,
    seed: int = 7,
    synonym_spread: float = 0.18,
    amplitude: float = 0.6,
    noise_seed: int = 0,
) -> SynthWorld:
    rng = np.random.default_rng(seed)

    fillers = [_filler_token(i) for i in range(n_fillers)]
    vectors: Dict[str, np.ndarray] = {"libx": _unit(rng.normal(size=dim))}
    for token in fillers:
        vectors[token] = _unit(rng.normal(size=dim))

    topic_tokens: List[List[str]] = []
    for t in range(n_topics):
        base = _unit(rng.normal(size=dim))
        row = []
        for s in range(synonyms):
            token = _syn_token(t, s)
            vectors[token] = _unit(base + synonym_spread * rng.normal(size=dim))
            row.append(token)
        topic_tokens.append(row)

    for token in vectors:
        bag = preprocess(token)
        if bag.tokens != (token,):
            raise AssertionError(f"token {token!r} is not preprocessing-stable: {bag.tokens}")

    entries: List[ApiEntry] = []
    dataset: List[EvalQuery] = []
    for t in range(n_topics):
        syns = topic_tokens[t]
        api_fillers = [fillers[(t + j) % n_fillers] for j in range(2)]
        path = f"libx.{syns[0]}.{syns[1]}"
        description = " ".join(syns[:3] + api_fillers)
        api_id = path
        entries.append(ApiEntry.build(api_id, path, description))
        for p in range(paraphrases):
            picked = [syns[(p + j) % synonyms] for j in range(2 + (p % 2))]
            extra = [fillers[(t * paraphrases + p + j) % n_fillers] for j in range(1 + (p + 1) % 2)]
            text = " ".join(picked + extra)
            dataset.append(EvalQuery(query=text, relevant=frozenset([api_id])))
        for d in range(distractors_per_topic):
            k = t * distractors_per_topic + d
            f1 = fillers[k % n_fillers]
            f2 = fillers[(k + 5) % n_fillers]
            stray = topic_tokens[(t + d + 1) % n_topics][synonyms - 1]
            d_path = f"libx.{f1}.d{_ALPHA[k // len(_ALPHA)]}{_ALPHA[k % len(_ALPHA)]}"
            entries.append(
                ApiEntry.build(d_path, d_path, " ".join([stray, f1, f2]))
            )

    corpus = ApiCorpus(entries)
    docs = [preprocess(q.query) for q in dataset]
    docs += [entry.desc_bag for entry in corpus]
    docs += [entry.path_bag for entry in corpus]
    idf = build_idf(docs)
    table = EmbeddingTable(vectors)
    return SynthWorld(
        corpus=corpus,
        table=table,
        idf=idf,
        dataset=dataset,
        amplitude=amplitude,
        noise_seed=noise_seed,
    )


def write_world(world: SynthWorld, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "corpus.jsonl", "w", encoding="utf-8") as fh:
        import json

        for entry in world.corpus:
            fh.write(
                json.dumps(
                    {"id": entry.id, "path": entry.path, "description": entry.description}
                )
                + "\n"
            )
    with open(directory / "embeddings.txt", "w", encoding="utf-8") as fh:
        tokens = sorted(world.table.tokens())
        fh.write(f"{len(tokens)} {world.table.dimension}\n")
        for token in tokens:
            vec = world.table.get(token)
            fh.write(token + " " + " ".join(repr(float(x)) for x in vec) + "\n")
    save_idf(world.idf, directory / "idf.txt")
    save_dataset(world.dataset, directory / "queries.jsonl")
    (directory / "world.cfg").write_text(
        f"amplitude={world.amplitude!r}\nnoise_seed={world.noise_seed}\n", encoding="utf-8"
    )


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="regenerate the synthetic world")
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--amplitude", type=float, default=0.6)
    args = parser.parse_args(argv)
    write_world(generate_world(seed=args.seed, amplitude=args.amplitude), args.out_dir)
    return 0


def load_world(directory) -> SynthWorld:
    from .corpus import load_api_corpus

    directory = Path(directory)
    corpus = load_api_corpus(directory / "corpus.jsonl")
    table = load_embeddings(directory / "embeddings.txt")
    idf = load_idf(directory / "idf.txt")
    dataset = load_dataset(directory / "queries.jsonl")
    amplitude, noise_seed = 0.6, 0
    cfg = directory / "world.cfg"
    if cfg.exists():
        for line in cfg.read_text(encoding="utf-8").splitlines():
            key, _, value = line.partition("=")
            if key == "amplitude":
                amplitude = float(value)
            elif key == "noise_seed":
                noise_seed = int(value)
    return SynthWorld(
        corpus=corpus,
        table=table,
        idf=idf,
        dataset=dataset,
        amplitude=amplitude,
        noise_seed=noise_seed,
    )


if __name__ == "__main__":
    raise SystemExit(main())
