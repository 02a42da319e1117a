import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from feedrank.config import EngineConfig
from feedrank.corpus import EmbeddingRecommender, load_api_corpus
from feedrank.feedback import FeedbackRepository
from feedrank.rank import Engine
from feedrank.textsim import build_idf, load_embeddings

DATA = resources.files("feedrank.data")
SYNTH_DIR = Path(__file__).parent.parent / "datasets" / "synthetic"


@pytest.fixture(scope="session")
def thread_corpus():
    return load_api_corpus(str(DATA / "thread_corpus.jsonl"))


@pytest.fixture(scope="session")
def thread_table():
    return load_embeddings(str(DATA / "thread_embeddings.txt"))


@pytest.fixture(scope="session")
def thread_idf(thread_corpus):
    return build_idf(
        [e.path_bag for e in thread_corpus] + [e.desc_bag for e in thread_corpus]
    )


@pytest.fixture(scope="session")
def thread_recommender(thread_corpus, thread_table, thread_idf):
    return EmbeddingRecommender(thread_corpus, thread_table, thread_idf)


@pytest.fixture
def thread_engine(thread_recommender, thread_table, thread_idf):
    fixed = iter(range(1, 10_000))
    return Engine(
        recommender=thread_recommender,
        table=thread_table,
        idf=thread_idf,
        repo=FeedbackRepository(),
        config=EngineConfig(),
        clock=lambda: next(fixed),
    )
