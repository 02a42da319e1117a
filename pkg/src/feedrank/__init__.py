"""feedrank: feedback-boosted re-ranking for query-based API recommendation."""

from .config import EngineConfig, load_config
from .corpus import (
    ApiCorpus,
    ApiEntry,
    BaseRecommender,
    EmbeddingRecommender,
    RankedListRecommender,
    RecommendationList,
    base_recommend,
    load_api_corpus,
)
from .features import FeatureExtractor, FeatureVector
from .feedback import (
    FeedbackConfig,
    FeedbackRecord,
    FeedbackRepository,
    build_training_groups,
    load_repository,
    lookup_similar,
)
from .active import ALParams, LogisticScorer, OracleStore, al_loop, select_uncertain
from .ltr import LabeledGroup, MartModel, MartParams, MartRanker, train
from .rank import Engine, RankedResult, combine, normalize_scores, rerank
from .textsim import (
    BagOfWords,
    EmbeddingTable,
    IdfTable,
    asym_sim,
    build_idf,
    load_embeddings,
    preprocess,
    sym_sim,
    word_sim,
    word_to_bag_sim,
)

__version__ = "0.1.0"

__all__ = [
    "ALParams",
    "ApiCorpus",
    "ApiEntry",
    "BagOfWords",
    "BaseRecommender",
    "EmbeddingRecommender",
    "EmbeddingTable",
    "Engine",
    "EngineConfig",
    "FeatureExtractor",
    "FeatureVector",
    "FeedbackConfig",
    "FeedbackRecord",
    "FeedbackRepository",
    "IdfTable",
    "LabeledGroup",
    "LogisticScorer",
    "MartModel",
    "MartParams",
    "MartRanker",
    "OracleStore",
    "RankedListRecommender",
    "RankedResult",
    "RecommendationList",
    "al_loop",
    "asym_sim",
    "base_recommend",
    "build_idf",
    "build_training_groups",
    "combine",
    "load_api_corpus",
    "load_config",
    "load_embeddings",
    "load_repository",
    "lookup_similar",
    "normalize_scores",
    "preprocess",
    "rerank",
    "select_uncertain",
    "sym_sim",
    "train",
    "word_sim",
    "word_to_bag_sim",
]
