import numpy as np
import pytest

from feedrank.corpus import ApiCorpus, ApiEntry, EmbeddingRecommender
from feedrank.features import (
    FeatureVector,
    FeedbackTuple,
    collect_tuples,
    feedback_features,
    related_info_features,
    FeatureExtractor,
    write_feature_csv,
)
from feedrank.feedback import FeedbackRecord, SimilarPair, SimilarPairSet
from feedrank.textsim import EmbeddingTable, SimilarityIndex, build_idf, preprocess


def _record(query, selected, listed, ts=0):
    return FeedbackRecord(
        session_id="s",
        timestamp_ms=ts,
        query=query,
        selected_api=selected,
        listed_apis=tuple(listed),
        features=tuple((0.0,) * 7 for _ in listed),
    )


def _pairs(*items):
    return SimilarPairSet(
        entries=tuple(SimilarPair(record=r, similarity=s) for r, s in items)
    )


def test_feature_vector_shape_and_round_trip():
    vec = FeatureVector(ff=(0.9, 0.7, 0, 0, 0), path_sim=0.5, desc_sim=0.25)
    assert vec.as_tuple() == (0.9, 0.7, 0, 0, 0, 0.5, 0.25)
    assert FeatureVector.from_values(vec.as_tuple()) == vec
    np.testing.assert_array_equal(vec.as_array(), np.array(vec.as_tuple()))
    with pytest.raises(ValueError):
        FeatureVector(ff=(1.0,), path_sim=0, desc_sim=0)
    with pytest.raises(ValueError):
        FeatureVector.from_values((0.0,) * 6)


def test_collect_tuples_filters_to_listed_apis():
    listed = ["api.a", "api.b"]
    r1 = _record("q1", "api.a", ["api.a", "api.x"], ts=5)
    r2 = _record("q2", "api.z", ["api.z"], ts=6)
    tuples = collect_tuples(listed, _pairs((r1, 0.7), (r2, 0.9)))
    assert [(t.api_id, t.similarity) for t in tuples] == [("api.a", 0.7)]


def test_collect_tuples_sorted_desc_ties_older_first():
    listed = ["api.a", "api.b"]
    older = _record("q1", "api.a", ["api.a"], ts=1)
    newer = _record("q2", "api.b", ["api.b"], ts=2)
    high = _record("q3", "api.b", ["api.b"], ts=3)
    tuples = collect_tuples(listed, _pairs((newer, 0.7), (high, 0.9), (older, 0.7)))
    assert [(t.api_id, t.similarity, t.record.timestamp_ms) for t in tuples] == [
        ("api.b", 0.9, 3),
        ("api.a", 0.7, 1),
        ("api.b", 0.7, 2),
    ]


def test_collect_tuples_empty_pairs():
    assert collect_tuples(["api.a"], _pairs()) == []


def test_feedback_features_single_tuple_first_slot():
    listed = ["api.a", "api.b", "api.c"]
    record = _record("q", "api.b", ["api.b"])
    tuples = collect_tuples(listed, _pairs((record, 0.72)))
    ff = feedback_features(listed, tuples)
    assert ff["api.b"] == (0.72, 0, 0, 0, 0)
    assert ff["api.a"] == (0, 0, 0, 0, 0)
    assert ff["api.c"] == (0, 0, 0, 0, 0)


def test_feedback_features_collects_per_api_descending():
    listed = ["api.a"]
    t1 = FeedbackTuple(record=_record("q1", "api.a", ["api.a"], ts=1), similarity=0.9)
    t2 = FeedbackTuple(record=_record("q2", "api.a", ["api.a"], ts=2), similarity=0.7)
    ff = feedback_features(listed, [t1, t2])
    assert ff["api.a"] == (0.9, 0.7, 0, 0, 0)


def test_feedback_features_truncates_to_five():
    listed = ["api.b"]
    sims = [0.9, 0.8, 0.75, 0.7, 0.68, 0.65]
    tuples = [
        FeedbackTuple(record=_record(f"q{i}", "api.b", ["api.b"], ts=i), similarity=s)
        for i, s in enumerate(sims)
    ]
    ff = feedback_features(listed, tuples)
    assert ff["api.b"] == (0.9, 0.8, 0.75, 0.7, 0.68)


def test_feedback_features_literal_mode_shared_index():
    listed = ["api.a", "api.b"]
    tuples = [
        FeedbackTuple(record=_record("q1", "api.a", ["api.a"], ts=1), similarity=0.9),
        FeedbackTuple(record=_record("q2", "api.b", ["api.b"], ts=2), similarity=0.8),
        FeedbackTuple(record=_record("q3", "api.a", ["api.a"], ts=3), similarity=0.7),
    ]
    ff = feedback_features(listed, tuples, mode="literal")
    # slot i belongs to the i-th strongest tuple overall
    assert ff["api.a"] == (0.9, 0.0, 0.7, 0, 0)
    assert ff["api.b"] == (0.0, 0.8, 0.0, 0, 0)
    # both readings agree on the single-tuple case
    single = tuples[:1]
    assert feedback_features(listed, single, "literal") == feedback_features(listed, single)


def test_feedback_features_rejects_unknown_mode():
    with pytest.raises(ValueError):
        feedback_features(["api.a"], [], mode="bogus")


@pytest.fixture
def world():
    entries = [
        ApiEntry.build("m.kill", "m.kill.thread", "kill a running thread"),
        ApiEntry.build("m.pars", "m.parse.file", "parse the file"),
        ApiEntry.build("m.empty", "m.empty.call", ""),
    ]
    corpus = ApiCorpus(entries)
    table = EmbeddingTable(
        {
            "kill": [1, 0.2, 0],
            "stop": [0.95, 0.25, 0],
            "run": [0.2, 1, 0],
            "thread": [0, 0, 1],
            "pars": [0.1, 0.9, 0.4],
            "file": [0, 0.8, 0.6],
            "call": [0.4, 0.4, 0.4],
            "m": [0.5, 0.5, 0.5],
        }
    )
    idf = build_idf([e.desc_bag for e in entries if e.desc_bag] + [e.path_bag for e in entries])
    sim = SimilarityIndex(table, idf)
    return corpus, sim


def test_related_info_features_identity_and_empty_desc(world):
    corpus, sim = world
    q = preprocess("kill a running thread")
    path_sim, desc_sim = related_info_features(q, corpus["m.kill"], sim)
    assert desc_sim == pytest.approx(1.0)
    assert 0.0 < path_sim <= 1.0
    _, empty_desc = related_info_features(q, corpus["m.empty"], sim)
    assert empty_desc == 0.0


def test_extract_cold_start_rif_only(world):
    corpus, sim = world
    rec = EmbeddingRecommender(corpus, sim.table, sim.idf)
    rec_list = rec.recommend("kill running thread", 3)
    extractor = FeatureExtractor(sim)
    vectors = extractor.extract(rec_list.query_bag, rec_list, [])
    assert len(vectors) == len(rec_list)
    assert all(v.ff == (0, 0, 0, 0, 0) for v in vectors)
    assert any(v.path_sim > 0 or v.desc_sim > 0 for v in vectors)


def test_extract_one_similar_record_marks_one_api(world):
    corpus, sim = world
    rec = EmbeddingRecommender(corpus, sim.table, sim.idf)
    rec_list = rec.recommend("kill running thread", 3)
    record = _record("stop running thread", "m.kill", list(rec_list.api_ids))
    extractor = FeatureExtractor(sim, epsilon=0.64)
    vectors = extractor.extract(rec_list.query_bag, rec_list, [record])
    nonzero = [
        item.api.id
        for item, v in zip(rec_list.items, vectors)
        if any(x > 0 for x in v.ff)
    ]
    assert nonzero == ["m.kill"]
    # order and length preserved
    assert len(vectors) == 3


def test_extract_ff_values_sorted_non_increasing(world):
    corpus, sim = world
    rec = EmbeddingRecommender(corpus, sim.table, sim.idf)
    rec_list = rec.recommend("kill running thread", 3)
    records = [
        _record("stop running thread", "m.kill", list(rec_list.api_ids), ts=1),
        _record("killing running thread", "m.kill", list(rec_list.api_ids), ts=2),
    ]
    extractor = FeatureExtractor(sim, epsilon=0.5)
    vectors = extractor.extract(rec_list.query_bag, rec_list, records)
    for v in vectors:
        assert list(v.ff) == sorted(v.ff, reverse=True)


def test_write_feature_csv(tmp_path):
    path = tmp_path / "features.csv"
    vectors = [FeatureVector.cold(0.5, 0.25), FeatureVector.cold(0.1, 0.9)]
    write_feature_csv(path, ["api.a", "api.b"], vectors, labels=[1, 0])
    lines = path.read_text().splitlines()
    assert lines[0] == "api_id,ff1,ff2,ff3,ff4,ff5,path_sim,desc_sim,label"
    assert lines[1].startswith("api.a,0.0,0.0,0.0,0.0,0.0,0.5,0.25,1")
