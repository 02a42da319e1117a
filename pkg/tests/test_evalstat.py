import json

import numpy as np
import pytest

from feedrank.config import EngineConfig
from feedrank.evalstat import (
    EvalPipeline,
    EvalQuery,
    ExperimentReport,
    QueryOutcome,
    REPORT_COLUMNS,
    a12,
    accumulation_experiment,
    bonferroni_adjust,
    cross_validate,
    hit_at_k,
    load_dataset,
    mann_whitney_u,
    mean_average_precision,
    mean_reciprocal_rank,
    overhead_benchmark,
    pseudo_user_experiment,
    save_dataset,
)
from feedrank.synth import generate_world
from feedrank.textsim import FormatError

import oracles


def _outcome(ranked, relevant, qid="q"):
    return QueryOutcome(query_id=qid, ranked_ids=tuple(ranked), relevant_ids=frozenset(relevant))


def _outcomes_first_relevant_at(*positions, length=12):
    outs = []
    for i, pos in enumerate(positions):
        ranked = [f"x{i}.{j}" for j in range(length)]
        relevant = {ranked[pos - 1]} if pos <= length else {"missing"}
        outs.append(_outcome(ranked, relevant, qid=f"q{i}"))
    return outs


# ----------------------------------------------------------------------
# metrics
# ----------------------------------------------------------------------

def test_hit_at_k_counting():
    outs = _outcomes_first_relevant_at(1, 3, 11)
    assert hit_at_k(outs, 3) == pytest.approx(2 / 3)


def test_hit_at_k_beyond_list_length():
    outs = _outcomes_first_relevant_at(1, 3, 11)
    assert hit_at_k(outs, 50) == hit_at_k(outs, 12)


def test_hit_at_k_all_miss():
    outs = _outcomes_first_relevant_at(13, 13, length=12)
    assert hit_at_k(outs, 5) == 0.0


def test_hit_at_k_monotone_in_k():
    outs = _outcomes_first_relevant_at(1, 2, 5, 9, 13)
    values = [hit_at_k(outs, k) for k in range(1, 14)]
    assert values == sorted(values)


def test_hit_at_k_validation():
    with pytest.raises(ValueError):
        hit_at_k([], 1)
    with pytest.raises(ValueError):
        hit_at_k(_outcomes_first_relevant_at(1), 0)


def test_map_two_relevant_hand_value():
    out = _outcome(["a", "b", "c", "d"], {"a", "c"})
    assert mean_average_precision([out]) == pytest.approx(0.83333, abs=1e-5)


def test_map_single_relevant_cases():
    assert mean_average_precision([_outcome(["a", "b"], {"a"})]) == 1.0
    ranked = [f"i{j}" for j in range(10)]
    assert mean_average_precision([_outcome(ranked, {"i9"})]) == pytest.approx(0.1)


def test_map_excludes_empty_relevant_with_warning(caplog):
    good = _outcome(["a"], {"a"}, qid="good")
    bad = QueryOutcome(query_id="bad", ranked_ids=("a",), relevant_ids=frozenset())
    with caplog.at_level("WARNING"):
        value = mean_average_precision([good, bad])
    assert value == 1.0
    assert any("bad" in m for m in caplog.messages)


def test_mrr_hand_value():
    outs = _outcomes_first_relevant_at(1, 2, 4)
    assert mean_reciprocal_rank(outs) == pytest.approx(0.58333, abs=1e-5)


def test_mrr_all_first():
    outs = _outcomes_first_relevant_at(1, 1, 1)
    assert mean_reciprocal_rank(outs) == 1.0


def test_mrr_missing_contributes_zero():
    outs = _outcomes_first_relevant_at(13, length=12)
    assert mean_reciprocal_rank(outs) == 0.0


def test_map_equals_mrr_for_single_relevant_queries():
    rng = np.random.default_rng(2)
    outs = _outcomes_first_relevant_at(*rng.integers(1, 12, size=20))
    assert mean_average_precision(outs) == pytest.approx(mean_reciprocal_rank(outs))


# ----------------------------------------------------------------------
# statistics
# ----------------------------------------------------------------------

A_SAMPLE = [0.9, 0.8, 0.85, 0.95, 0.88]
B_SAMPLE = [0.5, 0.55, 0.6, 0.45, 0.52]


def test_mann_whitney_exact_dominant_samples():
    u, p = mann_whitney_u(A_SAMPLE, B_SAMPLE)
    assert u == 25.0
    assert p == pytest.approx(2 / 252, abs=1e-12)


def test_mann_whitney_identical_samples():
    _, p = mann_whitney_u([1, 2, 3], [1, 2, 3])
    assert p == pytest.approx(1.0)


def test_mann_whitney_shifted_minimal_p():
    a = [1.0, 2.0, 3.0, 4.0, 5.0]
    _, p = mann_whitney_u([x + 10 for x in a], a)
    assert p == pytest.approx(2 / 252, abs=1e-12)


def test_mann_whitney_exact_matches_independent_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = list(rng.normal(size=rng.integers(2, 7)))
        b = list(rng.normal(size=rng.integers(2, 7)))
        _, p = mann_whitney_u(a, b)
        assert p == pytest.approx(oracles.exact_mwu_two_sided_p(a, b), abs=1e-12)


def test_mann_whitney_normal_approx_close_to_exact_n8():
    rng = np.random.default_rng(13)
    for _ in range(10):
        a = list(rng.normal(0.4, 1.0, size=8))
        b = list(rng.normal(0.0, 1.0, size=8))
        _, p_exact = mann_whitney_u(a, b)
        # force the large-sample path by duplicating nothing: call internals
        from feedrank import evalstat

        old = evalstat.EXACT_LIMIT
        evalstat.EXACT_LIMIT = 0
        try:
            _, p_norm = mann_whitney_u(a, b)
        finally:
            evalstat.EXACT_LIMIT = old
        assert abs(p_exact - p_norm) < 0.02


def test_mann_whitney_validation():
    with pytest.raises(ValueError):
        mann_whitney_u([], [1])


def test_a12_dominant_is_one():
    assert a12(A_SAMPLE, B_SAMPLE) == pytest.approx(1.0)


def test_a12_identical_is_half():
    assert a12([1, 2, 3], [1, 2, 3]) == pytest.approx(0.5)


def test_a12_complementarity():
    rng = np.random.default_rng(17)
    for _ in range(20):
        a = list(rng.normal(size=6))
        b = list(rng.normal(size=9))
        assert a12(a, b) + a12(b, a) == pytest.approx(1.0, abs=1e-12)


def test_a12_in_unit_interval():
    rng = np.random.default_rng(19)
    for _ in range(20):
        a = list(rng.normal(size=5))
        b = list(rng.normal(size=5))
        assert 0.0 <= a12(a, b) <= 1.0


def test_bonferroni():
    assert bonferroni_adjust([0.01, 0.2, 0.5]) == pytest.approx([0.03, 0.6, 1.0])


# ----------------------------------------------------------------------
# datasets and reports
# ----------------------------------------------------------------------

def test_dataset_round_trip(tmp_path):
    queries = [
        EvalQuery(query="kill thread", relevant=frozenset(["api.a"])),
        EvalQuery(query="parse file", relevant=frozenset(["api.b", "api.c"])),
    ]
    path = tmp_path / "queries.jsonl"
    save_dataset(queries, path)
    assert load_dataset(path) == queries


def test_dataset_rejects_empty_relevant(tmp_path):
    path = tmp_path / "queries.jsonl"
    path.write_text(json.dumps({"query": "x", "relevant_apis": []}) + "\n")
    with pytest.raises(FormatError):
        load_dataset(path)


def test_report_csv_columns(tmp_path):
    report = ExperimentReport()
    report.add(config="mean", fraction=0.5, hit1=0.7, p=0.01, a12=1.0)
    path = tmp_path / "report.csv"
    report.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert lines[1].startswith("mean,0.5,0.7")
    report.to_json(tmp_path / "report.json")
    assert json.loads((tmp_path / "report.json").read_text())[0]["hit1"] == 0.7


def test_report_rejects_unknown_columns():
    with pytest.raises(ValueError):
        ExperimentReport().add(config="x", bogus=1)


# ----------------------------------------------------------------------
# experiment protocols (desk scale)
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_world():
    return generate_world(n_topics=8, paraphrases=5, distractors_per_topic=1, seed=5)


@pytest.fixture(scope="module")
def small_pipeline(small_world):
    return EvalPipeline(
        small_world.noisy_recommender(),
        small_world.table,
        small_world.idf,
        EngineConfig(trees=10),
    )


def test_cross_validate_shape_and_determinism(small_world, small_pipeline):
    dataset = small_world.dataset
    report = cross_validate(dataset, small_pipeline, folds=4, repeats=2, seed=1)
    configs = [row["config"] for row in report.rows]
    assert configs == ["cv-rep0", "cv-rep1", "cv-mean", "cv-base"]
    for row in report.rows:
        for key in ("hit1", "hit3", "hit5", "map", "mrr"):
            assert 0.0 <= row[key] <= 1.0
    again = cross_validate(dataset, small_pipeline, folds=4, repeats=2, seed=1)
    assert [r["hit1"] for r in report.rows] == [r["hit1"] for r in again.rows]


def test_cross_validate_fixed_small_repository(small_world, small_pipeline):
    # capping train_pairs keeps the per-fold repository at the cap
    report = cross_validate(
        small_world.dataset, small_pipeline, folds=4, repeats=1, seed=2, train_pairs=10
    )
    assert any(row["config"] == "cv-mean" for row in report.rows)
    engine = small_pipeline.make_engine()
    rng = np.random.default_rng(2)
    order = rng.permutation(len(small_world.dataset))
    fold_of = {int(q): i % 4 for i, q in enumerate(order)}
    train = [small_world.dataset[i] for i in range(len(small_world.dataset)) if fold_of[i] != 0]
    picked = rng.permutation(len(train))[:10]
    seeded = small_pipeline.seed_feedback(engine, [train[i] for i in sorted(picked)])
    assert seeded <= 10


def test_cross_validate_requires_enough_queries(small_pipeline):
    tiny = [EvalQuery(query="q", relevant=frozenset(["x"]))] * 3
    with pytest.raises(ValueError):
        cross_validate(tiny, small_pipeline, folds=10)


def test_accumulation_fraction_zero_is_base(small_world, small_pipeline):
    report = accumulation_experiment(
        small_world.dataset, small_pipeline, fractions=(0.0, 1.0), seeds=(0,)
    )
    zero_row = next(r for r in report.rows if r["config"] == "seed0" and r["fraction"] == 0.0)
    # disabled repo: the reranked order equals the base order, so metrics
    # match the raw noisy recommender on the same test split
    engine = small_pipeline.make_engine()
    rng = np.random.default_rng(0)
    order = rng.permutation(len(small_world.dataset))
    n_test = max(1, int(round(0.25 * len(small_world.dataset))))
    test = [small_world.dataset[i] for i in order[:n_test]]
    base, ranked, _ = small_pipeline.evaluate(engine, test)
    assert [o.ranked_ids for o in base] == [o.ranked_ids for o in ranked]
    assert zero_row["hit1"] == pytest.approx(hit_at_k(base, 1))


def test_accumulation_report_shape(small_world, small_pipeline):
    fractions = (0.0, 0.5, 1.0)
    report = accumulation_experiment(
        small_world.dataset, small_pipeline, fractions=fractions, seeds=(0, 1)
    )
    seed_rows = [r for r in report.rows if r["config"].startswith("seed")]
    mean_rows = [r for r in report.rows if r["config"] == "mean"]
    assert len(seed_rows) == len(fractions) * 2
    assert [r["fraction"] for r in mean_rows] == list(fractions)
    nonzero_means = [r for r in mean_rows if r["fraction"] != 0.0]
    assert all("p" in r and "a12" in r for r in nonzero_means)


def test_pseudo_user_experiment(small_world, small_pipeline):
    report = pseudo_user_experiment(small_world.dataset, small_pipeline, n_queries=12, seed=3)
    assert [r["config"] for r in report.rows] == ["base", "reranked"]
    for row in report.rows:
        assert 0.0 <= row["hit1"] <= 1.0


def test_pseudo_user_repo_bounded(small_world, small_pipeline):
    # repository grows by at most one record per issued query
    engine_count = 12
    report = pseudo_user_experiment(small_world.dataset, small_pipeline, n_queries=engine_count, seed=3)
    assert report.rows[1]["train_s"] >= 0.0


def test_overhead_benchmark_columns(small_world, small_pipeline):
    report = overhead_benchmark(small_pipeline, small_world.dataset[:6])
    (row,) = report.rows
    assert row["config"] == "overhead"
    assert row["extract_s"] >= 0 and row["train_s"] > 0 and row["rank_s"] >= 0


def test_overhead_benchmark_zero_queries(small_pipeline):
    with pytest.raises(ValueError, match="no queries"):
        overhead_benchmark(small_pipeline, [])
