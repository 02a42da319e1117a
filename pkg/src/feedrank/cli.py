"""Command-line interface: serve the HTTP API, run one-shot queries,
retrain from the feedback log, and drive the batch experiments."""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional, Tuple

import click

from .active import OracleStore
from .config import EngineConfig, load_config
from .corpus import EmbeddingRecommender, load_api_corpus
from .evalstat import (
    EvalPipeline,
    accumulation_experiment,
    cross_validate,
    load_dataset,
    overhead_benchmark,
    pseudo_user_experiment,
)
from .feedback import load_repository
from .rank import Engine
from .synth import NoisyRecommender
from .textsim import FormatError, build_idf, load_embeddings, load_idf

_CONFIG_FLAGS = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="key=value config file"),
    click.option("--epsilon", type=float, default=None, help="similar-query threshold"),
    click.option("--trees", type=int, default=None, help="boosting rounds"),
    click.option("--learning-rate", type=float, default=None),
    click.option("--top-n", type=int, default=None, help="initial list length"),
    click.option("--delta-metric", type=click.Choice(["MAP", "NDCG"]), default=None),
    click.option("--seed", type=int, default=None),
]


def _with_config_flags(fn):
    for flag in reversed(_CONFIG_FLAGS):
        fn = flag(fn)
    return fn


def _resolve_config(config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed) -> EngineConfig:
    config = EngineConfig()
    if config_path:
        config = load_config(config_path, config)
    return config.with_overrides(
        epsilon=epsilon,
        trees=trees,
        learning_rate=learning_rate,
        top_n=top_n,
        delta_metric=delta_metric,
        seed=seed,
    )


def _load_world(data_dir: Path, config: EngineConfig, noise: float = 0.0, noise_seed: int = 0):
    corpus = load_api_corpus(data_dir / "corpus.jsonl")
    table = load_embeddings(data_dir / "embeddings.txt")
    idf_path = data_dir / "idf.txt"
    if idf_path.exists():
        idf = load_idf(idf_path, mode=config.idf_mode)
    else:
        idf = build_idf(
            [e.path_bag for e in corpus] + [e.desc_bag for e in corpus if e.desc_bag],
            mode=config.idf_mode,
        )
    recommender = EmbeddingRecommender(corpus, table, idf)
    if noise > 0:
        recommender = NoisyRecommender(recommender, amplitude=noise, noise_seed=noise_seed)
    oracle_path = data_dir / "oracle.jsonl"
    oracle = OracleStore.load(oracle_path) if oracle_path.exists() else None
    return corpus, table, idf, recommender, oracle


def _build_engine(data_dir: Path, config: EngineConfig, noise: float = 0.0) -> Engine:
    _, table, idf, recommender, oracle = _load_world(data_dir, config, noise)
    repo = load_repository(data_dir / "feedback.jsonl")
    return Engine(
        recommender=recommender,
        table=table,
        idf=idf,
        repo=repo,
        config=config,
        oracle=oracle,
    )


@click.group()
def cli():
    """Feedback-boosted re-ranking for query-based API recommendation."""


@cli.command()
@click.option("--addr", default="127.0.0.1:8080", help="host:port to bind")
@click.option("--data-dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--ui-dir", type=click.Path(file_okay=False), default=None, help="static frontend assets")
@_with_config_flags
def serve(addr, data_dir, ui_dir, config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    config = _resolve_config(config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed)
    engine = _build_engine(Path(data_dir), config)
    host, _, port = addr.partition(":")
    app = create_app(engine, ui_dir=Path(ui_dir) if ui_dir else None)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="warning")


@cli.command()
@click.argument("text")
@click.option("--data-dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--as-json", "as_json", is_flag=True, default=False)
@_with_config_flags
def query(text, data_dir, as_json, config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed):
    """One-shot query against the corpus plus any recorded feedback."""
    config = _resolve_config(config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed)
    engine = _build_engine(Path(data_dir), config)
    session = engine.open_session()
    query_id, result = engine.handle_query(session, text)
    cached = session.get(query_id)
    rows = []
    for rank, item in enumerate(result.items, start=1):
        api = cached.rec_list.get(item.api_id).api
        rows.append(
            {"rank": rank, "api_id": item.api_id, "pred_score": item.pred_score, "path": api.path}
        )
    if as_json:
        click.echo(json.dumps(rows, indent=2))
    else:
        for row in rows:
            click.echo(f"{row['rank']:>3}  {row['pred_score']:>9.5f}  {row['api_id']}")


@cli.command()
@click.option("--data-dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="model file (default: DATA_DIR/model.json)")
@_with_config_flags
def train(data_dir, out, config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed):
    """Train the ranking model from the feedback log and save it."""
    config = _resolve_config(config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed)
    data_dir = Path(data_dir)
    if len(load_repository(data_dir / "feedback.jsonl")) == 0:
        raise FormatError("no feedback records to train on")
    # same training path the service uses at session close
    engine = _build_engine(data_dir, config)
    model = engine.snapshot()[0]
    target = Path(out) if out else data_dir / "model.json"
    model.save(target)
    click.echo(f"trained {len(model)} trees on {len(engine.repo)} groups -> {target}")


@cli.group(name="eval")
def eval_group():
    """Batch experiments over a dataset of query/relevant-API pairs."""


def _pipeline_for(data_dir: Path, config: EngineConfig, noise: float) -> EvalPipeline:
    _, table, idf, recommender, oracle = _load_world(data_dir, config, noise)
    return EvalPipeline(recommender, table, idf, config, oracle=None)


def _eval_common(fn):
    fn = click.option("--data-dir", type=click.Path(exists=True, file_okay=False), required=True)(fn)
    fn = click.option("--dataset", "dataset_path", type=click.Path(exists=True, dir_okay=False), required=True)(fn)
    fn = click.option("--out", "out_prefix", type=click.Path(), default=None, help="report prefix (.csv/.json)")(fn)
    fn = click.option("--noise", type=float, default=0.0, help="base-recommender noise amplitude")(fn)
    return _with_config_flags(fn)


def _finish_report(report, out_prefix):
    for row in report.rows:
        click.echo(json.dumps(row))
    if out_prefix:
        report.to_csv(f"{out_prefix}.csv")
        report.to_json(f"{out_prefix}.json")
        click.echo(f"wrote {out_prefix}.csv and {out_prefix}.json")


@eval_group.command()
@click.option("--folds", type=int, default=10)
@click.option("--repeats", type=int, default=5)
@click.option("--train-pairs", type=int, default=None, help="cap the seeded repository per run (fixed small repo)")
@_eval_common
def cv(folds, repeats, train_pairs, data_dir, dataset_path, out_prefix, noise, config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed):
    """10-fold cross validation, repeated."""
    config = _resolve_config(config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed)
    pipeline = _pipeline_for(Path(data_dir), config, noise)
    dataset = load_dataset(dataset_path)
    report = cross_validate(
        dataset, pipeline, folds=folds, repeats=repeats, seed=config.seed, train_pairs=train_pairs
    )
    _finish_report(report, out_prefix)


@eval_group.command()
@click.option("--fractions", default="0,0.25,0.5,1.0", help="comma-separated feedback shares")
@click.option("--seeds", default="0,1,2,3,4", help="comma-separated split seeds")
@_eval_common
def accumulate(fractions, seeds, data_dir, dataset_path, out_prefix, noise, config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed):
    """Metrics as the feedback repository grows."""
    config = _resolve_config(config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed)
    pipeline = _pipeline_for(Path(data_dir), config, noise)
    dataset = load_dataset(dataset_path)
    report = accumulation_experiment(
        dataset,
        pipeline,
        fractions=tuple(float(f) for f in fractions.split(",")),
        seeds=tuple(int(s) for s in seeds.split(",")),
    )
    _finish_report(report, out_prefix)


@eval_group.command(name="pseudo-user")
@click.option("--queries", "n_queries", type=int, default=50)
@_eval_common
def pseudo_user(n_queries, data_dir, dataset_path, out_prefix, noise, config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed):
    """Sequential pseudo-user session."""
    config = _resolve_config(config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed)
    pipeline = _pipeline_for(Path(data_dir), config, noise)
    dataset = load_dataset(dataset_path)
    report = pseudo_user_experiment(dataset, pipeline, n_queries=n_queries, seed=config.seed)
    _finish_report(report, out_prefix)


@eval_group.command()
@_eval_common
def overhead(data_dir, dataset_path, out_prefix, noise, config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed):
    """Median extraction/training/ranking wall-clock times."""
    config = _resolve_config(config_path, epsilon, trees, learning_rate, top_n, delta_metric, seed)
    pipeline = _pipeline_for(Path(data_dir), config, noise)
    dataset = load_dataset(dataset_path)
    report = overhead_benchmark(pipeline, dataset)
    _finish_report(report, out_prefix)


def main(argv: Optional[Tuple[str, ...]] = None) -> int:
    try:
        cli.main(args=list(argv) if argv is not None else None, standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except (FormatError, OSError, ValueError, KeyError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
