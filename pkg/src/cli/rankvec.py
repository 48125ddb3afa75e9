"""``rankvec`` command line: index, train, score, evaluate, analyse, benchmark.

Subcommands
-----------
* ``index``             -- encode a corpus and write an RKI1 index.
* ``train``             -- retrain E_2 against rank targets from an E_1 index.
* ``score``             -- per-pair predicted similarity as TSV.
* ``eval``              -- Spearman correlation against gold scores.
* ``analyze``           -- ``buckets``, ``overlap``, ``uniformity``, ``lambda``.
* ``bench``             -- timing of the rank-vector stages.
* ``gen-toy``           -- synthetic clustered corpus plus STS pairs.
* ``export-embeddings`` -- dump an index's embedding matrix.

Tabular results go to stdout (or ``--out``), logs and the resolved
configuration to stderr.  Failures print a single line
``rankvec: error[<code>]: <message>`` and exit with 1 (usage) or 2
(domain / data).
"""

from __future__ import annotations

import json
import os
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Final, TypeVar

import click
import polars as pl
import structlog

from src.common.errors import RankvecDataError, RankvecError, RankvecUsageError
from src.common.logging_config import set_command, setup_logging
from src.common.metrics import write_metrics
from src.common.settings import InferenceConfig, RuntimeSettings, TrainConfig, field_default, resolve
from src.evaluation.benchmark import BENCH_COLUMNS, bench
from src.evaluation.lambda_sweep import DEFAULT_LAMBDAS, LAMBDA_COLUMNS, lambda_sweep
from src.evaluation.representation_analysis import (
    DEFAULT_GROUP_EDGES,
    OVERLAP_COLUMNS,
    POSITIVE_GOLD_THRESHOLD,
    UNIFORMITY_COLUMNS,
    overlap_analysis,
    representation_quality,
)
from src.evaluation.sts_evaluation import BUCKET_COLUMNS, DEFAULT_BUCKET_EDGES, bucket_evaluate, evaluate
from src.ingestion.sts_reader import DEFAULT_SCALE, read_sts, scored_frame
from src.ingestion.toy_generator import DEFAULT_PAIRS, DEFAULT_VOCAB, gen_toy, write_toy
from src.ml.encoders import Encoder
from src.ml.registry import encoder_for_index, encoder_from_spec
from src.ml.trainer import train, write_loss_log
from src.serving.similarity import SCORER_KINDS, Scorer, ScorerKind, make_scorer, score_dataset
from src.storage.corpus_index import DEFAULT_OVERLAP_K, CorpusIndex, build_index, load_index, save_index
from src.storage.embedding_file import save_precomputed
from src.storage.model_file import save_model

logger = structlog.get_logger(__name__)

PROG: Final[str] = "rankvec"
F = TypeVar("F", bound=Callable[..., Any])


# --------------------------------------------------------------------------- #
# Helpers                                                                      #
# --------------------------------------------------------------------------- #


def _default(cls: type[Any], name: str) -> str:
    return f"[default: {field_default(cls, name)}]"


def _runtime(ctx: click.Context) -> RuntimeSettings:
    settings: RuntimeSettings = ctx.find_root().obj
    return settings


def _threads(ctx: click.Context) -> int:
    return _runtime(ctx).threads or os.cpu_count() or 1


def _announce(ctx: click.Context, **config: Any) -> None:
    """Print the fully resolved configuration before any work starts."""
    runtime = _runtime(ctx)
    resolved = {
        "command": ctx.command_path.removeprefix(f"{PROG} "),
        "log_level": runtime.log_level,
        "threads": _threads(ctx),
        "metrics_out": runtime.metrics_out,
        **config,
    }
    click.echo(f"{PROG}: config {json.dumps(resolved, sort_keys=True, default=str)}", err=True)
    logger.info("resolved_config", **resolved)


def _emit(frame: pl.DataFrame, out: Path | None, *, separator: str = ",") -> None:
    text = frame.write_csv(separator=separator, line_terminator="\n", quote_style="necessary")
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text, encoding="utf-8", newline="")


def _rows_frame(rows: Sequence[Any], columns: Sequence[str]) -> pl.DataFrame:
    return pl.DataFrame([r.model_dump(include=set(columns)) for r in rows]).select(list(columns))


def _parse_floats(raw: str | None, fallback: Sequence[float], option: str) -> list[float]:
    if raw is None:
        return list(fallback)
    try:
        values = [float(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise RankvecUsageError(f"{option} expects comma-separated numbers, got {raw!r}") from exc
    if not values:
        raise RankvecUsageError(f"{option} must not be empty")
    return values


def _query_encoder(model: Path | None, index: CorpusIndex | None) -> Encoder:
    if model is not None:
        return encoder_from_spec(f"model:{model}")
    if index is not None:
        return encoder_for_index(index)
    raise RankvecUsageError("either --model or --index is required")


@dataclass(frozen=True)
class _Scoring:
    scorer: Scorer
    cfg: InferenceConfig
    index: CorpusIndex | None
    encoder: Encoder


def _scorer(
    ctx: click.Context,
    kind: ScorerKind,
    model: Path | None,
    index_path: Path | None,
    lambda_inf: float | None,
    **announce: Any,
) -> _Scoring:
    """Resolve the inference config, print it with *announce*, then load the scorer."""
    cfg = resolve(InferenceConfig, lambda_inf=lambda_inf)
    _announce(ctx, scorer=kind, model=model, index=index_path, **cfg.model_dump(), **announce)
    index = load_index(index_path) if index_path is not None else None
    encoder = _query_encoder(model, index)
    scorer = make_scorer(kind, encoder, index, cfg, threads=_threads(ctx))
    return _Scoring(scorer=scorer, cfg=cfg, index=index, encoder=encoder)


_path_in = click.Path(exists=False, dir_okay=False, path_type=Path)
_path_out = click.Path(dir_okay=False, writable=True, path_type=Path)


def _scoring_options(f: F) -> F:
    f = click.option("--scale", type=float, default=DEFAULT_SCALE, show_default=True, help="Maximum of the gold scale.")(f)
    f = click.option(
        "--lambda-inf",
        type=float,
        default=None,
        help=f"Weight of the rank-vector term in blended scoring. {_default(InferenceConfig, 'lambda_inf')}",
    )(f)
    f = click.option(
        "--scorer",
        type=click.Choice(SCORER_KINDS),
        default="blend",
        show_default=True,
        help="cosine: encoder only; rank: rank vectors only; blend: weighted mix.",
    )(f)
    f = click.option("--index", "index_path", type=_path_in, default=None, help="Corpus index built with the query encoder.")(f)
    f = click.option("--model", type=_path_in, default=None, help="Trained model (RKM1); defaults to the index's encoder.")(f)
    return f


def _train_options(f: F) -> F:
    options = [
        ("--batch-size", "batch_size", int, "Sentences per batch."),
        ("--tau", "temperature", float, "Contrastive temperature."),
        ("--lambda-train", "lambda_train", float, "Weight of the rank loss."),
        ("--tau-l", "tau_l", float, "Lower rank-similarity filter."),
        ("--tau-u", "tau_u", float, "Upper rank-similarity filter."),
        ("--dropout", "dropout_rate", float, "Feature dropout rate for positives."),
        ("--lr", "learning_rate", float, "Gradient-descent step size."),
        ("--epochs", "epochs", int, "Passes over the corpus."),
        ("--seed", "seed", int, "Seed for initialisation, shuffling and dropout."),
        ("--dim", "dim", int, "Embedding dimension of E_2."),
        ("--features", "n_features", int, "Hashed trigram features of E_2."),
    ]
    for flag, name, kind, text in reversed(options):
        f = click.option(flag, name, type=kind, default=None, help=f"{text} {_default(TrainConfig, name)}")(f)
    return f


# --------------------------------------------------------------------------- #
# CLI group                                                                    #
# --------------------------------------------------------------------------- #


@click.group(name=PROG)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=None,
    help=f"Log verbosity on stderr. {_default(RuntimeSettings, 'log_level')}",
)
@click.option("--threads", type=int, default=None, help="Worker threads. [default: machine parallelism]")
@click.option("--metrics-out", type=_path_out, default=None, help="Write Prometheus metrics here on exit.")
@click.pass_context
def cli(ctx: click.Context, log_level: str | None, threads: int | None, metrics_out: Path | None) -> None:
    """Corpus-anchored sentence similarity with rank vectors."""
    settings = resolve(RuntimeSettings, log_level=log_level, threads=threads, metrics_out=metrics_out)
    ctx.obj = settings
    setup_logging(service_name=PROG, log_level=settings.log_level)
    if ctx.invoked_subcommand:
        set_command(ctx.invoked_subcommand)
    if settings.metrics_out is not None:
        target = settings.metrics_out
        ctx.call_on_close(lambda: write_metrics(target))


@cli.command("index")
@click.option("--corpus", type=_path_in, required=True, help="One sentence per line, UTF-8.")
@click.option("--encoder", "encoder_spec", default="hash-ngram", show_default=True, help="hash-ngram | precomputed:PATH | model:PATH")
@click.option("--dim", type=int, default=None, help=f"hash-ngram embedding dimension. {_default(TrainConfig, 'dim')}")
@click.option("--features", "n_features", type=int, default=None, help=f"hash-ngram feature count. {_default(TrainConfig, 'n_features')}")
@click.option("--seed", type=int, default=None, help=f"hash-ngram projection seed. {_default(TrainConfig, 'seed')}")
@click.option("--out", type=_path_out, required=True, help="Index file to write.")
@click.pass_context
def index_cmd(
    ctx: click.Context,
    corpus: Path,
    encoder_spec: str,
    dim: int | None,
    n_features: int | None,
    seed: int | None,
    out: Path,
) -> None:
    """Encode CORPUS and write a corpus index."""
    cfg = resolve(TrainConfig, dim=dim, n_features=n_features, seed=seed)
    _announce(ctx, corpus=corpus, encoder=encoder_spec, dim=cfg.dim, n_features=cfg.n_features, seed=cfg.seed, out=out)
    encoder = encoder_from_spec(encoder_spec, dim=cfg.dim, n_features=cfg.n_features, seed=cfg.seed)
    save_index(build_index(corpus, encoder), out)


@cli.command("train")
@click.option("--corpus", type=_path_in, required=True, help="Training sentences, one per line.")
@click.option("--index", "index_path", type=_path_in, required=True, help="Index built with the base encoder E_1.")
@_train_options
@click.option("--out", type=_path_out, required=True, help="Model file (RKM1) to write.")
@click.option("--loss-log", type=_path_out, default=None, help="CSV of per-step losses.")
@click.pass_context
def train_cmd(
    ctx: click.Context,
    corpus: Path,
    index_path: Path,
    out: Path,
    loss_log: Path | None,
    **overrides: Any,
) -> None:
    """Retrain E_2 with the contrastive + rank-distillation objective."""
    cfg = resolve(TrainConfig, **overrides)
    _announce(ctx, corpus=corpus, index=index_path, out=out, loss_log=loss_log, **cfg.model_dump())
    result = train(corpus, load_index(index_path), cfg, threads=_threads(ctx))
    save_model(result.params, out)
    if loss_log is not None:
        write_loss_log(result.trace, loss_log)


@cli.command("score")
@click.option("--pairs", type=_path_in, required=True, help="TSV of sentence1, sentence2, gold.")
@_scoring_options
@click.option("--out", type=_path_out, default=None, help="Write the TSV here instead of stdout.")
@click.pass_context
def score_cmd(
    ctx: click.Context,
    pairs: Path,
    model: Path | None,
    index_path: Path | None,
    scorer: ScorerKind,
    lambda_inf: float | None,
    scale: float,
    out: Path | None,
) -> None:
    """Predicted similarity of every pair."""
    scoring = _scorer(ctx, scorer, model, index_path, lambda_inf, pairs=pairs, scale=scale, out=out)
    scored = score_dataset(read_sts(pairs, scale=scale), scoring.scorer)
    _emit(scored_frame(scored), out, separator="\t")


@cli.command("eval")
@click.option("--dataset", type=_path_in, required=True, help="TSV of sentence1, sentence2, gold.")
@_scoring_options
@click.pass_context
def eval_cmd(
    ctx: click.Context,
    dataset: Path,
    model: Path | None,
    index_path: Path | None,
    scorer: ScorerKind,
    lambda_inf: float | None,
    scale: float,
) -> None:
    """Spearman correlation between predictions and gold scores."""
    scoring = _scorer(ctx, scorer, model, index_path, lambda_inf, dataset=dataset, scale=scale)
    pairs = read_sts(dataset, scale=scale)
    rho = evaluate(pairs, scoring.scorer)
    frame = pl.DataFrame(
        {"scorer": [scorer], "lambda_inf": [scoring.cfg.lambda_inf], "pairs": [len(pairs)], "spearman": [rho]}
    )
    _emit(frame, None)


# --------------------------------------------------------------------------- #
# analyze                                                                      #
# --------------------------------------------------------------------------- #


@cli.group("analyze")
def analyze() -> None:
    """Similarity buckets, neighbour overlap, uniformity, lambda study."""


@analyze.command("buckets")
@click.option("--dataset", type=_path_in, required=True)
@_scoring_options
@click.option("--edges", default=None, help="Comma-separated normalised gold edges. [default: 0,1/3,2/3,1]")
@click.pass_context
def analyze_buckets(
    ctx: click.Context,
    dataset: Path,
    model: Path | None,
    index_path: Path | None,
    scorer: ScorerKind,
    lambda_inf: float | None,
    scale: float,
    edges: str | None,
) -> None:
    """Spearman per gold-similarity bucket (CSV: bucket,lower,upper,count,spearman)."""
    bucket_edges = _parse_floats(edges, DEFAULT_BUCKET_EDGES, "--edges")
    scoring = _scorer(ctx, scorer, model, index_path, lambda_inf, dataset=dataset, scale=scale, edges=bucket_edges)
    results = bucket_evaluate(read_sts(dataset, scale=scale), scoring.scorer, bucket_edges)
    _emit(_rows_frame(results, BUCKET_COLUMNS), None)


@analyze.command("overlap")
@click.option("--dataset", type=_path_in, required=True)
@_scoring_options
@click.option("--k", type=int, default=DEFAULT_OVERLAP_K, show_default=True, help="Neighbours per sentence.")
@click.option("--edges", default=None, help="Comma-separated base-cosine group edges. [default: -1,0,0.25,0.5,0.75,1]")
@click.pass_context
def analyze_overlap(
    ctx: click.Context,
    dataset: Path,
    model: Path | None,
    index_path: Path | None,
    scorer: ScorerKind,
    lambda_inf: float | None,
    scale: float,
    k: int,
    edges: str | None,
) -> None:
    """Top-k neighbour overlap per base-cosine group (CSV: group,lower,upper,count,mean_overlap,spearman)."""
    group_edges = _parse_floats(edges, DEFAULT_GROUP_EDGES, "--edges")
    scoring = _scorer(ctx, scorer, model, index_path, lambda_inf, dataset=dataset, scale=scale, k=k, edges=group_edges)
    if scoring.index is None:
        raise RankvecUsageError("analyze overlap needs --index")
    results = overlap_analysis(
        read_sts(dataset, scale=scale),
        scoring.index,
        scoring.encoder,
        k=k,
        group_edges=group_edges,
        scorer=scoring.scorer,
    )
    _emit(_rows_frame(results, OVERLAP_COLUMNS), None)


@analyze.command("uniformity")
@click.option("--dataset", type=_path_in, required=True)
@click.option("--index", "index_path", type=_path_in, required=True)
@click.option("--model", type=_path_in, default=None)
@click.option("--scale", type=float, default=DEFAULT_SCALE, show_default=True)
@click.option(
    "--positive-threshold",
    type=float,
    default=POSITIVE_GOLD_THRESHOLD,
    show_default=True,
    help="Normalised gold at or above which a pair counts as positive.",
)
@click.pass_context
def analyze_uniformity(
    ctx: click.Context,
    dataset: Path,
    index_path: Path,
    model: Path | None,
    scale: float,
    positive_threshold: float,
) -> None:
    """Uniformity and alignment of embeddings vs rank vectors (CSV: representation,uniformity,alignment)."""
    _announce(ctx, dataset=dataset, index=index_path, model=model, scale=scale, positive_threshold=positive_threshold)
    index = load_index(index_path)
    results = representation_quality(
        read_sts(dataset, scale=scale),
        index,
        _query_encoder(model, index),
        positive_threshold=positive_threshold,
        threads=_threads(ctx),
    )
    _emit(_rows_frame(results, UNIFORMITY_COLUMNS), None)


@analyze.command("lambda")
@click.option("--corpus", type=_path_in, required=True)
@click.option("--index", "index_path", type=_path_in, required=True, help="Index built with the base encoder E_1.")
@click.option("--lambdas", default=None, help="Comma-separated lambda_train values. [default: 0.01,0.05,0.1,0.5,1.0]")
@_train_options
@click.pass_context
def analyze_lambda(
    ctx: click.Context,
    corpus: Path,
    index_path: Path,
    lambdas: str | None,
    **overrides: Any,
) -> None:
    """Final-epoch loss components per lambda_train (CSV: lambda_train,l_cl,lambda_lr,l_total)."""
    values = _parse_floats(lambdas, DEFAULT_LAMBDAS, "--lambdas")
    cfg = resolve(TrainConfig, **overrides)
    _announce(ctx, corpus=corpus, index=index_path, lambdas=values, **cfg.model_dump())
    points = lambda_sweep(corpus, load_index(index_path), cfg, values, threads=_threads(ctx))
    _emit(_rows_frame(points, LAMBDA_COLUMNS), None)


# --------------------------------------------------------------------------- #
# Utilities                                                                    #
# --------------------------------------------------------------------------- #


@cli.command("bench")
@click.option("--index", "index_path", type=_path_in, required=True)
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--repeats", type=int, default=3, show_default=True, help="Timed runs; the median is reported.")
@click.pass_context
def bench_cmd(ctx: click.Context, index_path: Path, batch_size: int, repeats: int) -> None:
    """Wall time of rank-vector computation and the batch similarity matrix."""
    _announce(ctx, index=index_path, batch_size=batch_size, repeats=repeats)
    rows = bench(load_index(index_path), batch_size, repeats=repeats, threads=_threads(ctx))
    _emit(_rows_frame(rows, BENCH_COLUMNS), None)


@cli.command("gen-toy")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--clusters", type=int, default=6, show_default=True)
@click.option("--per-cluster", type=int, default=200, show_default=True)
@click.option("--vocab", type=int, default=DEFAULT_VOCAB, show_default=True, help="Topic words per cluster.")
@click.option("--pairs", "n_pairs", type=int, default=DEFAULT_PAIRS, show_default=True)
@click.option("--corpus-out", type=_path_out, required=True)
@click.option("--pairs-out", type=_path_out, required=True)
@click.pass_context
def gen_toy_cmd(
    ctx: click.Context,
    seed: int,
    clusters: int,
    per_cluster: int,
    vocab: int,
    n_pairs: int,
    corpus_out: Path,
    pairs_out: Path,
) -> None:
    """Write a synthetic clustered corpus and an STS-style pair file."""
    _announce(
        ctx,
        seed=seed,
        clusters=clusters,
        per_cluster=per_cluster,
        vocab=vocab,
        pairs=n_pairs,
        corpus_out=corpus_out,
        pairs_out=pairs_out,
    )
    dataset = gen_toy(seed, clusters=clusters, per_cluster=per_cluster, vocab=vocab, pairs=n_pairs)
    write_toy(dataset, corpus_out, pairs_out)


@cli.command("export-embeddings")
@click.option("--index", "index_path", type=_path_in, required=True)
@click.option("--out", type=_path_out, required=True, help="Target file; .rkv for binary, .tsv for text.")
@click.pass_context
def export_embeddings_cmd(ctx: click.Context, index_path: Path, out: Path) -> None:
    """Dump an index's embedding matrix in the precomputed-table format."""
    _announce(ctx, index=index_path, out=out)
    save_precomputed(load_index(index_path).embeddings, out)


# --------------------------------------------------------------------------- #
# Entry points                                                                 #
# --------------------------------------------------------------------------- #


def _fail(code: str, message: str, exit_code: int) -> int:
    click.echo(f"{PROG}: error[{code}]: {' '.join(message.split())}", err=True)
    return exit_code


def run(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and map every failure onto an exit code."""
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name=PROG, standalone_mode=False)
    except click.exceptions.Abort:
        return _fail("usage", "aborted", 1)
    except click.ClickException as exc:
        return _fail("usage", exc.format_message(), 1)
    except RankvecError as exc:
        return _fail(exc.code, str(exc), exc.exit_code)
    except OSError as exc:
        err = RankvecDataError(exc.strerror or str(exc), path=exc.filename)
        return _fail(err.code, str(err), err.exit_code)
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
