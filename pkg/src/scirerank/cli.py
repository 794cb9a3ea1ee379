"""Operator CLI: extract features, build candidates, rerank, evaluate, and
report token costs, all driven by one YAML config with flag overrides."""

from __future__ import annotations

import json
import os
import statistics
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import evaluation, fixtures, retrieval
from .config import ConfigError, load_config, make_backend, make_embedder
from .corpus import (
    CandidateList,
    RunResult,
    load_corpus,
    load_qrels,
    load_queries,
    load_run,
    write_run,
)
from .embedding import adaptive_select
from .extraction import FeatureStore, extract_all
from .llm import TokenCountingBackend
from .rerank import Reranker, Strategy, run_strategy
from .representation import Form, build_representation, doc_token_estimate


def _atomic_write(path: Path, writer) -> None:
    """Write via temp file + rename so readers never see partial output."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load(config_path: str, overrides: dict | None = None):
    try:
        cfg = load_config(config_path, overrides)
        cfg.validate()
        return cfg
    except (ConfigError, FileNotFoundError) as exc:
        raise click.ClickException(str(exc))


@click.group()
def main() -> None:
    """Two-stage LLM listwise reranking toolkit for scientific retrieval."""


@main.command()
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
def extract(config_path: str) -> None:
    """Extract semantic features for every corpus document (resumable)."""
    cfg = _load(config_path)
    corpus = load_corpus(cfg.corpus_path)
    backend = TokenCountingBackend(make_backend(cfg))
    store = FeatureStore(cfg.features_path)
    report = extract_all(
        corpus, backend, store, cfg.extractor_model,
        parallelism=cfg.backend.parallelism,
    )
    click.echo(
        f"{len(report.extracted)} extracted, {len(report.skipped)} skipped, "
        f"{len(report.failures)} failed"
    )
    for feature in ("categories", "sections", "keywords", "pseudo queries"):
        click.echo(f"  {feature}: {len(store)} documents")
    click.echo(f"tokens consumed: {backend.total_tokens}")
    if report.failures:
        for doc_id, error in report.failures.items():
            click.echo(f"  FAILED {doc_id}: {error}", err=True)
        sys.exit(1)


def _first_stage(cfg, corpus, queries) -> dict[str, CandidateList]:
    if cfg.retriever == "bm25":
        index = retrieval.build_index(corpus)
        return {
            q.query_id: retrieval.bm25_search(index, q, cfg.first_stage_m)
            for q in queries
        }
    embedder = make_embedder(cfg)
    return {
        q.query_id: retrieval.dense_search(corpus, embedder, q, cfg.first_stage_m)
        for q in queries
    }


@main.command()
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@click.option("--strategy", type=click.Choice([s.value for s in Strategy]))
@click.option("--k-keywords", type=int, help="keywords per compact representation")
@click.option("--fine-k", type=int, help="fine-grained reranking pool size")
@click.option("--coarse-m", type=int, help="coarse reranking pool size")
@click.option("--form", type=int, help="compact representation form (1-4)")
def rerank(config_path, strategy, k_keywords, fine_k, coarse_m, form) -> None:
    """Run the configured reranking strategy over all queries."""
    overrides = {}
    for dotted, value in (
        ("rerank.strategy", strategy),
        ("rerank.k_keywords", k_keywords),
        ("rerank.fine_k", fine_k),
        ("rerank.coarse_m", coarse_m),
        ("rerank.form", form),
    ):
        if value is not None:
            overrides[dotted] = value
    cfg = _load(config_path, overrides)

    corpus = load_corpus(cfg.corpus_path)
    queries = load_queries(cfg.queries_path)
    backend = make_backend(cfg)
    reranker = Reranker(backend, model_name=cfg.backend.model)
    candidates = _first_stage(cfg, corpus, queries)

    needs_features = cfg.rerank.strategy in (Strategy.CORANK, Strategy.CORANK_SLIDING)
    features = FeatureStore(cfg.features_path) if needs_features else None
    embedder = make_embedder(cfg) if needs_features else None

    def one(query) -> RunResult:
        return run_strategy(
            query, candidates[query.query_id], corpus, cfg.rerank, reranker,
            features=features, embedder=embedder,
        )

    with ThreadPoolExecutor(max_workers=max(1, cfg.backend.parallelism)) as pool:
        runs = list(pool.map(one, queries))

    tag = cfg.rerank.strategy.value
    out_dir = Path(cfg.output_dir)
    run_path = out_dir / f"run_{tag}.txt"
    _atomic_write(run_path, lambda tmp: write_run(runs, tmp))

    ledger = evaluation.TokenLedger()
    for run in runs:
        if run.token_usage is not None:
            ledger.merge(run.token_usage)
    tokens_path = out_dir / f"run_{tag}.tokens.json"
    _atomic_write(tokens_path, lambda tmp: Path(tmp).write_text(
        json.dumps({
            "per_stage": ledger.to_dict(),
            "total_tokens": ledger.total_tokens,
        }, indent=2) + "\n"
    ))
    click.echo(f"wrote {run_path} ({len(runs)} queries, {ledger.total_tokens} tokens)")


@main.command("eval")
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@click.argument("run_paths", nargs=-1, required=True, type=click.Path(exists=True))
def eval_cmd(config_path: str, run_paths: tuple[str, ...]) -> None:
    """Score one or more run files against the qrels. With several runs,
    also print a strategy comparison table."""
    cfg = _load(config_path)
    qrels = load_qrels(cfg.qrels_path)
    comparison_rows = []
    for run_path in run_paths:
        runs = load_run(run_path)
        report = evaluation.evaluate_run(
            runs, qrels, price_per_million=cfg.price_per_million
        )
        tokens = _sidecar_tokens(run_path)
        report.token_total.add("rerank", tokens, 0)
        report.cost = evaluation.cost_report(tokens, cfg.price_per_million)
        click.echo(f"== {run_path} ==")
        click.echo(evaluation.format_report(report))
        report_path = Path(run_path).with_suffix(".metrics.jsonl")
        _atomic_write(
            report_path,
            lambda tmp, rep=report: evaluation.write_report_jsonl(rep, tmp),
        )
        tag = runs[0].strategy_tag if runs else Path(run_path).stem
        comparison_rows.append(
            (tag, report.display_aggregate().get("ndcg@10", 0.0), tokens)
        )
    if len(comparison_rows) > 1:
        click.echo(evaluation.token_comparison_table(
            comparison_rows, cfg.price_per_million
        ))


def _sidecar_tokens(run_path: str) -> int:
    sidecar = Path(str(run_path).removesuffix(".txt") + ".tokens.json")
    if sidecar.exists():
        return int(json.loads(sidecar.read_text())["total_tokens"])
    return 0


@main.command("token-stats")
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
def token_stats(config_path: str) -> None:
    """Per-form and full-text token statistics for the corpus.

    Adaptive selection needs a query; each document's own text is used as
    the selection query so the statistics are query-independent.
    """
    cfg = _load(config_path)
    corpus = load_corpus(cfg.corpus_path)
    store = FeatureStore(cfg.features_path)
    embedder = make_embedder(cfg)

    samples: dict[str, list[int]] = {"full_text": []}
    for form in Form:
        samples[f"form_{form.value}"] = []
    for doc in corpus:
        features = store.get(doc.doc_id)
        if features is None:
            continue
        samples["full_text"].append(doc_token_estimate(doc))
        selected = adaptive_select(
            doc.text, features, embedder, k_keywords=cfg.rerank.k_keywords
        )
        for form in Form:
            rep = build_representation(
                doc.doc_id, form, category=features.category, selected=selected
            )
            samples[f"form_{form.value}"].append(rep.token_estimate)

    if not samples["full_text"]:
        raise click.ClickException("no documents with extracted features")
    click.echo(f"{'representation':<14} {'mean':>8} {'median':>8} {'p95':>8} {'max':>8}")
    for name, values in samples.items():
        ordered = sorted(values)
        p95 = ordered[min(len(ordered) - 1, int(0.95 * len(ordered)))]
        click.echo(
            f"{name:<14} {statistics.mean(values):>8.1f} "
            f"{statistics.median(values):>8.1f} {p95:>8d} {max(values):>8d}"
        )


@main.command("cost-report")
@click.option("--tokens", type=int, required=True, help="total token count")
@click.option("--price", type=float, required=True, help="price per 1M tokens")
def cost_report_cmd(tokens: int, price: float) -> None:
    """API cost for a token total at a per-million price."""
    click.echo(f"${evaluation.cost_report(tokens, price):.2f}")


@main.command("make-fixture")
@click.argument("out_dir", type=click.Path())
@click.option("--docs", type=int, default=50, show_default=True)
@click.option("--queries", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
def make_fixture(out_dir: str, docs: int, queries: int, seed: int) -> None:
    """Generate the synthetic demo corpus, queries, and qrels."""
    paths = fixtures.build_fixture(out_dir, n_docs=docs, n_queries=queries, seed=seed)
    for label, path in paths.items():
        click.echo(f"{label}: {path}")


if __name__ == "__main__":
    main()
