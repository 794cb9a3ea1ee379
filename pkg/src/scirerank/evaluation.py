"""Ranking metrics (nDCG/MAP/Recall @k), per-query and aggregate reporting,
and token/cost accounting.

Conventions follow trec_eval: linear gain for nDCG by default (exponential
2^r - 1 available via a flag), MAP and Recall binarize relevance at grade
> 0, and queries with no relevant documents score 0 on every metric.
Displayed values are the means times 100, rounded to one decimal.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Qrels, RunResult

logger = logging.getLogger(__name__)

DEFAULT_KS = (5, 10)


@dataclass
class TokenLedger:
    """Per-stage prompt/completion token accounting. Totals are always the
    sum over stages, so they cannot drift out of sync."""

    per_stage: dict[str, tuple[int, int]] = field(default_factory=dict)

    def add(self, stage: str, prompt_tokens: int, completion_tokens: int) -> None:
        prev_p, prev_c = self.per_stage.get(stage, (0, 0))
        self.per_stage[stage] = (prev_p + prompt_tokens, prev_c + completion_tokens)

    def merge(self, other: "TokenLedger") -> None:
        for stage, (p, c) in other.per_stage.items():
            self.add(stage, p, c)

    @property
    def prompt_tokens(self) -> int:
        return sum(p for p, _ in self.per_stage.values())

    @property
    def completion_tokens(self) -> int:
        return sum(c for _, c in self.per_stage.values())

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        return {stage: list(pair) for stage, pair in self.per_stage.items()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence[int]]) -> "TokenLedger":
        ledger = cls()
        for stage, (p, c) in data.items():
            ledger.add(stage, int(p), int(c))
        return ledger


def _gain(grade: int, exponential: bool) -> float:
    return float(2 ** grade - 1) if exponential else float(grade)


def ndcg_at_k(
    ranking: Sequence[str],
    qrels_for_query: Mapping[str, int],
    k: int,
    exponential: bool = False,
) -> float:
    """nDCG@k with log2(i+1) discount. 0 when the query has no relevant docs."""
    if k < 1:
        raise ValueError("k must be >= 1")
    dcg = 0.0
    for i, doc_id in enumerate(ranking[:k], start=1):
        dcg += _gain(qrels_for_query.get(doc_id, 0), exponential) / math.log2(i + 1)
    ideal_grades = sorted(
        (g for g in qrels_for_query.values() if g > 0), reverse=True
    )
    idcg = sum(
        _gain(g, exponential) / math.log2(i + 1)
        for i, g in enumerate(ideal_grades[:k], start=1)
    )
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def map_at_k(
    ranking: Sequence[str], qrels_for_query: Mapping[str, int], k: int
) -> float:
    """AP@k with relevance binarized at grade > 0, normalized by min(R, k)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = {d for d, g in qrels_for_query.items() if g > 0}
    if not relevant:
        return 0.0
    hits = 0
    precision_sum = 0.0
    for i, doc_id in enumerate(ranking[:k], start=1):
        if doc_id in relevant:
            hits += 1
            precision_sum += hits / i
    return precision_sum / min(len(relevant), k)


def recall_at_k(
    ranking: Sequence[str], qrels_for_query: Mapping[str, int], k: int
) -> float:
    relevant = {d for d, g in qrels_for_query.items() if g > 0}
    if not relevant:
        return 0.0
    return len(relevant & set(ranking[:k])) / len(relevant)


@dataclass
class MetricsReport:
    per_query: dict[str, dict[str, float]]
    aggregate: dict[str, float]
    token_total: TokenLedger
    cost: float

    def display_aggregate(self) -> dict[str, float]:
        """Aggregate means scaled to the x100, one-decimal table convention."""
        return {name: round(value * 100, 1) for name, value in self.aggregate.items()}


def evaluate_run(
    runs: Iterable[RunResult],
    qrels: Qrels,
    ks: Sequence[int] = DEFAULT_KS,
    exponential_gain: bool = False,
    price_per_million: float = 0.0,
) -> MetricsReport:
    """Score each run query against the qrels and aggregate with unweighted
    means. Queries absent from qrels are skipped with a warning (scoring
    them 0 would silently deflate aggregates); doc_ids unknown to the qrels
    are treated as non-relevant."""
    per_query: dict[str, dict[str, float]] = {}
    ledger = TokenLedger()
    judged_queries = qrels.query_ids()
    for run in runs:
        if run.token_usage is not None:
            ledger.merge(run.token_usage)
        if run.query_id not in judged_queries:
            logger.warning("query %s has no qrels entry; skipping", run.query_id)
            continue
        judgments = qrels.for_query(run.query_id)
        metrics: dict[str, float] = {}
        for k in ks:
            metrics[f"ndcg@{k}"] = ndcg_at_k(
                run.ranking, judgments, k, exponential=exponential_gain
            )
            metrics[f"map@{k}"] = map_at_k(run.ranking, judgments, k)
            metrics[f"recall@{k}"] = recall_at_k(run.ranking, judgments, k)
        per_query[run.query_id] = metrics

    aggregate: dict[str, float] = {}
    if per_query:
        names = next(iter(per_query.values())).keys()
        for name in names:
            aggregate[name] = sum(m[name] for m in per_query.values()) / len(per_query)

    return MetricsReport(
        per_query=per_query,
        aggregate=aggregate,
        token_total=ledger,
        cost=cost_report(ledger.total_tokens, price_per_million),
    )


def cost_report(total_tokens: int, price_per_million: float) -> float:
    """API cost in currency units: tokens x price per million, to 2 decimals."""
    return round(total_tokens * price_per_million / 1e6, 2)


def format_report(report: MetricsReport) -> str:
    """Aligned-text table of aggregate metrics in display units."""
    display = report.display_aggregate()
    if not display:
        return "(no judged queries)"
    width = max(len(name) for name in display)
    lines = [f"{name:<{width}}  {value:>6.1f}" for name, value in display.items()]
    lines.append(f"{'queries':<{width}}  {len(report.per_query):>6d}")
    lines.append(f"{'tokens':<{width}}  {report.token_total.total_tokens:>6d}")
    lines.append(f"{'cost':<{width}}  ${report.cost:.2f}")
    return "\n".join(lines)


def write_report_jsonl(report: MetricsReport, path: str | Path) -> None:
    """Machine-readable per-query records plus one aggregate record."""
    with open(path, "w", encoding="utf-8") as fh:
        for query_id in sorted(report.per_query):
            fh.write(json.dumps(
                {"query_id": query_id, **report.per_query[query_id]},
                sort_keys=True,
            ) + "\n")
        fh.write(json.dumps({
            "aggregate": dict(sorted(report.aggregate.items())),
            "total_tokens": report.token_total.total_tokens,
            "cost": report.cost,
        }, sort_keys=True) + "\n")


def token_comparison_table(
    rows: Sequence[tuple[str, float, int]], price_per_million: float
) -> str:
    """Strategy comparison table: nDCG@10, token usage, and API cost per row.

    ``rows`` is (strategy name, ndcg@10 in display units, total tokens).
    """
    if not rows:
        return ""
    header = f"{'Method':<12} {'N@10':>6} {'Tokens':>10} {'Cost':>8}"
    lines = [header]
    for name, ndcg10, tokens in rows:
        cost = cost_report(tokens, price_per_million)
        lines.append(
            f"{name:<12} {ndcg10:>6.1f} {_format_millions(tokens):>10} {'$%.2f' % cost:>8}"
        )
    return "\n".join(lines)


def _format_millions(tokens: int) -> str:
    if tokens >= 10_000:
        return f"{tokens / 1e6:.2f}M"
    return str(tokens)
