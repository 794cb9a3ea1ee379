"""Data model and persistence: documents, queries, qrels, candidate lists, runs.

File formats follow the de-facto TREC layouts for qrels and run files so
external tools can cross-check the evaluation module. The corpus itself is
line-delimited JSON, one document per line.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Iterator

if TYPE_CHECKING:
    from .evaluation import TokenLedger

logger = logging.getLogger(__name__)


class CorpusError(ValueError):
    """Malformed corpus, qrels, or run input."""


@dataclass
class Document:
    doc_id: str
    title: str
    text: str
    token_estimate: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise CorpusError("document with empty doc_id")


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise CorpusError(f"query {self.query_id!r} has empty text")


class Corpus:
    """Immutable-after-load collection of documents, keyed by doc_id."""

    def __init__(self, documents: Iterable[Document] = ()) -> None:
        self._docs: dict[str, Document] = {}
        for doc in documents:
            self.add(doc)

    def add(self, doc: Document) -> None:
        if doc.doc_id in self._docs:
            raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
        self._docs[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs.values())

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def __getitem__(self, doc_id: str) -> Document:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise KeyError(f"unknown doc_id {doc_id!r}") from None

    def doc_ids(self) -> list[str]:
        return list(self._docs)


class Qrels:
    """Relevance judgments: (query_id, doc_id) -> non-negative grade."""

    def __init__(self, judgments: dict[tuple[str, str], int] | None = None) -> None:
        self.judgments: dict[tuple[str, str], int] = {}
        for (qid, did), grade in (judgments or {}).items():
            self.set(qid, did, grade)

    def set(self, query_id: str, doc_id: str, grade: int) -> None:
        if grade < 0:
            raise CorpusError(
                f"negative relevance grade {grade} for ({query_id}, {doc_id})"
            )
        key = (query_id, doc_id)
        if key in self.judgments and self.judgments[key] != grade:
            logger.warning(
                "qrels: duplicate judgment for (%s, %s): %d overrides %d",
                query_id, doc_id, grade, self.judgments[key],
            )
        self.judgments[key] = grade

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.judgments.get((query_id, doc_id), 0)

    def for_query(self, query_id: str) -> dict[str, int]:
        return {
            did: g for (qid, did), g in self.judgments.items() if qid == query_id
        }

    def query_ids(self) -> set[str]:
        return {qid for qid, _ in self.judgments}

    def __len__(self) -> int:
        return len(self.judgments)


@dataclass
class CandidateList:
    """First-stage output: entries sorted by score desc, ties by doc_id asc."""

    query_id: str
    entries: list[tuple[str, float]]

    @classmethod
    def from_scores(
        cls, query_id: str, scored: Iterable[tuple[str, float]]
    ) -> "CandidateList":
        entries = sorted(scored, key=lambda e: (-e[1], e[0]))
        seen: set[str] = set()
        for doc_id, _ in entries:
            if doc_id in seen:
                raise CorpusError(
                    f"duplicate doc_id {doc_id!r} in candidates for {query_id!r}"
                )
            seen.add(doc_id)
        return cls(query_id=query_id, entries=entries)

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.entries]

    def top(self, m: int) -> "CandidateList":
        return CandidateList(self.query_id, self.entries[:m])

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class RunResult:
    """One query's final ranking plus the tokens spent producing it."""

    query_id: str
    ranking: list[str]
    strategy_tag: str
    token_usage: "TokenLedger | None" = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if len(set(self.ranking)) != len(self.ranking):
            raise CorpusError(
                f"run for {self.query_id!r} contains duplicate doc_ids"
            )


def load_corpus(path: str | Path) -> Corpus:
    """Load a line-delimited JSON corpus ({doc_id, title, text} per line)."""
    corpus = Corpus()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                doc = Document(
                    doc_id=record["doc_id"],
                    title=record.get("title", ""),
                    text=record["text"],
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: malformed record: {exc}") from exc
            try:
                corpus.add(doc)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return corpus


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(json.dumps(
                {"doc_id": doc.doc_id, "title": doc.title, "text": doc.text},
                ensure_ascii=False,
            ) + "\n")


def load_queries(path: str | Path) -> list[Query]:
    """Load line-delimited JSON queries ({query_id, text} per line)."""
    queries: list[Query] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                q = Query(query_id=record["query_id"], text=record["text"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: malformed query: {exc}") from exc
            if q.query_id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate query_id {q.query_id!r}")
            seen.add(q.query_id)
            queries.append(q)
    return queries


def load_qrels(path: str | Path) -> Qrels:
    """Load whitespace-separated judgments: ``query_id 0 doc_id grade``."""
    qrels = Qrels()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise CorpusError(
                    f"{path}:{lineno}: expected 4 fields, got {len(parts)}"
                )
            qid, _, did, grade_str = parts
            try:
                grade = int(grade_str)
            except ValueError as exc:
                raise CorpusError(
                    f"{path}:{lineno}: non-integer grade {grade_str!r}"
                ) from exc
            try:
                qrels.set(qid, did, grade)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return qrels


def write_qrels(qrels: Qrels, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (qid, did), grade in qrels.judgments.items():
            fh.write(f"{qid} 0 {did} {grade}\n")


def write_run(runs: list[RunResult], path: str | Path) -> None:
    """Persist runs in TREC layout: ``query_id Q0 doc_id rank score tag``.

    The score column is synthetic (length - rank + 1) so external tools that
    sort by score reproduce the stored order.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for run in runs:
            total = len(run.ranking)
            for rank, doc_id in enumerate(run.ranking, start=1):
                score = total - rank + 1
                fh.write(
                    f"{run.query_id} Q0 {doc_id} {rank} {score} {run.strategy_tag}\n"
                )


def load_run(path: str | Path) -> list[RunResult]:
    """Load a run file; ranks per query must be contiguous from 1."""
    by_query: dict[str, list[tuple[int, str, str]]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise CorpusError(
                    f"{path}:{lineno}: expected 6 fields, got {len(parts)}"
                )
            qid, _, did, rank_str, _score, tag = parts
            try:
                rank = int(rank_str)
            except ValueError as exc:
                raise CorpusError(f"{path}:{lineno}: bad rank {rank_str!r}") from exc
            if qid not in by_query:
                by_query[qid] = []
                order.append(qid)
            by_query[qid].append((rank, did, tag))

    runs: list[RunResult] = []
    for qid in order:
        rows = sorted(by_query[qid])
        ranks = [r for r, _, _ in rows]
        if ranks != list(range(1, len(rows) + 1)):
            raise CorpusError(
                f"{path}: query {qid!r} has gapped or duplicated ranks"
            )
        tags = {tag for _, _, tag in rows}
        if len(tags) != 1:
            raise CorpusError(f"{path}: query {qid!r} mixes strategy tags {tags}")
        runs.append(RunResult(
            query_id=qid,
            ranking=[did for _, did, _ in rows],
            strategy_tag=tags.pop(),
        ))
    return runs
