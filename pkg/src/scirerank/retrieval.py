"""First-stage retrieval: a self-contained BM25 inverted index plus dense
scoring through any embedder. Both emit sorted, deduplicated CandidateLists."""

from __future__ import annotations

import math
import pickle
import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import CandidateList, Corpus, Query
from .embedding import Embedder, cosine

_TOKEN_RE = re.compile(r"[a-z0-9]+")

BM25_K1 = 1.2
BM25_B = 0.75


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics. No stemming."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[int, int]]]
    doc_lengths: list[int]
    avg_doc_length: float
    doc_count: int
    doc_ids: list[str]

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            pickle.dump(self, fh)

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        with open(path, "rb") as fh:
            index = pickle.load(fh)
        if not isinstance(index, cls):
            raise ValueError(f"{path} is not a persisted index")
        return index


def _doc_text(doc) -> str:
    return f"{doc.title} {doc.text}" if doc.title else doc.text


def build_index(corpus: Corpus) -> InvertedIndex:
    """Index lowercased, punctuation-split tokens of title+text."""
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    doc_ids: list[str] = []
    for doc_index, doc in enumerate(corpus):
        tokens = tokenize(_doc_text(doc))
        doc_lengths.append(len(tokens))
        doc_ids.append(doc.doc_id)
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, []).append((doc_index, tf))
    doc_count = len(doc_ids)
    avg = sum(doc_lengths) / doc_count if doc_count else 0.0
    return InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=avg,
        doc_count=doc_count,
        doc_ids=doc_ids,
    )


def bm25_search(
    index: InvertedIndex,
    query: Query,
    m: int,
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> CandidateList:
    """Top-m documents by BM25. idf uses the +1-inside-log variant, so scores
    are never negative and non-matching documents (score 0) are excluded."""
    scores: dict[int, float] = {}
    for term in tokenize(query.text):
        plist = index.postings.get(term)
        if not plist:
            continue
        df = len(plist)
        idf = math.log((index.doc_count - df + 0.5) / (df + 0.5) + 1.0)
        for doc_index, tf in plist:
            dl = index.doc_lengths[doc_index]
            denom = tf + k1 * (1 - b + b * dl / index.avg_doc_length)
            scores[doc_index] = scores.get(doc_index, 0.0) + idf * tf * (k1 + 1) / denom
    scored = [(index.doc_ids[i], score) for i, score in scores.items()]
    candidates = CandidateList.from_scores(query.query_id, scored)
    return candidates.top(m)


def dense_search(
    corpus: Corpus,
    embedder: Embedder,
    query: Query,
    m: int,
) -> CandidateList:
    """Top-m documents by cosine similarity of title+text embeddings."""
    query_vec = embedder.embed(query.text)
    scored = [
        (doc.doc_id, cosine(query_vec, embedder.embed(_doc_text(doc))))
        for doc in corpus
    ]
    return CandidateList.from_scores(query.query_id, scored).top(m)
