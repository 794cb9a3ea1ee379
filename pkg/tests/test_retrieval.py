import math

import pytest

from scirerank.corpus import Corpus, Document, Query
from scirerank.embedding import HashEmbedder, cosine
from scirerank.retrieval import (
    BM25_B,
    BM25_K1,
    InvertedIndex,
    bm25_search,
    build_index,
    dense_search,
    tokenize,
)


def doc(doc_id, text, title=""):
    return Document(doc_id=doc_id, title=title, text=text)


class TestBuildIndex:
    def test_direct_counts(self):
        index = build_index(Corpus([doc("d0", "a b a")]))
        assert index.postings == {"a": [(0, 2)], "b": [(0, 1)]}
        assert index.doc_lengths == [3]
        assert index.avg_doc_length == 3.0
        assert index.doc_count == 1

    def test_empty_document_contributes_no_postings(self):
        index = build_index(Corpus([doc("d0", "a"), doc("d1", "...")]))
        assert index.doc_lengths == [1, 0]
        assert all(
            all(i == 0 for i, _ in plist) for plist in index.postings.values()
        )

    def test_rebuild_is_deterministic(self):
        corpus = Corpus([doc("d0", "x y"), doc("d1", "y z")])
        assert build_index(corpus) == build_index(corpus)

    def test_title_is_indexed(self):
        index = build_index(Corpus([doc("d0", "body", title="heading")]))
        assert "heading" in index.postings

    def test_persistence_round_trip(self, tmp_path):
        index = build_index(Corpus([doc("d0", "a b")]))
        path = tmp_path / "index.bin"
        index.save(path)
        assert InvertedIndex.load(path) == index


def reference_bm25(corpus_texts, query_terms, k1=BM25_K1, b=BM25_B):
    """Hand evaluation of the BM25 formula, independent of the index."""
    docs = [tokenize(t) for t in corpus_texts]
    n = len(docs)
    avg = sum(len(d) for d in docs) / n
    scores = []
    for tokens in docs:
        score = 0.0
        for term in query_terms:
            tf = tokens.count(term)
            if tf == 0:
                continue
            df = sum(1 for d in docs if term in d)
            idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
            score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(tokens) / avg))
        scores.append(score)
    return scores


class TestBM25Search:
    corpus_texts = ["apple banana apple", "banana cherry", "cherry dates figs grape"]

    def make_index(self):
        return build_index(Corpus(
            doc(f"d{i}", text) for i, text in enumerate(self.corpus_texts)
        ))

    def test_absent_term_returns_empty(self):
        result = bm25_search(self.make_index(), Query("q", "zebra"), m=10)
        assert result.entries == []

    def test_matches_hand_computed_formula(self):
        # Oracle values computed from the stated formula before comparing.
        expected = reference_bm25(self.corpus_texts, ["banana"])
        result = bm25_search(self.make_index(), Query("q", "banana"), m=10)
        got = dict(result.entries)
        for i, score in enumerate(expected):
            if score > 0:
                assert got[f"d{i}"] == pytest.approx(score, abs=1e-9)
            else:
                assert f"d{i}" not in got

    def test_multi_term_query(self):
        expected = reference_bm25(self.corpus_texts, ["banana", "cherry"])
        result = bm25_search(self.make_index(), Query("q", "banana cherry"), m=10)
        got = dict(result.entries)
        for i, score in enumerate(expected):
            assert got.get(f"d{i}", 0.0) == pytest.approx(score, abs=1e-9)

    def test_m_larger_than_corpus_returns_all_matching(self):
        result = bm25_search(self.make_index(), Query("q", "cherry"), m=100)
        assert len(result) == 2

    def test_scores_sorted_descending(self):
        result = bm25_search(self.make_index(), Query("q", "apple banana"), m=10)
        scores = [s for _, s in result.entries]
        assert scores == sorted(scores, reverse=True)

    def test_non_matching_never_present(self):
        # Score-0 documents are excluded entirely, so they cannot outrank
        # a matching document.
        result = bm25_search(self.make_index(), Query("q", "figs"), m=10)
        assert result.doc_ids() == ["d2"]


class TestDenseSearch:
    def test_identical_text_ranks_first(self):
        corpus = Corpus([
            doc("d0", "protein folding dynamics"),
            doc("d1", "graph attention networks"),
            doc("d2", "speech recognition lattice"),
        ])
        emb = HashEmbedder(dim=64, seed=1)
        result = dense_search(corpus, emb, Query("q", "graph attention networks"), m=3)
        assert result.doc_ids()[0] == "d1"

    def test_m_one_is_brute_force_argmax(self):
        corpus = Corpus([doc(f"d{i}", f"word{i} alpha beta") for i in range(10)])
        emb = HashEmbedder(dim=32, seed=2)
        query = Query("q", "word7 alpha")
        qv = emb.embed(query.text)
        brute = max(
            ((d.doc_id, cosine(qv, emb.embed(d.text))) for d in corpus),
            key=lambda pair: (pair[1], [-ord(c) for c in pair[0]]),
        )
        result = dense_search(corpus, emb, query, m=1)
        assert result.doc_ids() == [brute[0]]

    def test_empty_corpus(self):
        result = dense_search(Corpus(), HashEmbedder(), Query("q", "x"), m=5)
        assert result.entries == []
