import json

import pytest

from scirerank.corpus import (
    CandidateList,
    CorpusError,
    Document,
    Qrels,
    RunResult,
    load_corpus,
    load_qrels,
    load_run,
    write_run,
)


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestLoadCorpus:
    def test_well_formed(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [
            json.dumps({"doc_id": f"d{i}", "title": f"t{i}", "text": f"body {i}"})
            for i in range(3)
        ])
        corpus = load_corpus(path)
        assert len(corpus) == 3
        assert corpus["d1"].text == "body 1"

    def test_duplicate_id_names_the_id(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        records = [{"doc_id": "d0", "text": "a"}, {"doc_id": "d1", "text": "b"},
                   {"doc_id": "d2", "text": "c"}, {"doc_id": "d3", "text": "d"},
                   {"doc_id": "d1", "text": "e"}]
        write_lines(path, [json.dumps(r) for r in records])
        with pytest.raises(CorpusError, match="d1"):
            load_corpus(path)

    def test_empty_file_is_valid(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text("")
        assert len(load_corpus(path)) == 0

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [json.dumps({"doc_id": "d0", "text": "a"}), "{not json"])
        with pytest.raises(CorpusError, match=":2"):
            load_corpus(path)


class TestLoadQrels:
    def test_direct_parse(self, tmp_path):
        path = tmp_path / "qrels.txt"
        write_lines(path, ["q1 0 d1 1"])
        qrels = load_qrels(path)
        assert qrels.grade("q1", "d1") == 1

    def test_negative_grade_rejected(self, tmp_path):
        path = tmp_path / "qrels.txt"
        write_lines(path, ["q1 0 d1 -2"])
        with pytest.raises(CorpusError):
            load_qrels(path)

    def test_non_integer_grade_rejected(self, tmp_path):
        path = tmp_path / "qrels.txt"
        write_lines(path, ["q1 0 d1 high"])
        with pytest.raises(CorpusError):
            load_qrels(path)

    def test_later_duplicate_overrides_with_warning(self, tmp_path, caplog):
        path = tmp_path / "qrels.txt"
        write_lines(path, ["q1 0 d1 0", "q1 0 d1 2"])
        with caplog.at_level("WARNING"):
            qrels = load_qrels(path)
        assert qrels.grade("q1", "d1") == 2
        assert any("q1" in record.message for record in caplog.records)

    def test_grade_zero_is_explicit_non_relevance(self, tmp_path):
        path = tmp_path / "qrels.txt"
        write_lines(path, ["q1 0 d1 0"])
        qrels = load_qrels(path)
        assert "q1" in qrels.query_ids()
        assert qrels.for_query("q1") == {"d1": 0}


class TestRunFile:
    def test_three_docs_three_ranks(self, tmp_path):
        path = tmp_path / "run.txt"
        write_run([RunResult("q1", ["a", "b", "c"], "vanilla")], path)
        lines = path.read_text().splitlines()
        assert len(lines) == 3
        assert [line.split()[3] for line in lines] == ["1", "2", "3"]

    def test_round_trip_identity(self, tmp_path):
        runs = [
            RunResult("q1", ["a", "b", "c"], "corank"),
            RunResult("q2", ["c", "a"], "corank"),
        ]
        path = tmp_path / "run.txt"
        write_run(runs, path)
        assert load_run(path) == runs

    def test_duplicate_rank_rejected(self, tmp_path):
        path = tmp_path / "run.txt"
        write_lines(path, ["q1 Q0 a 1 3 t", "q1 Q0 b 1 2 t", "q1 Q0 c 2 1 t"])
        with pytest.raises(CorpusError, match="rank"):
            load_run(path)

    def test_rank_gap_rejected(self, tmp_path):
        path = tmp_path / "run.txt"
        write_lines(path, ["q1 Q0 a 1 2 t", "q1 Q0 b 3 1 t"])
        with pytest.raises(CorpusError):
            load_run(path)


class TestCandidateList:
    def test_sorts_by_score_then_doc_id(self):
        cl = CandidateList.from_scores("q", [("b", 1.0), ("a", 1.0), ("c", 2.0)])
        assert cl.doc_ids() == ["c", "a", "b"]

    def test_resort_is_noop(self):
        cl = CandidateList.from_scores("q", [("a", 3.0), ("b", 2.0), ("c", 1.0)])
        assert CandidateList.from_scores("q", cl.entries) == cl

    def test_duplicate_doc_rejected(self):
        with pytest.raises(CorpusError, match="a"):
            CandidateList.from_scores("q", [("a", 1.0), ("a", 2.0)])


def test_duplicate_ranking_rejected_in_run_result():
    with pytest.raises(CorpusError):
        RunResult("q", ["a", "a"], "vanilla")


def test_empty_doc_id_rejected():
    with pytest.raises(CorpusError):
        Document(doc_id="", title="", text="x")


def test_qrels_for_query_filters_by_query():
    qrels = Qrels({("q1", "d1"): 1, ("q2", "d1"): 2})
    assert qrels.for_query("q2") == {"d1": 2}
