import pytest

from scirerank.corpus import Corpus, Document
from scirerank.extraction import (
    CategoryPath,
    ExtractionError,
    FeatureSet,
    FeatureStore,
    extract_all,
    extract_keywords,
    extract_sections,
    parse_category,
    parse_lines,
    parse_terms,
)
from scirerank.llm import MockBackend


def doc(doc_id="d1", text="a study of things"):
    return Document(doc_id=doc_id, title="t", text=text)


class TestParseCategory:
    def test_arrow_form(self):
        path = parse_category(
            "NLP -> Text Generation -> Controllable Multi-Attribute Generation"
        )
        assert path.levels == (
            "NLP", "Text Generation", "Controllable Multi-Attribute Generation",
        )

    def test_numbered_lines(self):
        path = parse_category("1. Biology\n2. Genomics\n3. CRISPR screening methods")
        assert path.levels == ("Biology", "Genomics", "CRISPR screening methods")

    def test_single_phrase_is_error(self):
        with pytest.raises(ExtractionError):
            parse_category("just one phrase")

    def test_surplus_arrow_segments_fold_into_title_level(self):
        path = parse_category("A -> B -> C -> D")
        assert path.levels == ("A", "B", "C -> D")


class TestParseLists:
    def test_numbered_headings_stripped(self):
        out = parse_lines("1. Intro\n2) Methods\n- Results\n* Discussion\n5: End")
        assert out == ["Intro", "Methods", "Results", "Discussion", "End"]

    def test_label_prefix_stripped(self):
        assert parse_terms("Keywords: a, b, c") == ["a", "b", "c"]

    def test_case_insensitive_dedup_keeps_first_casing(self):
        assert parse_terms("GAN, gan, Gan, vae") == ["GAN", "vae"]

    def test_comma_and_line_separated_terms(self):
        assert parse_terms("a, b\nc, d") == ["a", "b", "c", "d"]


class TestSoftBounds:
    def test_two_headings_accepted_with_warning(self, caplog):
        backend = MockBackend.scripted("1. One\n2. Two")
        with caplog.at_level("WARNING"):
            sections = extract_sections(doc(), backend, "m")
        assert sections == ["One", "Two"]
        assert any("sections" in r.message for r in caplog.records)

    def test_empty_response_is_error(self):
        backend = MockBackend.scripted("   \n  ")
        with pytest.raises(ExtractionError):
            extract_sections(doc(), backend, "m")

    def test_duplicate_keyword_removed(self):
        terms = ", ".join([f"term{i}" for i in range(34)] + ["term0"])
        backend = MockBackend.scripted(terms)
        assert len(extract_keywords(doc(), backend, "m")) == 34

    def test_few_keywords_accepted_with_warning(self, caplog):
        backend = MockBackend.scripted(", ".join(f"k{i}" for i in range(12)))
        with caplog.at_level("WARNING"):
            keywords = extract_keywords(doc(), backend, "m")
        assert len(keywords) == 12
        assert any("keywords" in r.message for r in caplog.records)


def feature_responder(req):
    text = req.prompt
    if text.startswith("Please analyze"):
        return "Science -> Field -> Topic of the document"
    if text.startswith("Identify 3-8"):
        return "1. Intro\n2. Methods\n3. Results"
    if text.startswith("Extract a comprehensive"):
        return ", ".join(f"kw{i}" for i in range(30))
    return "\n".join(f"{i}. query {i}" for i in range(1, 21))


class TestExtractAll:
    def test_call_accounting(self, tmp_path):
        corpus = Corpus([doc(f"d{i}") for i in range(3)])
        backend = MockBackend(responder=feature_responder)
        store = FeatureStore(tmp_path / "features.jsonl")
        report = extract_all(corpus, backend, store, "mock-model")
        assert len(report.extracted) == 3
        assert backend.call_count == 3 * 4
        assert len(store) == 3

    def test_rerun_is_idempotent(self, tmp_path):
        corpus = Corpus([doc(f"d{i}") for i in range(3)])
        store = FeatureStore(tmp_path / "features.jsonl")
        extract_all(corpus, MockBackend(responder=feature_responder), store, "m")
        backend = MockBackend(responder=feature_responder)
        report = extract_all(corpus, backend, store, "m")
        assert backend.call_count == 0
        assert report.extracted == []
        assert sorted(report.skipped) == ["d0", "d1", "d2"]

    def test_partial_failure_reported_and_progress_kept(self, tmp_path):
        def flaky(req):
            if "poison" in req.prompt and req.prompt.startswith("Please analyze"):
                return "unparseable single phrase"
            return feature_responder(req)

        corpus = Corpus([doc("d0"), doc("d1", text="poison text"), doc("d2")])
        store = FeatureStore(tmp_path / "features.jsonl")
        report = extract_all(corpus, MockBackend(responder=flaky), store, "m")
        assert sorted(report.extracted) == ["d0", "d2"]
        assert list(report.failures) == ["d1"]
        assert len(store) == 2

    def test_store_round_trip(self, tmp_path):
        corpus = Corpus([doc("d0")])
        path = tmp_path / "features.jsonl"
        store = FeatureStore(path)
        extract_all(corpus, MockBackend(responder=feature_responder), store, "mock-model")
        reloaded = FeatureStore(path)
        assert reloaded.get("d0") == store.get("d0")
        assert reloaded.get("d0").extractor_model == "mock-model"


class TestInvariants:
    def test_empty_feature_list_is_hard_error(self):
        with pytest.raises(ExtractionError):
            FeatureSet(
                category=CategoryPath(("a", "b", "c")),
                sections=(),
                keywords=("k",),
                pseudo_queries=("q",),
                extractor_model="m",
            )

    def test_category_needs_three_levels(self):
        with pytest.raises(ExtractionError):
            CategoryPath(("a", "b"))
