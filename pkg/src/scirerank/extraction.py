"""Offline zero-shot extraction of semantic features from documents.

Four features per document: a three-level category path, section headings,
keywords, and pseudo queries. LLM output is free-form prose, so the parsers
here are deliberately tolerant: they strip list markers and label prefixes
and deduplicate, but reject responses that yield nothing usable.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus, Document
from .llm import Backend, ChatRequest, ChatResponse, EXTRACTION_MAX_OUTPUT_TOKENS

logger = logging.getLogger(__name__)

CATEGORY_PROMPT = """\
Please analyze this document for its topic and categories:
{document}
Provide a comprehensive analysis that includes:
1. The broad category (coarse-grained) this document belongs to
2. The specific category (fine-grained) within that broad category
3. A concise, title-like description of the document's topic
Deliver the analysis in one concise paragraph."""

SECTIONS_PROMPT = """\
Identify 3-8 logical sections that would effectively organize this document's content:
{document}
Generate appropriate subtitle-style headings for each section that would help structure the document. Sections should be comprehensive and cover the full scope of the content."""

KEYWORDS_PROMPT = """\
Extract a comprehensive list of at least 30 diverse keywords and concepts from this document:
{document}
Generate as many diverse, relevant keywords and concepts as possible. Include both specific terms and broader conceptual themes."""

PSEUDO_QUERIES_PROMPT = """\
Generate 20 diverse search queries that users might enter to find this document:
{document}
Create different types of queries that cover various aspects of the document content. Queries should be diverse in wording, length, and specificity."""

# Expected list sizes are soft: models do not always comply, and downstream
# adaptive selection degrades gracefully with short lists.
SECTIONS_RANGE = (3, 8)
KEYWORDS_MIN = 30
PSEUDO_QUERIES_EXPECTED = 20


class ExtractionError(ValueError):
    """A response could not be parsed into a valid feature."""

    def __init__(self, message: str, raw_response: str = "") -> None:
        super().__init__(message)
        self.raw_response = raw_response


@dataclass(frozen=True)
class CategoryPath:
    """Three-level broad -> specific -> title-like topic classification."""

    levels: tuple[str, str, str]

    def __post_init__(self) -> None:
        if len(self.levels) != 3 or not all(self.levels):
            raise ExtractionError(f"category path needs 3 non-empty levels: {self.levels!r}")


@dataclass(frozen=True)
class FeatureSet:
    category: CategoryPath
    sections: tuple[str, ...]
    keywords: tuple[str, ...]
    pseudo_queries: tuple[str, ...]
    extractor_model: str

    def __post_init__(self) -> None:
        for name, values in (
            ("sections", self.sections),
            ("keywords", self.keywords),
            ("pseudo_queries", self.pseudo_queries),
        ):
            if not values:
                raise ExtractionError(f"feature set has empty {name}")


_MARKER_RE = re.compile(r"^\s*(?:[-*•]+|\(?\d+[.):\]]?|\[\d+\])\s+")
_LABEL_RE = re.compile(
    r"^(?:keywords?|concepts?|sections?|headings?|queries|search queries|answer)\s*:\s*",
    re.IGNORECASE,
)


def _strip_marker(line: str) -> str:
    return _LABEL_RE.sub("", _MARKER_RE.sub("", line.strip())).strip()


def _dedup(items: list[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for item in items:
        key = item.lower()
        if key not in seen:
            seen.add(key)
            out.append(item)
    return out


def parse_lines(text: str) -> list[str]:
    """One item per non-empty line, markers and label prefixes stripped."""
    items = [_strip_marker(line) for line in text.splitlines()]
    return _dedup([item for item in items if item])


def parse_terms(text: str) -> list[str]:
    """Comma- or line-separated short terms, deduplicated case-insensitively."""
    items: list[str] = []
    for line in text.splitlines():
        line = _strip_marker(line)
        if not line:
            continue
        items.extend(part.strip() for part in line.split(",") if part.strip())
    return _dedup(items)


def parse_category(text: str) -> CategoryPath:
    """Accepts an explicit ``A -> B -> C`` arrow path or an enumerated list."""
    for line in text.splitlines():
        if "->" in line:
            parts = [p.strip() for p in _strip_marker(line).split("->") if p.strip()]
            if len(parts) >= 3:
                # A title-like third level may itself contain arrows; fold
                # any surplus segments back into it.
                return CategoryPath((parts[0], parts[1], " -> ".join(parts[2:])))
    items = parse_lines(text)
    if len(items) >= 3:
        return CategoryPath(tuple(items[:3]))
    raise ExtractionError(
        f"could not recover 3 category levels (got {len(items)})", raw_response=text
    )


def _request(prompt_template: str, doc: Document, model_name: str) -> ChatRequest:
    return ChatRequest(
        model_name=model_name,
        prompt=prompt_template.format(document=doc.text),
        max_output_tokens=EXTRACTION_MAX_OUTPUT_TOKENS,
    )


def extract_category(doc: Document, backend: Backend, model_name: str) -> CategoryPath:
    response = backend.complete(_request(CATEGORY_PROMPT, doc, model_name))
    return parse_category(response.text)


def extract_sections(doc: Document, backend: Backend, model_name: str) -> list[str]:
    response = backend.complete(_request(SECTIONS_PROMPT, doc, model_name))
    sections = parse_lines(response.text)
    if not sections:
        raise ExtractionError("no parseable section headings", raw_response=response.text)
    lo, hi = SECTIONS_RANGE
    if not lo <= len(sections) <= hi:
        logger.warning("doc %s: %d sections outside expected %d-%d",
                       doc.doc_id, len(sections), lo, hi)
    return sections


def extract_keywords(doc: Document, backend: Backend, model_name: str) -> list[str]:
    response = backend.complete(_request(KEYWORDS_PROMPT, doc, model_name))
    keywords = parse_terms(response.text)
    if not keywords:
        raise ExtractionError("no parseable keywords", raw_response=response.text)
    if len(keywords) < KEYWORDS_MIN:
        logger.warning("doc %s: only %d keywords (expected >= %d)",
                       doc.doc_id, len(keywords), KEYWORDS_MIN)
    return keywords


def extract_pseudo_queries(doc: Document, backend: Backend, model_name: str) -> list[str]:
    response = backend.complete(_request(PSEUDO_QUERIES_PROMPT, doc, model_name))
    queries = parse_lines(response.text)
    if not queries:
        raise ExtractionError("no parseable pseudo queries", raw_response=response.text)
    if len(queries) != PSEUDO_QUERIES_EXPECTED:
        logger.warning("doc %s: %d pseudo queries (expected %d)",
                       doc.doc_id, len(queries), PSEUDO_QUERIES_EXPECTED)
    return queries


def extract_features(doc: Document, backend: Backend, model_name: str) -> FeatureSet:
    """Run all four extractions for one document."""
    if not doc.text:
        raise ExtractionError(f"doc {doc.doc_id}: empty text")
    return FeatureSet(
        category=extract_category(doc, backend, model_name),
        sections=tuple(extract_sections(doc, backend, model_name)),
        keywords=tuple(extract_keywords(doc, backend, model_name)),
        pseudo_queries=tuple(extract_pseudo_queries(doc, backend, model_name)),
        extractor_model=model_name,
    )


class FeatureStore:
    """Line-delimited sidecar of extracted features, keyed by doc_id.

    Append-only on disk; safe for concurrent puts from extraction workers.
    """

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._features: dict[str, FeatureSet] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    self._features[record["doc_id"]] = FeatureSet(
                        category=CategoryPath(tuple(record["category_levels"])),
                        sections=tuple(record["sections"]),
                        keywords=tuple(record["keywords"]),
                        pseudo_queries=tuple(record["pseudo_queries"]),
                        extractor_model=record["extractor_model"],
                    )

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._features

    def __len__(self) -> int:
        return len(self._features)

    def get(self, doc_id: str) -> FeatureSet | None:
        return self._features.get(doc_id)

    def put(self, doc_id: str, features: FeatureSet) -> None:
        with self._lock:
            if doc_id in self._features:
                return
            self._features[doc_id] = features
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({
                    "doc_id": doc_id,
                    "category_levels": list(features.category.levels),
                    "sections": list(features.sections),
                    "keywords": list(features.keywords),
                    "pseudo_queries": list(features.pseudo_queries),
                    "extractor_model": features.extractor_model,
                }, ensure_ascii=False) + "\n")


@dataclass
class ExtractionReport:
    extracted: list[str]
    skipped: list[str]
    failures: dict[str, str]


def extract_all(
    corpus: Corpus,
    backend: Backend,
    store: FeatureStore,
    model_name: str,
    parallelism: int = 4,
) -> ExtractionReport:
    """Extract features for every document lacking them. Resumable: documents
    already in the store are skipped; per-document failures are collected and
    reported at the end, with partial progress persisted."""
    pending = [doc for doc in corpus if doc.doc_id not in store]
    skipped = [doc.doc_id for doc in corpus if doc.doc_id in store]
    extracted: list[str] = []
    failures: dict[str, str] = {}

    def work(doc: Document) -> tuple[str, FeatureSet | None, str | None]:
        try:
            return doc.doc_id, extract_features(doc, backend, model_name), None
        except Exception as exc:  # noqa: BLE001 - per-doc failures must not abort the batch
            return doc.doc_id, None, str(exc)

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        for doc_id, features, error in pool.map(work, pending):
            if features is not None:
                store.put(doc_id, features)
                extracted.append(doc_id)
            else:
                failures[doc_id] = error or "unknown error"
                logger.error("extraction failed for %s: %s", doc_id, error)

    return ExtractionReport(extracted=extracted, skipped=skipped, failures=failures)
