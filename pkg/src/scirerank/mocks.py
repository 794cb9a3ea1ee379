"""Deterministic end-to-end mock backend.

Routes extraction prompts to synthetic features derived from the document
text, and reranking prompts to a lexical-overlap ranking, so the whole
extract -> rerank -> eval pipeline runs offline and reproducibly.
"""

from __future__ import annotations

import re

from .extraction import (
    CATEGORY_PROMPT,
    KEYWORDS_PROMPT,
    PSEUDO_QUERIES_PROMPT,
    SECTIONS_PROMPT,
)
from .llm import ChatRequest, MockBackend, mock_rank_by_overlap
from .rerank import RERANK_PROMPT_HEADER

_WORD_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9-]*")

_RERANK_FIRST_LINE = RERANK_PROMPT_HEADER.splitlines()[0]


def _first_line(template: str) -> str:
    return template.splitlines()[0]


_PROMPT_KINDS = {
    _first_line(CATEGORY_PROMPT): "category",
    _first_line(SECTIONS_PROMPT): "sections",
    _first_line(KEYWORDS_PROMPT): "keywords",
    _first_line(PSEUDO_QUERIES_PROMPT): "pseudo_queries",
    _RERANK_FIRST_LINE: "rerank",
}

_TRAILER_STARTS = {
    "category": "Provide a comprehensive analysis",
    "sections": "Generate appropriate subtitle-style headings",
    "keywords": "Generate as many diverse",
    "pseudo_queries": "Create different types of queries",
}


def _document_text(prompt: str, kind: str) -> str:
    lines = prompt.splitlines()[1:]
    trailer = _TRAILER_STARTS[kind]
    body: list[str] = []
    for line in lines:
        if line.startswith(trailer):
            break
        body.append(line)
    return "\n".join(body).strip()


def _distinct_words(text: str) -> list[str]:
    seen: set[str] = set()
    words: list[str] = []
    for word in _WORD_RE.findall(text):
        key = word.lower()
        if key not in seen:
            seen.add(key)
            words.append(word)
    return words


def _parse_rerank_prompt(prompt: str) -> tuple[str, list[str]]:
    query = ""
    passages: list[str] = []
    current: list[str] | None = None
    for line in prompt.splitlines():
        if line.startswith("Search Query: "):
            query = line[len("Search Query: "):].rstrip()
            if query.endswith("."):
                query = query[:-1]
            break
        next_id = len(passages) + 1
        marker = f"[{next_id}] "
        if line.startswith(marker):
            if current is not None:
                passages[-1] = "\n".join(current)
            passages.append(line[len(marker):])
            current = [passages[-1]]
        elif current is not None:
            current.append(line)
            passages[-1] = "\n".join(current)
    return query, passages


def _synthetic_category(doc_text: str) -> str:
    words = _distinct_words(doc_text)
    broad = words[0] if words else "General"
    specific = words[1] if len(words) > 1 else broad
    title_like = " ".join(words[:8]) if words else "Untitled"
    return f"{broad} -> {specific} -> {title_like}"


def _synthetic_sections(doc_text: str) -> str:
    words = _distinct_words(doc_text)
    chunks = [words[i:i + 4] for i in range(0, len(words), 4)][:4] or [["Overview"]]
    return "\n".join(
        f"{i}. {' '.join(chunk)}" for i, chunk in enumerate(chunks, start=1)
    )


def _synthetic_keywords(doc_text: str) -> str:
    words = _distinct_words(doc_text)[:40] or ["untitled"]
    return ", ".join(words)


def _synthetic_pseudo_queries(doc_text: str) -> str:
    words = _distinct_words(doc_text)
    queries = [
        " ".join(words[i:i + 3]) for i in range(0, max(len(words) - 2, 1), 3)
    ][:20] or [doc_text[:40] or "untitled"]
    return "\n".join(f"{i}. {q}" for i, q in enumerate(queries, start=1))


def _respond(req: ChatRequest) -> str:
    first = req.prompt.splitlines()[0]
    kind = _PROMPT_KINDS.get(first)
    if kind is None:
        raise ValueError(f"mock backend got an unrecognized prompt: {first!r}")
    if kind == "rerank":
        query, passages = _parse_rerank_prompt(req.prompt)
        return mock_rank_by_overlap(query, passages)
    doc_text = _document_text(req.prompt, kind)
    return {
        "category": _synthetic_category,
        "sections": _synthetic_sections,
        "keywords": _synthetic_keywords,
        "pseudo_queries": _synthetic_pseudo_queries,
    }[kind](doc_text)


def overlap_mock_backend() -> MockBackend:
    """Backend that answers extraction prompts with deterministic synthetic
    features and reranking prompts with the word-overlap ranking."""
    return MockBackend(responder=_respond)
