"""Compact, query-adapted document representations and token accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Callable

if TYPE_CHECKING:
    from .extraction import CategoryPath
    from .embedding import SelectedFeatures

Tokenizer = Callable[[str], int]


class Form(Enum):
    """Representation granularities, from a single pseudo query up to the
    full category / section / keywords concatenation."""

    PSEUDO_QUERY = 1
    CATEGORY = 2
    CATEGORY_SECTION = 3
    CATEGORY_SECTION_KEYWORDS = 4


class RepresentationError(ValueError):
    """A form was requested without the features it needs."""


def count_tokens(text: str, tokenizer: Tokenizer | None = None) -> int:
    """Estimate the token length of ``text``.

    The default heuristic is ceil(words * 4/3), which tracks BPE tokenizers
    closely enough for budget decisions. Pass an exact per-model tokenizer
    when cost reports must match provider billing.
    """
    if tokenizer is not None:
        return tokenizer(text)
    words = len(text.split())
    return math.ceil(words * 4 / 3)


@dataclass(frozen=True)
class CompactRepresentation:
    doc_id: str
    form: Form
    text: str
    token_estimate: int


def build_representation(
    doc_id: str,
    form: Form,
    category: "CategoryPath | None" = None,
    selected: "SelectedFeatures | None" = None,
    tokenizer: Tokenizer | None = None,
) -> CompactRepresentation:
    """Render one document's compact text for the given form.

    Form 4: ``L1 -> L2 -> L3: <section> (<kw1>, ..., <kwK>)``; Form 3 drops
    the parenthesized keywords; Form 2 is the arrow-joined category path
    alone; Form 1 is the selected pseudo query alone. An empty keyword
    selection degenerates Form 4 to the Form 3 rendering.
    """
    if form is Form.PSEUDO_QUERY:
        if selected is None or not selected.pseudo_query:
            raise RepresentationError(
                f"form {form.name} requires a selected pseudo_query"
            )
        text = selected.pseudo_query
    else:
        if category is None:
            raise RepresentationError(f"form {form.name} requires a category path")
        path = " -> ".join(category.levels)
        if form is Form.CATEGORY:
            text = path
        else:
            if selected is None or not selected.section:
                raise RepresentationError(
                    f"form {form.name} requires a selected section"
                )
            text = f"{path}: {selected.section}"
            if form is Form.CATEGORY_SECTION_KEYWORDS and selected.keywords:
                text += " (" + ", ".join(selected.keywords) + ")"
    return CompactRepresentation(
        doc_id=doc_id,
        form=form,
        text=text,
        token_estimate=count_tokens(text, tokenizer),
    )


def doc_token_estimate(doc, tokenizer: Tokenizer | None = None) -> int:
    """Token estimate for a document's full text, cached on the document."""
    if doc.token_estimate is None:
        doc.token_estimate = count_tokens(doc.text, tokenizer)
    return doc.token_estimate
