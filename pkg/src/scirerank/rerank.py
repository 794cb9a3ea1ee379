"""Listwise reranking machinery: prompt construction, permutation parsing and
repair, the vanilla and sliding-window strategies, and the two-stage
coarse-over-compact-representations / fine-over-full-text pipeline."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .corpus import CandidateList, Corpus, Query, RunResult
from .embedding import Embedder, adaptive_select
from .evaluation import TokenLedger
from .extraction import FeatureStore
from .llm import Backend, ChatRequest, DEFAULT_SEED, DEFAULT_TEMPERATURE, RERANK_MAX_OUTPUT_TOKENS
from .representation import Form, build_representation

RERANK_PROMPT_HEADER = """\
You are an LLM reranker, an intelligent assistant that can rank passages based on their relevancy to the query.
I will provide you with {num} passages (either represented by full text, previous user query, keywords or structured analysis), each indicated by a numerical identifier [].
Rank the passages based on their relevance to the search query: {query}.
"""

RERANK_PROMPT_FOOTER = """\
Search Query: {query}.
Rank the {num} passages above based on their relevance to the search query. All the passages should be in descending order of relevance.
The output format should be [passage_id] > [passage_id] > ..., (If the full list is very long, generate at least 10) e.g., [4] > [2] > ... Only respond with the ranking results, do not say any word or explain."""


class RerankError(RuntimeError):
    pass


class ParseError(RerankError):
    """No usable passage ids could be extracted from a model response."""

    def __init__(self, message: str, raw_response: str) -> None:
        super().__init__(message)
        self.raw_response = raw_response


@dataclass(frozen=True)
class Permutation:
    """A bijection on 1..m, the validated result of parsing a model ranking."""

    order: tuple[int, ...]

    def __post_init__(self) -> None:
        m = len(self.order)
        if sorted(self.order) != list(range(1, m + 1)):
            raise RerankError(f"not a permutation of 1..{m}: {self.order}")

    def apply(self, items: Sequence) -> list:
        return [items[i - 1] for i in self.order]


class Strategy(Enum):
    VANILLA = "vanilla"
    SLIDING = "sliding"
    CORANK = "corank"
    CORANK_SLIDING = "corank_sliding"


@dataclass
class RerankConfig:
    strategy: Strategy = Strategy.CORANK
    vanilla_m: int = 20
    sliding_total: int = 100
    window: int = 20
    step: int = 10
    coarse_m: int = 200
    fine_k: int = 20
    form: Form = Form.CATEGORY_SECTION_KEYWORDS
    k_keywords: int = 5

    def __post_init__(self) -> None:
        if not (1 <= self.step <= self.window <= self.sliding_total):
            raise ValueError(
                f"need step <= window <= sliding_total, got "
                f"{self.step}/{self.window}/{self.sliding_total}"
            )
        if not (1 <= self.fine_k <= self.coarse_m):
            raise ValueError(
                f"need 1 <= fine_k <= coarse_m, got {self.fine_k}/{self.coarse_m}"
            )


def build_listwise_prompt(query: str, passages: Sequence[str]) -> str:
    if not passages:
        raise RerankError("cannot build a reranking prompt with no passages")
    num = len(passages)
    parts = [RERANK_PROMPT_HEADER.format(num=num, query=query)]
    parts.extend(f"[{i}] {passage}\n" for i, passage in enumerate(passages, start=1))
    parts.append(RERANK_PROMPT_FOOTER.format(num=num, query=query))
    return "".join(parts)


_ID_RE = re.compile(r"\[(\d+)\]")


def parse_ranking(response_text: str, m: int) -> Permutation:
    """Extract bracketed ids in order of appearance and repair into a valid
    permutation: drop ids outside 1..m, keep only the first occurrence of a
    duplicate, then append every unmentioned id in original candidate order."""
    if m < 1:
        raise RerankError("m must be >= 1")
    seen: set[int] = set()
    order: list[int] = []
    for match in _ID_RE.finditer(response_text):
        idx = int(match.group(1))
        if 1 <= idx <= m and idx not in seen:
            seen.add(idx)
            order.append(idx)
    if not order:
        raise ParseError(
            f"no valid passage ids in ranking response", raw_response=response_text
        )
    order.extend(i for i in range(1, m + 1) if i not in seen)
    return Permutation(tuple(order))


class Reranker:
    """Binds a backend and generation parameters; all strategies preserve the
    permutation invariant (no document lost or duplicated)."""

    def __init__(
        self,
        backend: Backend,
        model_name: str = "mock",
        temperature: float = DEFAULT_TEMPERATURE,
        seed: int = DEFAULT_SEED,
        max_output_tokens: int = RERANK_MAX_OUTPUT_TOKENS,
    ) -> None:
        self.backend = backend
        self.model_name = model_name
        self.temperature = temperature
        self.seed = seed
        self.max_output_tokens = max_output_tokens

    def listwise(
        self,
        query: str,
        items: Sequence[tuple[str, str]],
        ledger: TokenLedger | None = None,
        stage: str = "rerank",
    ) -> list[str]:
        """Single-call listwise rerank of (doc_id, text) items."""
        if not items:
            raise RerankError("no items to rerank")
        prompt = build_listwise_prompt(query, [text for _, text in items])
        request = ChatRequest(
            model_name=self.model_name,
            prompt=prompt,
            temperature=self.temperature,
            seed=self.seed,
            max_output_tokens=self.max_output_tokens,
        )
        try:
            response = self.backend.complete(request)
            permutation = parse_ranking(response.text, len(items))
        except ParseError as exc:
            raise ParseError(
                f"query {query!r}, stage {stage}: {exc}", exc.raw_response
            ) from exc
        except RerankError as exc:
            raise RerankError(f"query {query!r}, stage {stage}: {exc}") from exc
        if ledger is not None:
            ledger.add(stage, response.prompt_tokens, response.completion_tokens)
        return [doc_id for doc_id, _ in permutation.apply(list(items))]

    def sliding_window(
        self,
        query: str,
        items: Sequence[tuple[str, str]],
        window: int,
        step: int,
        ledger: TokenLedger | None = None,
        stage: str = "rerank",
    ) -> list[str]:
        """Bottom-up overlapping-window rerank. Each pass mutates the working
        list, so items promoted in one window carry into the next."""
        if window < 1 or not (1 <= step <= window):
            raise RerankError(f"invalid window/step: {window}/{step}")
        texts = dict(items)
        working = [doc_id for doc_id, _ in items]
        for start in window_starts(len(working), window, step):
            chunk = working[start:start + window]
            reranked = self.listwise(
                query, [(doc_id, texts[doc_id]) for doc_id in chunk], ledger, stage
            )
            working[start:start + window] = reranked
        return working


def window_starts(total: int, window: int, step: int) -> list[int]:
    """Window start offsets, bottom-up: from total - window stepping upward
    by ``step``, with the final window clamped to start at 0."""
    if total <= window:
        return [0]
    starts = list(range(total - window, 0, -step))
    starts.append(0)
    return starts


def _full_texts(doc_ids: Sequence[str], corpus: Corpus) -> list[tuple[str, str]]:
    items = []
    for doc_id in doc_ids:
        doc = corpus[doc_id]
        if not doc.text:
            raise RerankError(f"doc {doc_id} has empty text")
        items.append((doc_id, doc.text))
    return items


def corank(
    query: Query,
    candidates: CandidateList,
    corpus: Corpus,
    features: FeatureStore,
    embedder: Embedder,
    cfg: RerankConfig,
    reranker: Reranker,
) -> RunResult:
    """Two-stage rerank: coarse listwise pass over compact representations of
    the wide pool, then a fine-grained full-text pass over the top ``fine_k``
    seed set. Documents outside the seed set keep their coarse-stage order."""
    pool = candidates.top(cfg.coarse_m)
    ledger = TokenLedger()

    reps: list[tuple[str, str]] = []
    for doc_id in pool.doc_ids():
        feature_set = features.get(doc_id)
        if feature_set is None:
            raise RerankError(f"no extracted features for doc {doc_id}")
        selected = adaptive_select(
            query.text, feature_set, embedder, k_keywords=cfg.k_keywords
        )
        rep = build_representation(
            doc_id, cfg.form, category=feature_set.category, selected=selected
        )
        reps.append((doc_id, rep.text))

    if cfg.strategy is Strategy.CORANK_SLIDING and len(reps) > cfg.window:
        coarse_order = reranker.sliding_window(
            query.text, reps, cfg.window, cfg.step, ledger, stage="coarse"
        )
    else:
        coarse_order = reranker.listwise(query.text, reps, ledger, stage="coarse")

    seed = coarse_order[:cfg.fine_k]
    fine_order = reranker.listwise(
        query.text, _full_texts(seed, corpus), ledger, stage="fine"
    )
    ranking = fine_order + coarse_order[cfg.fine_k:]
    tag = cfg.strategy.value
    return RunResult(
        query_id=query.query_id, ranking=ranking, strategy_tag=tag, token_usage=ledger
    )


def run_strategy(
    query: Query,
    candidates: CandidateList,
    corpus: Corpus,
    cfg: RerankConfig,
    reranker: Reranker,
    features: FeatureStore | None = None,
    embedder: Embedder | None = None,
) -> RunResult:
    """Execute the configured strategy for one query. The output ranking is
    always a permutation of the full candidate list: reranked prefix first,
    untouched first-stage tail after."""
    if cfg.strategy in (Strategy.CORANK, Strategy.CORANK_SLIDING):
        if features is None or embedder is None:
            raise RerankError(f"{cfg.strategy.value} needs features and an embedder")
        result = corank(query, candidates, corpus, features, embedder, cfg, reranker)
        tail = candidates.doc_ids()[cfg.coarse_m:]
        result.ranking.extend(tail)
        return result

    ledger = TokenLedger()
    all_ids = candidates.doc_ids()
    if cfg.strategy is Strategy.VANILLA:
        head = all_ids[:cfg.vanilla_m]
        reranked = reranker.listwise(
            query.text, _full_texts(head, corpus), ledger, stage="rerank"
        )
    else:
        head = all_ids[:cfg.sliding_total]
        reranked = reranker.sliding_window(
            query.text, _full_texts(head, corpus), cfg.window, cfg.step,
            ledger, stage="rerank",
        )
    ranking = reranked + all_ids[len(head):]
    return RunResult(
        query_id=query.query_id,
        ranking=ranking,
        strategy_tag=cfg.strategy.value,
        token_usage=ledger,
    )
