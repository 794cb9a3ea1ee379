"""Chat-completion backend abstraction: live HTTP client with retries and a
concurrency cap, a persistent record/replay cache, and a deterministic mock.

The cache is keyed by a digest of (model_name, prompt, temperature, seed),
so identical requests always resolve to the same entry and a recorded
experiment can be replayed byte-for-byte without network access.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .representation import count_tokens

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 1.0
DEFAULT_SEED = 42
# Generous output budgets: reranking lists and extraction answers are short
# relative to these, but truncation would corrupt permutations.
RERANK_MAX_OUTPUT_TOKENS = 2048
EXTRACTION_MAX_OUTPUT_TOKENS = 4096

API_KEY_ENV_VAR = "SCIRERANK_API_KEY"


class BackendError(RuntimeError):
    """Transport failure that survived the retry budget."""

    def __init__(self, message: str, attempts: int = 0) -> None:
        super().__init__(message)
        self.attempts = attempts


class ReplayMissError(BackendError):
    """Replay-mode request not present in the cache."""

    def __init__(self, key: str) -> None:
        super().__init__(f"replay cache miss for request digest {key}")
        self.key = key


@dataclass(frozen=True)
class ChatRequest:
    model_name: str
    prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    seed: int = DEFAULT_SEED
    max_output_tokens: int = RERANK_MAX_OUTPUT_TOKENS

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("empty prompt")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")


def request_key(req: ChatRequest) -> str:
    """Digest identifying a request for caching. Pure in the cached fields."""
    payload = json.dumps(
        [req.model_name, req.prompt, req.temperature, req.seed],
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend(Protocol):
    def complete(self, req: ChatRequest) -> ChatResponse: ...


class ResponseCache:
    """Append-only line-delimited store of {key, response, created_at}."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._entries: dict[str, ChatResponse] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    resp = record["response"]
                    self._entries[record["key"]] = ChatResponse(
                        text=resp["text"],
                        prompt_tokens=resp["prompt_tokens"],
                        completion_tokens=resp["completion_tokens"],
                    )

    def get(self, key: str) -> ChatResponse | None:
        return self._entries.get(key)

    def put(self, key: str, response: ChatResponse) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({
                    "key": key,
                    "response": {
                        "text": response.text,
                        "prompt_tokens": response.prompt_tokens,
                        "completion_tokens": response.completion_tokens,
                    },
                    "created_at": time.time(),
                }, ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


class HttpChatBackend:
    """OpenAI-style chat-completions client with retries and a request cap."""

    def __init__(
        self,
        endpoint: str,
        api_key_env: str = API_KEY_ENV_VAR,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        max_in_flight: int = 8,
        timeout: float = 120.0,
        sleep: Callable[[float], None] = time.sleep,
        client: httpx.Client | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.api_key = os.environ.get(api_key_env, "")
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._semaphore = threading.Semaphore(max_in_flight)
        self._client = client or httpx.Client(timeout=timeout)

    def complete(self, req: ChatRequest) -> ChatResponse:
        body = {
            "model": req.model_name,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "seed": req.seed,
            "max_tokens": req.max_output_tokens,
        }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                with self._semaphore:
                    resp = self._client.post(
                        self.endpoint, json=body, headers=headers
                    )
                resp.raise_for_status()
                data = resp.json()
                usage = data.get("usage", {})
                return ChatResponse(
                    text=data["choices"][0]["message"]["content"],
                    prompt_tokens=usage.get("prompt_tokens", 0),
                    completion_tokens=usage.get("completion_tokens", 0),
                )
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
                logger.warning("backend attempt %d/%d failed: %s",
                               attempt, self.max_attempts, exc)
                if attempt < self.max_attempts:
                    self._sleep(self.backoff_base * 2 ** (attempt - 1))
        raise BackendError(
            f"request failed after {self.max_attempts} attempts: {last_error}",
            attempts=self.max_attempts,
        )


class CachingBackend:
    """Record/replay wrapper. In record mode misses go to the inner backend
    and are persisted; in replay mode a miss is an error."""

    def __init__(
        self,
        cache: ResponseCache,
        inner: Backend | None = None,
        mode: str = "record",
    ) -> None:
        if mode not in ("record", "replay"):
            raise ValueError(f"unknown cache mode {mode!r}")
        if mode == "record" and inner is None:
            raise ValueError("record mode requires an inner backend")
        self.cache = cache
        self.inner = inner
        self.mode = mode
        self.network_calls = 0

    def complete(self, req: ChatRequest) -> ChatResponse:
        key = request_key(req)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if self.mode == "replay":
            raise ReplayMissError(key)
        assert self.inner is not None
        response = self.inner.complete(req)
        self.network_calls += 1
        self.cache.put(key, response)
        return response


@dataclass
class MockBackend:
    """Deterministic scripted backend for tests and offline demos.

    ``responder`` maps a request to the raw response text; token counts are
    filled with the default heuristic so ledgers stay meaningful.
    """

    responder: Callable[[ChatRequest], str]
    calls: list[ChatRequest] = field(default_factory=list)

    @classmethod
    def scripted(cls, text: str) -> "MockBackend":
        return cls(responder=lambda req: text)

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete(self, req: ChatRequest) -> ChatResponse:
        self.calls.append(req)
        text = self.responder(req)
        return ChatResponse(
            text=text,
            prompt_tokens=count_tokens(req.prompt),
            completion_tokens=count_tokens(text),
        )


_WORD_TOKEN_RE = re.compile(r"[a-z0-9]+")


class TokenCountingBackend:
    """Pass-through wrapper that totals the tokens flowing through it."""

    def __init__(self, inner: Backend) -> None:
        self.inner = inner
        self.prompt_tokens = 0
        self.completion_tokens = 0
        self._lock = threading.Lock()

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def complete(self, req: ChatRequest) -> ChatResponse:
        response = self.inner.complete(req)
        with self._lock:
            self.prompt_tokens += response.prompt_tokens
            self.completion_tokens += response.completion_tokens
        return response


def _word_tokens(text: str) -> set[str]:
    return set(_WORD_TOKEN_RE.findall(text.lower()))


def mock_rank_by_overlap(query: str, passages: list[str]) -> str:
    """Scripted ranking text: passages ordered by descending count of word
    tokens shared with the query, ties broken by original position, emitted
    in the ``[i] > [j] > ...`` output format used by listwise rerankers."""
    query_tokens = _word_tokens(query)
    scored = sorted(
        range(len(passages)),
        key=lambda i: (-len(query_tokens & _word_tokens(passages[i])), i),
    )
    return " > ".join(f"[{i + 1}]" for i in scored)
