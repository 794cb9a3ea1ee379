"""Experiment configuration: one YAML file drives the whole pipeline, with
sweep-friendly overrides applied on top by the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .embedding import CachingEmbedder, Embedder, HashEmbedder, HttpEmbedder
from .llm import Backend, CachingBackend, HttpChatBackend, ResponseCache
from .mocks import overlap_mock_backend
from .rerank import RerankConfig, Strategy
from .representation import Form


class ConfigError(ValueError):
    pass


@dataclass
class BackendSettings:
    mode: str = "mock"  # live | record | replay | mock
    model: str = "mock"
    endpoint: str = ""
    cache: str = ""
    parallelism: int = 8


@dataclass
class EmbedderSettings:
    kind: str = "hash"  # hash | http
    dim: int = 64
    seed: int = 0
    model: str = ""
    endpoint: str = ""
    cache: str = ""


@dataclass
class ExperimentConfig:
    corpus_path: str
    queries_path: str
    qrels_path: str
    output_dir: str = "out"
    retriever: str = "bm25"  # bm25 | dense
    first_stage_m: int = 200
    extractor_model: str = "mock"
    backend: BackendSettings = field(default_factory=BackendSettings)
    embedder: EmbedderSettings = field(default_factory=EmbedderSettings)
    rerank: RerankConfig = field(default_factory=RerankConfig)
    price_per_million: float = 0.0

    def validate(self) -> None:
        for label, path in (
            ("corpus", self.corpus_path),
            ("queries", self.queries_path),
            ("qrels", self.qrels_path),
        ):
            if not Path(path).exists():
                raise ConfigError(f"{label} path does not exist: {path}")
        if self.retriever not in ("bm25", "dense"):
            raise ConfigError(f"unknown retriever {self.retriever!r}")
        if self.backend.mode not in ("live", "record", "replay", "mock"):
            raise ConfigError(f"unknown backend mode {self.backend.mode!r}")
        if self.backend.mode == "replay" and not Path(self.backend.cache).exists():
            raise ConfigError(
                f"replay mode requires an existing cache file: {self.backend.cache!r}"
            )

    @property
    def features_path(self) -> Path:
        return Path(self.output_dir) / "features.jsonl"


def _rerank_config(raw: dict) -> RerankConfig:
    kwargs = dict(raw)
    if "strategy" in kwargs:
        kwargs["strategy"] = Strategy(kwargs["strategy"])
    if "form" in kwargs:
        kwargs["form"] = Form(int(kwargs["form"]))
    return RerankConfig(**kwargs)


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse the YAML config. ``overrides`` are dotted keys from CLI flags
    (e.g. ``{"rerank.k_keywords": 3}``) applied before construction."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    for dotted, value in (overrides or {}).items():
        target = raw
        *parents, leaf = dotted.split(".")
        for key in parents:
            target = target.setdefault(key, {})
        target[leaf] = value

    try:
        cfg = ExperimentConfig(
            corpus_path=raw["corpus"],
            queries_path=raw["queries"],
            qrels_path=raw["qrels"],
            output_dir=raw.get("output_dir", "out"),
            retriever=raw.get("retriever", "bm25"),
            first_stage_m=int(raw.get("first_stage_m", 200)),
            extractor_model=raw.get("extractor_model", "mock"),
            backend=BackendSettings(**raw.get("backend", {})),
            embedder=EmbedderSettings(**raw.get("embedder", {})),
            rerank=_rerank_config(raw.get("rerank", {})),
            price_per_million=float(raw.get("price_per_million", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg


def make_backend(cfg: ExperimentConfig) -> Backend:
    settings = cfg.backend
    if settings.mode == "mock":
        return overlap_mock_backend()
    if settings.mode == "replay":
        return CachingBackend(ResponseCache(settings.cache), mode="replay")
    live = HttpChatBackend(settings.endpoint, max_in_flight=settings.parallelism)
    if settings.mode == "record":
        if not settings.cache:
            raise ConfigError("record mode requires a cache path")
        return CachingBackend(ResponseCache(settings.cache), inner=live, mode="record")
    return live


def make_embedder(cfg: ExperimentConfig) -> Embedder:
    settings = cfg.embedder
    if settings.kind == "hash":
        inner: Embedder = HashEmbedder(dim=settings.dim, seed=settings.seed)
    elif settings.kind == "http":
        inner = HttpEmbedder(settings.endpoint, settings.model)
    else:
        raise ConfigError(f"unknown embedder kind {settings.kind!r}")
    return CachingEmbedder(inner, path=settings.cache or None)
