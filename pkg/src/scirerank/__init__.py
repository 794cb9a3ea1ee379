"""Two-stage LLM listwise reranking toolkit for scientific document retrieval:
offline semantic feature extraction, coarse reranking over compact document
representations of a wide candidate pool, and fine-grained full-text
reranking of the surviving top candidates."""

__version__ = "0.1.0"
