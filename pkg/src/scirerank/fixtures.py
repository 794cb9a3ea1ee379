"""Synthetic fixture data: a small scientific-flavored corpus with queries and
qrels for offline demos, plus the wide-pool case-study setup used to compare
strategies when a relevant document sits deep in the first-stage ranking."""

from __future__ import annotations

import json
import random
from pathlib import Path

from .corpus import (
    CandidateList,
    Corpus,
    Document,
    Qrels,
    Query,
    write_corpus,
    write_qrels,
)

_VOCAB = """\
graph neural network message passing attention transformer embedding
retrieval ranking relevance corpus index sparse dense lexical semantic
protein folding structure prediction molecular dynamics simulation energy
quantum computing qubit entanglement error correction annealing gate
reinforcement learning policy gradient reward exploration bandit agent
convex optimization gradient descent momentum regularization sparsity
bayesian inference posterior prior likelihood sampling variational
causal discovery intervention confounder treatment estimation effect
federated distributed training aggregation privacy differential noise
speech recognition acoustic phoneme decoding alignment lattice corpus
vision segmentation detection convolution pooling augmentation pixel
knowledge distillation teacher student compression pruning quantization
topic modeling latent dirichlet allocation clustering coherence tokens
time series forecasting seasonality trend anomaly detection horizon
robotics manipulation grasping trajectory kinematics control feedback
""".split()

_FILLER = """\
soil moisture irrigation crop yield rotation harvest fertilizer drainage
volcanic eruption magma basalt sediment tectonic fault erosion mineral
coral reef plankton salinity tidal current migration spawning habitat
""".split()


def _make_doc(rng: random.Random, doc_id: str, vocab: list[str]) -> Document:
    # Abstract-scale body (~80 words) so compact representations are
    # materially cheaper than full text, as with real paper abstracts.
    words = rng.sample(vocab, 24)
    title = " ".join(words[:5])
    body = " ".join(rng.choices(words, k=75))
    return Document(doc_id=doc_id, title=title, text=f"{title}. {body}")


def build_fixture(
    out_dir: str | Path,
    n_docs: int = 50,
    n_queries: int = 10,
    seed: int = 7,
) -> dict[str, Path]:
    """Write corpus.jsonl, queries.jsonl, and qrels.txt under ``out_dir``.

    Each query is sampled from one target document's vocabulary, and that
    document is judged relevant, so lexical retrieval and the overlap mock
    both have signal to work with.
    """
    rng = random.Random(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    corpus = Corpus(
        _make_doc(rng, f"d{i:03d}", _VOCAB) for i in range(n_docs)
    )
    docs = list(corpus)

    queries: list[Query] = []
    qrels = Qrels()
    stride = max(1, n_docs // n_queries)
    for q in range(n_queries):
        target = docs[(q * stride) % n_docs]
        words = rng.sample(target.text.replace(".", "").split(), 5)
        queries.append(Query(query_id=f"q{q:02d}", text=" ".join(words)))
        qrels.set(f"q{q:02d}", target.doc_id, 1)

    corpus_path = out / "corpus.jsonl"
    queries_path = out / "queries.jsonl"
    qrels_path = out / "qrels.txt"
    write_corpus(corpus, corpus_path)
    with open(queries_path, "w", encoding="utf-8") as fh:
        for query in queries:
            fh.write(json.dumps(
                {"query_id": query.query_id, "text": query.text}
            ) + "\n")
    write_qrels(qrels, qrels_path)
    return {"corpus": corpus_path, "queries": queries_path, "qrels": qrels_path}


def build_case_study(
    pool_size: int = 200,
    planted_rank: int = 92,
    seed: int = 11,
) -> tuple[Corpus, Query, Qrels, CandidateList]:
    """Wide candidate pool with one relevant document planted deep.

    The relevant document shares its distinctive vocabulary with the query;
    the fillers draw from a disjoint vocabulary, so any overlap-based ranker
    that sees the relevant document promotes it. Its first-stage position is
    ``planted_rank``, outside a 20-document vanilla window.
    """
    rng = random.Random(seed)
    query = Query(
        query_id="case",
        text="controllable multi-attribute text generation for data augmentation",
    )
    relevant = Document(
        doc_id="rel001",
        title="scalable controllable text generation",
        text=(
            "scalable controllable multi-attribute text generation framework "
            "for data augmentation with conditional variational encoders"
        ),
    )
    docs = [relevant]
    for i in range(pool_size - 1):
        docs.append(_make_doc(rng, f"f{i:03d}", _FILLER))
    corpus = Corpus(docs)

    fillers = [d.doc_id for d in docs[1:]]
    ordered = fillers[:planted_rank - 1] + [relevant.doc_id] + fillers[planted_rank - 1:]
    entries = [(doc_id, float(pool_size - i)) for i, doc_id in enumerate(ordered)]
    candidates = CandidateList.from_scores(query.query_id, entries)

    qrels = Qrels()
    qrels.set(query.query_id, relevant.doc_id, 1)
    return corpus, query, qrels, candidates
