"""Random small instances for checking the analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingTable, encode_facet
from .ingest import FacetDocument
from .model import FacetBatch, GradCheckReport, ModelParams, gradient_check, ordered_facets, stack_facets


@dataclass
class Instance:
    model: ModelParams
    table: EmbeddingTable
    batch: dict[str, FacetBatch]
    labels: np.ndarray


def random_instance(facets, seed: int, hidden_dim: int = 4, embedding_dim: int = 4,
                    max_sentences: int = 3, max_tokens: int = 4, n_samples: int = 1,
                    scale: float = 0.5) -> Instance:
    """A model with every tensor ~ U(-scale, scale) and random short documents.

    The vocabulary has six tokens; ``oov`` tokens are drawn too so the
    unknown-word path is exercised. Every sample has at least one sentence
    in its first facet.
    """
    facets = ordered_facets(facets)
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(6)]
    table = EmbeddingTable.from_dict({w: rng.normal(size=embedding_dim) for w in words},
                                     embedding_dim)
    model = ModelParams.init(facets, embedding_dim, hidden_dim, seed=seed)
    for arr in model.tensors.values():
        arr[...] = rng.uniform(-scale, scale, size=arr.shape)

    samples = []
    for _ in range(n_samples):
        sample = {}
        for i, facet in enumerate(facets):
            limit = 1 if facet == "label" else max_sentences
            n_sents = int(rng.integers(1 if i == 0 else 0, limit + 1))
            sents = [[str(rng.choice(words + ["oov"])) for _ in range(rng.integers(1, max_tokens + 1))]
                     for _ in range(n_sents)]
            sample[facet] = encode_facet(FacetDocument.of(facet, sents), table, (limit, max_tokens))
        samples.append(sample)
    labels = rng.integers(0, 2, size=n_samples)
    return Instance(model, table, stack_facets(samples, facets), labels)


def check_instance(inst: Instance, tolerance: float = 1e-4, step: float = 1e-5) -> GradCheckReport:
    return gradient_check(inst.model, inst.batch, inst.labels, inst.table, tolerance, step)


def standard_cases(facets, seed: int) -> dict[str, Instance]:
    """One instance per hierarchy level: word level only, two levels, all configured facets."""
    return {
        "word-level (label)": random_instance(("label",), seed),
        "two-level (content)": random_instance(("content",), seed + 1),
        "multi-facet": random_instance(facets, seed + 2, hidden_dim=3, embedding_dim=3),
    }
