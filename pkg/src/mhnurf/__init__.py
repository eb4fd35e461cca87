"""Multifaceted hierarchical attention network for non-functional bug report identification."""

from .embeddings import EmbeddingTable, encode_facet, load_embeddings
from .ingest import FACETS, FacetDocument, FacetSet, RawReport, extract_facets, preprocess_text, tokenize_code
from .model import ModelParams, backward, forward
from .stats import a12, auc, bootstrap_significant, precision_recall_f1, scott_knott_rank, sk_delta
from .training import TrainingConfig, predict, train

__version__ = "0.1.0"
