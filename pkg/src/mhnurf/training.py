"""Training objective, Adam, the epoch loop and prediction."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingTable, encode_facet
from .ingest import SCHEMES, FacetSet, RawReport, extract_facets
from .model import (PROB_CLAMP, FacetBatch, ModelParams, backward_batch, forward_batch,
                    ordered_facets)

log = logging.getLogger(__name__)

THRESHOLD = 0.5


@dataclass(frozen=True)
class TrainingConfig:
    name: str = "MHNurf_F"
    facets: tuple[str, ...] = ("content", "comment", "code")
    scheme: str = "title+desc"
    batch_size: int = 64
    epochs: int = 25
    hidden_dim: int = 100
    embedding_dim: int = 100
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.98
    epsilon: float = 1e-9
    seed: int = 0
    max_sentences: int = 30
    max_tokens: int = 50

    def __post_init__(self):
        object.__setattr__(self, "facets", ordered_facets(self.facets))
        if "content" not in self.facets:
            raise ValueError("the facet subset must include 'content'")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        for name in ("batch_size", "hidden_dim", "embedding_dim", "learning_rate",
                     "max_sentences", "max_tokens", "epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")

    def limits(self, facet: str) -> tuple[int, int]:
        return (1 if facet == "label" else self.max_sentences), self.max_tokens

    def to_dict(self) -> dict:
        d = asdict(self)
        d["facets"] = list(self.facets)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in d.items():
            default = known[key].default
            if key == "facets":
                if isinstance(value, str):
                    value = [v.strip() for v in value.split(",") if v.strip()]
                kwargs[key] = tuple(value)
            elif isinstance(default, bool) or not isinstance(default, (int, float)):
                kwargs[key] = str(value)
            else:
                kwargs[key] = type(default)(float(value) if isinstance(default, float) else int(value))
        return cls(**kwargs)

    def dumps(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            lines.append(f"{key} = {','.join(value) if key == 'facets' else value}")
        return "\n".join(lines) + "\n"


def parse_config(text: str) -> TrainingConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return TrainingConfig.from_dict(values)


def load_config(path: str | Path | None) -> TrainingConfig:
    if path is None:
        return TrainingConfig()
    return parse_config(Path(path).read_text("utf-8"))


# --- objective and optimizer ------------------------------------------------

def bce_loss(probs: Sequence[float], labels: Sequence[int]) -> float:
    """Mean binary cross-entropy between true labels and positive-class probabilities."""
    p = np.asarray(probs, dtype=np.float64)
    t = np.asarray(labels, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"{p.size} probabilities vs {t.size} labels")
    if p.size == 0:
        raise ValueError("bce_loss needs at least one sample")
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


@dataclass
class AdamState:
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(0, {k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
              cfg: TrainingConfig):
    """One bias-corrected Adam update, applied in place. Returns ``(params, state)``."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for key, theta in params.items():
        g = grads[key]
        if g.shape != theta.shape:
            raise ValueError(f"{key}: gradient shape {g.shape} != parameter shape {theta.shape}")
        m = state.m.setdefault(key, np.zeros_like(theta))
        v = state.v.setdefault(key, np.zeros_like(theta))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        theta -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.epsilon)
    return params, state


# --- data -------------------------------------------------------------------

def encode_dataset(facet_sets: Sequence[FacetSet], table: EmbeddingTable,
                   cfg: TrainingConfig) -> dict[str, FacetBatch]:
    """Encode every report's configured facets into stacked padded arrays."""
    out = {}
    for facet in cfg.facets:
        rows, cols = cfg.limits(facet)
        encs = [encode_facet(fs[facet], table, (rows, cols)) for fs in facet_sets]
        n = len(encs)
        out[facet] = FacetBatch(
            np.stack([e.ids for e in encs]) if n else np.empty((0, rows, cols), np.int64),
            np.stack([e.token_mask for e in encs]) if n else np.empty((0, rows, cols), bool),
            np.stack([e.sentence_mask for e in encs]) if n else np.empty((0, rows), bool),
        )
    return out


def take(data: dict[str, FacetBatch], idx) -> dict[str, FacetBatch]:
    return {facet: fb.take(idx) for facet, fb in data.items()}


def epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    """Sample order for one epoch; depends only on (seed, epoch, n)."""
    return np.random.default_rng([seed, epoch]).permutation(n)


# --- training ---------------------------------------------------------------

def train_encoded(data: dict[str, FacetBatch], labels, table: EmbeddingTable,
                  cfg: TrainingConfig) -> tuple[ModelParams, list[float]]:
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if table.dim != cfg.embedding_dim:
        raise ValueError(f"embedding file has dim {table.dim}, config says {cfg.embedding_dim}")
    model = ModelParams.init(cfg.facets, cfg.embedding_dim, cfg.hidden_dim, seed=cfg.seed)
    state = AdamState.zeros_like(model.tensors)
    history = []
    for epoch in range(cfg.epochs):
        order = epoch_permutation(cfg.seed, epoch, n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            probs, cache = forward_batch(take(data, idx), model, table)
            total += bce_loss(probs, labels[idx]) * idx.size
            grads = backward_batch(cache, labels[idx], model)
            adam_step(model.tensors, grads, state, cfg)
        history.append(total / n)
        log.debug("%s epoch %d/%d loss %.6f", cfg.name, epoch + 1, cfg.epochs, history[-1])
    return model, history


def train(dataset: Sequence[tuple[FacetSet, int]], table: EmbeddingTable,
          cfg: TrainingConfig) -> tuple[ModelParams, list[float]]:
    """Train a fresh model on ``(facets, label)`` pairs; returns the model and per-epoch mean loss.

    Fully determined by ``cfg.seed``: initialization uses it directly and
    each epoch's shuffle comes from :func:`epoch_permutation`. The final
    partial batch is trained, not dropped.
    """
    if not dataset:
        raise ValueError("cannot train on an empty dataset")
    facet_sets, labels = zip(*dataset)
    return train_encoded(encode_dataset(facet_sets, table, cfg), labels, table, cfg)


def train_reports(reports: Sequence[RawReport], table: EmbeddingTable, cfg: TrainingConfig):
    missing = [r.id for r in reports if r.target is None]
    if missing:
        raise ValueError(f"reports without a target label: {missing[:5]}")
    dataset = [(extract_facets(r, cfg.scheme), r.target) for r in reports]
    return train(dataset, table, cfg)


# --- prediction -------------------------------------------------------------

def predict_proba(model: ModelParams, table: EmbeddingTable, data: dict[str, FacetBatch],
                  batch_size: int = 256) -> np.ndarray:
    n = len(next(iter(data.values())))
    out = np.empty(n)
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        out[idx], _ = forward_batch(take(data, idx), model, table)
    return out


def predict_many(model: ModelParams, table: EmbeddingTable, reports: Sequence[RawReport],
                 cfg: TrainingConfig) -> list[tuple[int, float]]:
    if ordered_facets(cfg.facets) != model.facets:
        raise ValueError(f"config facets {cfg.facets} do not match model facets {model.facets}")
    if not reports:
        return []
    data = encode_dataset([extract_facets(r, cfg.scheme) for r in reports], table, cfg)
    probs = predict_proba(model, table, data)
    return [(int(p >= THRESHOLD), float(p)) for p in probs]


def predict(model: ModelParams, table: EmbeddingTable, report: RawReport,
            cfg: TrainingConfig) -> tuple[int, float]:
    """Label (1 iff prob >= 0.5) and positive-class probability for one report."""
    return predict_many(model, table, [report], cfg)[0]
