"""Multifaceted hierarchical attention network.

Each configured facet owns an encoder: a word-level Bi-GRU with attention
pooling into one vector per sentence, then a sentence-level Bi-GRU with
attention pooling into one facet vector. The label facet stops after the
word level. Facet vectors are concatenated in the fixed facet order and
projected to two logits; the positive-class softmax probability is the
model output.

Parameters live in one flat ``name -> ndarray`` dict so the optimizer,
checkpointing and gradient checking can treat them uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers
from .embeddings import EmbeddingTable, EncodedFacet
from .ingest import FACETS
from .layers import AttentionParams, GruCell, GruParams

PROB_CLAMP = 1e-12
INIT_SCALE = 0.08


def ordered_facets(facets) -> tuple[str, ...]:
    facets = set(facets)
    unknown = facets - set(FACETS)
    if unknown:
        raise ValueError(f"unknown facets {sorted(unknown)}")
    if not facets:
        raise ValueError("at least one facet is required")
    return tuple(f for f in FACETS if f in facets)


@dataclass
class FacetEncoderParams:
    word_gru: GruParams
    word_attn: AttentionParams
    sent_gru: GruParams | None = None
    sent_attn: AttentionParams | None = None


@dataclass
class ModelParams:
    facets: tuple[str, ...]
    embedding_dim: int
    hidden_dim: int
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def out_dim(self) -> int:
        return 2 * self.hidden_dim

    @staticmethod
    def layout(facets, embedding_dim: int, hidden_dim: int) -> dict[str, tuple[int, ...]]:
        """Name and shape of every tensor, in canonical order."""
        out_dim = 2 * hidden_dim
        shapes: dict[str, tuple[int, ...]] = {}
        facets = ordered_facets(facets)
        for facet in facets:
            levels = [("word", embedding_dim)]
            if facet != "label":
                levels.append(("sent", out_dim))
            for level, in_dim in levels:
                for direction in ("fwd", "bwd"):
                    for key, shape in GruCell.shapes(in_dim, hidden_dim).items():
                        shapes[f"{facet}.{level}_gru.{direction}.{key}"] = shape
                for key, shape in AttentionParams.shapes(out_dim, out_dim).items():
                    shapes[f"{facet}.{level}_attn.{key}"] = shape
        shapes["head.W"] = (2, len(facets) * out_dim)
        shapes["head.b"] = (2,)
        return shapes

    @classmethod
    def init(cls, facets, embedding_dim: int, hidden_dim: int, seed: int = 0,
             scale: float = INIT_SCALE) -> "ModelParams":
        """Weights and context vectors ~ U(-scale, scale), biases zero."""
        facets = ordered_facets(facets)
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, shape in cls.layout(facets, embedding_dim, hidden_dim).items():
            if name.rsplit(".", 1)[1] in ("bz", "br", "bh", "b"):
                tensors[name] = np.zeros(shape)
            else:
                tensors[name] = rng.uniform(-scale, scale, size=shape)
        return cls(facets, embedding_dim, hidden_dim, tensors)

    def validate(self):
        expected = self.layout(self.facets, self.embedding_dim, self.hidden_dim)
        if list(expected) != list(self.tensors):
            raise ValueError("model tensors do not match the facet layout")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ValueError(f"{name}: shape {self.tensors[name].shape}, expected {shape}")

    def copy(self) -> "ModelParams":
        return ModelParams(self.facets, self.embedding_dim, self.hidden_dim,
                           {k: v.copy() for k, v in self.tensors.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def _gru(self, prefix: str) -> GruParams:
        t = self.tensors
        cells = []
        for direction in ("fwd", "bwd"):
            p = f"{prefix}.{direction}."
            cells.append(GruCell(**{k: t[p + k] for k in GruCell.__dataclass_fields__}))
        return GruParams(*cells)

    def _attn(self, prefix: str) -> AttentionParams:
        t = self.tensors
        return AttentionParams(t[prefix + ".W"], t[prefix + ".b"], t[prefix + ".context"])

    def encoder(self, facet: str) -> FacetEncoderParams:
        enc = FacetEncoderParams(self._gru(f"{facet}.word_gru"), self._attn(f"{facet}.word_attn"))
        if facet != "label":
            enc.sent_gru = self._gru(f"{facet}.sent_gru")
            enc.sent_attn = self._attn(f"{facet}.sent_attn")
        return enc


# --- batching ---------------------------------------------------------------

@dataclass
class FacetBatch:
    ids: np.ndarray            # (B, L, T)
    token_mask: np.ndarray     # (B, L, T)
    sentence_mask: np.ndarray  # (B, L)

    def __len__(self):
        return self.ids.shape[0]

    def take(self, idx) -> "FacetBatch":
        return FacetBatch(self.ids[idx], self.token_mask[idx], self.sentence_mask[idx])


def stack_facets(samples: list[dict[str, EncodedFacet]], facets) -> dict[str, FacetBatch]:
    """Stack per-sample encodings into one :class:`FacetBatch` per facet."""
    batch = {}
    for facet in facets:
        encs = [s[facet] for s in samples]
        batch[facet] = FacetBatch(
            np.stack([e.ids for e in encs]),
            np.stack([e.token_mask for e in encs]),
            np.stack([e.sentence_mask for e in encs]),
        )
    return batch


def _used_extent(mask: np.ndarray, axis: int) -> int:
    used = np.flatnonzero(mask.any(axis=tuple(a for a in range(mask.ndim) if a != axis)))
    return int(used[-1]) + 1 if used.size else 0


# --- facet encoder ----------------------------------------------------------

def _encode_batch(fb: FacetBatch, table: EmbeddingTable, enc: FacetEncoderParams,
                  is_label: bool, out_dim: int):
    n = len(fb)
    n_sents = _used_extent(fb.sentence_mask, 1)
    n_tokens = _used_extent(fb.token_mask, 2)
    rows = np.nonzero(fb.sentence_mask[:, :n_sents])
    if rows[0].size == 0 or n_tokens == 0:
        return np.zeros((n, out_dim)), None

    # word level over the sentences that exist only; padding is trimmed away
    tok_mask = fb.token_mask[rows[0], rows[1], :n_tokens]
    x = table.vectors(fb.ids[rows[0], rows[1], :n_tokens])
    word_states, wg_cache = layers.bigru_forward(x, tok_mask, enc.word_gru)
    word_alpha, pooled, wa_cache = layers.attention_pool(word_states, tok_mask, enc.word_attn)
    sents = np.zeros((n, n_sents, out_dim))
    sents[rows] = pooled
    cache = {"rows": rows, "n_sents": n_sents, "wg": wg_cache, "wa": wa_cache,
             "word_alpha": word_alpha}

    if is_label:
        return sents[:, 0].copy(), cache

    sent_mask = fb.sentence_mask[:, :n_sents]
    sent_states, sg_cache = layers.bigru_forward(sents, sent_mask, enc.sent_gru)
    sent_alpha, out, sa_cache = layers.attention_pool(sent_states, sent_mask, enc.sent_attn)
    cache.update(sg=sg_cache, sa=sa_cache, sent_alpha=sent_alpha)
    return out, cache


def _encode_batch_backward(dout, cache, enc: FacetEncoderParams, is_label: bool, out_dim: int):
    if cache is None:
        return {}
    grads = {}
    n = dout.shape[0]
    if is_label:
        dsents = np.zeros((n, cache["n_sents"], out_dim))
        dsents[:, 0] = dout
    else:
        dstates, grads["sent_attn"] = layers.attention_backward(dout, cache["sa"], enc.sent_attn)
        dsents, grads["sent_gru"] = layers.bigru_backward(dstates, cache["sg"], enc.sent_gru)
    dpooled = dsents[cache["rows"]]
    dstates, grads["word_attn"] = layers.attention_backward(dpooled, cache["wa"], enc.word_attn)
    _, grads["word_gru"] = layers.bigru_backward(dstates, cache["wg"], enc.word_gru)
    return grads


def _flatten_encoder_grads(facet: str, grads: dict, out: dict[str, np.ndarray]):
    for part, g in grads.items():
        if part.endswith("_gru"):
            for direction, key in (("forward", "fwd"), ("backward", "bwd")):
                for name, arr in g[direction].items():
                    out[f"{facet}.{part}.{key}.{name}"] += arr
        else:
            for name, arr in g.items():
                out[f"{facet}.{part}.{name}"] += arr


def facet_encode(enc: EncodedFacet, table: EmbeddingTable, params: FacetEncoderParams) -> np.ndarray:
    """Encode one facet document into its ``2 * hidden_dim`` vector.

    An empty facet encodes to the zero vector.
    """
    out_dim = 2 * params.word_gru.hidden_dim
    fb = FacetBatch(enc.ids[None], enc.token_mask[None], enc.sentence_mask[None])
    out, _ = _encode_batch(fb, table, params, enc.facet == "label", out_dim)
    return out[0]


# --- whole network ----------------------------------------------------------

def softmax2(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward_batch(batch: dict[str, FacetBatch], model: ModelParams, table: EmbeddingTable):
    """Positive-class probabilities ``(B,)`` plus the activation cache for :func:`backward_batch`."""
    if table.dim != model.embedding_dim:
        raise ValueError(f"embedding dim {table.dim} != model embedding_dim {model.embedding_dim}")
    missing = set(model.facets) - set(batch)
    if missing:
        raise ValueError(f"batch lacks facets {sorted(missing)}")
    parts, caches = [], {}
    for facet in model.facets:
        out, caches[facet] = _encode_batch(batch[facet], table, model.encoder(facet),
                                           facet == "label", model.out_dim)
        parts.append(out)
    v = np.concatenate(parts, axis=1)
    logits = v @ model.tensors["head.W"].T + model.tensors["head.b"]
    probs = softmax2(logits)
    return probs[:, 1], {"v": v, "probs": probs, "facets": caches}


def backward_batch(cache, labels, model: ModelParams) -> dict[str, np.ndarray]:
    """Gradients of the batch-mean cross-entropy w.r.t. every model tensor."""
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    probs, v = cache["probs"], cache["v"]
    n = probs.shape[0]
    onehot = np.stack([1.0 - labels, labels], axis=1)
    dlogits = (probs - onehot) / n
    grads = model.zeros_like()
    grads["head.W"] += dlogits.T @ v
    grads["head.b"] += dlogits.sum(axis=0)
    dv = dlogits @ model.tensors["head.W"]
    for i, facet in enumerate(model.facets):
        dout = dv[:, i * model.out_dim:(i + 1) * model.out_dim]
        g = _encode_batch_backward(dout, cache["facets"][facet], model.encoder(facet),
                                   facet == "label", model.out_dim)
        _flatten_encoder_grads(facet, g, grads)
    return grads


def forward(sample: dict[str, EncodedFacet], model: ModelParams, table: EmbeddingTable):
    """Single-report forward pass. Returns ``(prob, cache)``."""
    probs, cache = forward_batch(stack_facets([sample], model.facets), model, table)
    return float(probs[0]), cache


def backward(cache, label: int, model: ModelParams) -> dict[str, np.ndarray]:
    """Per-sample cross-entropy gradients for a cache produced by :func:`forward`."""
    return backward_batch(cache, [label], model)


def cross_entropy(probs, labels) -> float:
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    t = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


# --- gradient check ---------------------------------------------------------

@dataclass
class GradCheckReport:
    errors: dict[str, float]
    tolerance: float

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def failures(self) -> dict[str, float]:
        return {k: e for k, e in self.errors.items() if not e < self.tolerance}


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Largest absolute discrepancy, relative to the block's gradient magnitude.

    ``floor`` keeps near-zero blocks from dividing finite-difference roundoff
    (about 1e-11 at step 1e-5) by a vanishing scale.
    """
    diff = np.max(np.abs(analytic - numeric), initial=0.0)
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0), floor)
    return float(diff / scale)


def gradient_check(model: ModelParams, batch: dict[str, FacetBatch], labels, table: EmbeddingTable,
                   tolerance: float = 1e-4, step: float = 1e-5) -> GradCheckReport:
    """Compare :func:`backward_batch` to central finite differences on every tensor entry."""
    labels = np.asarray(labels)
    _, cache = forward_batch(batch, model, table)
    analytic = backward_batch(cache, labels, model)

    def loss():
        _, c = forward_batch(batch, model, table)
        # unclamped so the numeric derivative matches p - onehot exactly
        p = c["probs"][np.arange(len(labels)), labels.astype(int)]
        return -np.mean(np.log(p))

    errors = {}
    for name, tensor in model.tensors.items():
        numeric = np.zeros_like(tensor)
        flat, nflat = tensor.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss()
            flat[i] = orig - step
            down = loss()
            flat[i] = orig
            nflat[i] = (up - down) / (2 * step)
        errors[name] = relative_error(analytic[name], numeric)
    return GradCheckReport(errors, tolerance)
