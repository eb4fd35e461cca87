"""Pretrained word vectors and padded facet tensors."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import FacetDocument

PAD_ID = -1
UNK_ID = -2
UNK_TOKEN = "<UNK>"


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingTable:
    """Frozen token -> vector map. Unknown tokens map to ``unk_vector`` (zeros)."""

    dim: int
    vocab: dict[str, int]
    matrix: np.ndarray
    unk_vector: np.ndarray

    def __post_init__(self):
        if self.dim <= 0:
            raise EmbeddingError("embedding dim must be positive")
        if self.matrix.shape != (len(self.vocab), self.dim):
            raise EmbeddingError(
                f"matrix shape {self.matrix.shape} does not match vocab size "
                f"{len(self.vocab)} x dim {self.dim}"
            )
        if self.unk_vector.shape != (self.dim,):
            raise EmbeddingError("unk_vector must have length dim")
        # Row -1 / -2 of this padded copy are the PAD / UNK vectors.
        padded = np.vstack([self.matrix, self.unk_vector, self.unk_vector])
        padded.setflags(write=False)
        object.__setattr__(self, "_padded", padded)
        object.__setattr__(self, "_tokens", {i: t for t, i in self.vocab.items()})

    @classmethod
    def from_dict(cls, vectors: dict[str, "np.ndarray | list[float]"], dim: int) -> "EmbeddingTable":
        vocab = {tok: i for i, tok in enumerate(vectors)}
        rows = [np.asarray(v, dtype=np.float64) for v in vectors.values()]
        bad = [tok for tok, r in zip(vectors, rows) if r.shape != (dim,)]
        if bad:
            raise EmbeddingError(f"vector for {bad[0]!r} is not {dim}-dimensional")
        matrix = np.array(rows).reshape(len(vocab), dim)
        return cls(dim, vocab, matrix, np.zeros(dim))

    def __len__(self):
        return len(self.vocab)

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def index(self, token: str) -> int:
        return self.vocab.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self._tokens.get(int(idx), UNK_TOKEN)

    def lookup(self, token: str) -> np.ndarray:
        idx = self.vocab.get(token)
        return self.unk_vector if idx is None else self.matrix[idx]

    def vectors(self, ids: np.ndarray) -> np.ndarray:
        """Gather vectors for an integer array of ids of any shape; PAD/UNK give zeros."""
        return self._padded[ids]


def load_embeddings(path: str | Path, expected_dim: int) -> EmbeddingTable:
    """Read a GloVe-style text file: ``token v1 v2 ... v_dim`` per line.

    Blank lines are skipped. On duplicate tokens the first occurrence wins.
    Raises :class:`EmbeddingError` naming the line number of any malformed
    line or dimension mismatch.
    """
    vocab: dict[str, int] = {}
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != expected_dim:
                raise EmbeddingError(
                    f"{path}:{lineno}: expected {expected_dim} values, found {len(values)}"
                )
            try:
                row = [float(v) for v in values]
            except ValueError as exc:
                raise EmbeddingError(f"{path}:{lineno}: {exc}") from None
            if token in vocab:
                continue
            vocab[token] = len(rows)
            rows.append(row)
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), expected_dim)
    return EmbeddingTable(expected_dim, vocab, matrix, np.zeros(expected_dim))


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write the table in the format :func:`load_embeddings` reads.

    Tokens containing whitespace cannot be represented and are rejected.
    """
    bad = [t for t in table.vocab if not t or any(c.isspace() for c in t)]
    if bad:
        raise EmbeddingError(f"token {bad[0]!r} cannot be written to a whitespace-separated file")
    with open(path, "w", encoding="utf-8") as fh:
        for token, idx in table.vocab.items():
            fh.write(token + " " + " ".join(repr(float(x)) for x in table.matrix[idx]) + "\n")


@dataclass(frozen=True)
class EncodedFacet:
    """Padded id grid of one facet.

    ``ids[i, j]`` is the vocab row of token ``j`` of sentence ``i``,
    ``UNK_ID`` for out-of-vocabulary tokens and ``PAD_ID`` where
    ``token_mask`` is false.
    """

    facet: str
    ids: np.ndarray
    token_mask: np.ndarray
    sentence_mask: np.ndarray

    @property
    def limits(self) -> tuple[int, int]:
        return self.ids.shape


def encode_facet(doc: FacetDocument, table: EmbeddingTable, limits: tuple[int, int]) -> EncodedFacet:
    max_sents, max_tokens = limits
    if max_sents <= 0 or max_tokens <= 0:
        raise ValueError(f"limits must be positive, got {limits}")
    ids = np.full((max_sents, max_tokens), PAD_ID, dtype=np.int64)
    token_mask = np.zeros((max_sents, max_tokens), dtype=bool)
    sentence_mask = np.zeros(max_sents, dtype=bool)
    for i, sent in enumerate(doc.sentences[:max_sents]):
        kept = sent[:max_tokens]
        ids[i, : len(kept)] = [table.index(tok) for tok in kept]
        token_mask[i, : len(kept)] = True
        sentence_mask[i] = True
    return EncodedFacet(doc.facet, ids, token_mask, sentence_mask)


def decode_facet(enc: EncodedFacet, table: EmbeddingTable) -> list[list[str]]:
    """Inverse of :func:`encode_facet` on retained positions (OOV -> ``<UNK>``)."""
    out = []
    for i in np.flatnonzero(enc.sentence_mask):
        out.append([table.token(j) for j in enc.ids[i][enc.token_mask[i]]])
    return out
