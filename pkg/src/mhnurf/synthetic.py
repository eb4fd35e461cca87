"""Synthetic issue reports for smoke tests and demos.

Positive (non-functional bug) reports carry signal in three places:
performance/accuracy words in the prose, hints in the comments, and
timing code (``time.time()``) in fenced blocks. Each cue is present with
a class-dependent probability, so no single facet is a perfect
predictor.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable, save_embeddings
from .ingest import RawReport, extract_facets

NEUTRAL = (
    "model layer tensor graph session batch input output shape gpu cpu version "
    "build install python keras torch function call value result data training "
    "inference example script api module import epoch optimizer loss weights "
    "checkpoint dataset loader operator kernel device config environment release"
).split()
CONTENT_CUES = "slow slower latency speed throughput accuracy degraded regression overhead sluggish".split()
FUNCTIONAL = "crash exception segfault typeerror missing wrong broken fails traceback undefined".split()
COMMENT_CUES = "profiling benchmark timings profiler flamegraph".split()
COMMENT_OTHER = "duplicate workaround typo upgrade docs".split()
LABELS = ("bug", "runtime", "build", "awaiting response", "stat:contributions welcome")

# probability that a cue appears, for (positive, negative) reports
P_CONTENT = (0.93, 0.05)
P_COMMENT = (0.75, 0.10)
P_CODE = (0.75, 0.10)

POS_CODE = ("start = time.time()", "elapsed = time.time() - start", "print('took', elapsed)")
NEG_CODE = ("x = model.predict(data)", "assert x.shape == (1, 10)", "raise ValueError('bad')")
FILLER_CODE = ("model = build_model()", "data = load('input.npy')", "model.fit(data, epochs=1)")


def _sentence(rng, words, cue=None, length=(5, 9)):
    toks = list(rng.choice(words, size=rng.integers(*length)))
    if cue is not None:
        toks.insert(int(rng.integers(0, len(toks) + 1)), cue)
    return " ".join(toks).capitalize() + "."


def make_report(rng: np.random.Generator, idx: int, positive: bool) -> RawReport:
    k = 0 if positive else 1
    content_cue = rng.random() < P_CONTENT[k]
    cue = rng.choice(CONTENT_CUES) if content_cue else None
    noise = rng.choice(FUNCTIONAL) if rng.random() < 0.5 else None

    title_words = list(rng.choice(NEUTRAL, size=rng.integers(3, 6)))
    if cue is not None and rng.random() < 0.5:
        title_words.append(cue)
        cue = None
    title = " ".join(title_words)

    sents = [_sentence(rng, NEUTRAL) for _ in range(rng.integers(2, 5))]
    if cue is not None:
        sents[int(rng.integers(0, len(sents)))] = _sentence(rng, NEUTRAL, cue)
    if noise is not None:
        sents.append(_sentence(rng, NEUTRAL, noise))
    description = " ".join(sents)

    code = list(rng.choice(FILLER_CODE, size=rng.integers(1, 3), replace=False))
    if rng.random() < P_CODE[k]:
        code += list(POS_CODE)
    elif rng.random() < 0.5:
        code += list(NEG_CODE[: rng.integers(1, 4)])
    if rng.random() < 0.3:
        description += " Calling `model.fit()` directly."
    description += "\n\n```python\n" + "\n".join(code) + "\n```\n"

    comments = []
    if rng.random() < P_COMMENT[k]:
        comments.append(_sentence(rng, NEUTRAL, rng.choice(COMMENT_CUES)))
    for _ in range(rng.integers(0, 3)):
        comments.append(_sentence(rng, NEUTRAL, rng.choice(COMMENT_OTHER)))
    rng.shuffle(comments)

    labels = list(rng.choice(LABELS, size=rng.integers(0, 3), replace=False))
    return RawReport(id=f"toy-{idx}", title=title, description=description,
                     comments=tuple(comments), labels=tuple(labels), target=int(positive))


def toy_corpus(n: int = 400, seed: int = 0, positive_rate: float = 0.5) -> list[RawReport]:
    rng = np.random.default_rng(seed)
    n_pos = int(round(n * positive_rate))
    flags = np.array([True] * n_pos + [False] * (n - n_pos))
    rng.shuffle(flags)
    return [make_report(rng, i, bool(f)) for i, f in enumerate(flags)]


def separable_corpus() -> list[RawReport]:
    """Eight tiny reports; exactly the positives mention "slow"."""
    pos = ["inference is slow on gpu", "training became slow after upgrade",
           "slow data loader", "model export is slow"]
    neg = ["import error on startup", "typo in documentation",
           "crash when loading checkpoint", "install fails on windows"]
    reports = []
    for i, (p, q) in enumerate(zip(pos, neg)):
        reports.append(RawReport(id=f"pos-{i}", title=p, description="", target=1))
        reports.append(RawReport(id=f"neg-{i}", title=q, description="", target=0))
    return reports


def corpus_vocab(reports) -> list[str]:
    """Distinct facet tokens in first-seen order.

    Multi-word labels are skipped, as no text embedding file can hold them.
    """
    seen: dict[str, None] = {}
    for r in reports:
        for doc in extract_facets(r, "title+desc").documents.values():
            for sent in doc.sentences:
                seen.update(dict.fromkeys(t for t in sent if not any(c.isspace() for c in t)))
    return list(seen)


CLUSTERS = {
    "performance": CONTENT_CUES,
    "functional": FUNCTIONAL,
    "measurement": COMMENT_CUES,
}


def random_embeddings(vocab, dim: int, seed: int = 0, clusters=None,
                      spread: float = 0.5) -> EmbeddingTable:
    """Gaussian vectors (std 1/sqrt(dim)) for every token.

    Words listed together in ``clusters`` share a random centre and deviate
    from it by ``spread`` times the usual scale, imitating how pretrained
    vectors place related words close together.
    """
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(dim)
    matrix = rng.normal(0.0, scale, size=(len(vocab), dim))
    index = {t: i for i, t in enumerate(vocab)}
    for words in (clusters or {}).values():
        centre = rng.normal(0.0, scale, size=dim)
        for w in words:
            if w in index:
                matrix[index[w]] = centre + spread * matrix[index[w]]
    return EmbeddingTable(dim, index, matrix, np.zeros(dim))


def write_toy_files(directory: str | Path, n: int = 400, dim: int = 16, seed: int = 0) -> tuple[Path, Path]:
    """Write ``reports.jsonl`` and ``embeddings.txt`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    reports = toy_corpus(n, seed)
    rpath = directory / "reports.jsonl"
    rpath.write_text("".join(json.dumps(r.to_dict()) + "\n" for r in reports), encoding="utf-8")
    epath = directory / "embeddings.txt"
    save_embeddings(random_embeddings(corpus_vocab(reports), dim, seed, CLUSTERS), epath)
    return rpath, epath
