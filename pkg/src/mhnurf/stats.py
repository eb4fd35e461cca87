"""Classifier metrics and the Scott-Knott ranking procedure.

Scott-Knott sorts treatments by median AUC, picks the contiguous split that
maximizes the between-group mean difference ``delta``, and recurses on both
halves only while the split is both statistically significant (bootstrap
test on the pooled AUC values) and not a small effect (Vargha-Delaney A12).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve as the pairwise rank statistic.

    Equals ``(#(s+ > s-) + 0.5 * #(s+ == s-)) / (P * N)``, computed from
    mid-ranks (the Mann-Whitney U) in ``O(n log n)``.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC is undefined unless both classes are present")
    ranks = rankdata(s)
    # twice U, so every intermediate is an exact integer
    u2 = 2.0 * ranks[pos].sum() - n_pos * (n_pos + 1)
    return float(u2 * 0.5 / (n_pos * n_neg))


def precision_recall_f1(probs: Sequence[float], labels: Sequence[int],
                        threshold: float = 0.5) -> tuple[float, float, float]:
    """Precision, recall and F1 of ``prob >= threshold``; 0 wherever a denominator is 0."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels)
    if p.size == 0:
        raise ValueError("no predictions")
    pred = p >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y != 1)))
    fn = int(np.sum(~pred & (y == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def a12(x: Sequence[float], y: Sequence[float]) -> float:
    """Vargha-Delaney A12: P(X > Y) + 0.5 * P(X == Y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise ValueError("a12 needs two non-empty samples")
    ranks = rankdata(np.concatenate([x, y]))
    u2 = 2.0 * ranks[: x.size].sum() - x.size * (x.size + 1)
    return float(u2 * 0.5 / (x.size * y.size))


def bootstrap_significant(x: Sequence[float], y: Sequence[float], iterations: int = 1000,
                          confidence: float = 0.99, seed: int = 0) -> bool:
    """Two-sided bootstrap test on the difference of means.

    Each group is resampled with replacement ``iterations`` times; the
    difference is significant iff the central ``confidence`` percentile
    interval of ``mean(x*) - mean(y*)`` excludes zero.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise ValueError("bootstrap test needs two non-empty samples")
    rng = np.random.default_rng(seed)
    bx = x[rng.integers(0, x.size, size=(iterations, x.size))].mean(axis=1)
    by = y[rng.integers(0, y.size, size=(iterations, y.size))].mean(axis=1)
    alpha = 1.0 - confidence
    lo, hi = np.quantile(bx - by, [alpha / 2, 1 - alpha / 2])
    return bool(lo > 0 or hi < 0)


def sk_delta(l1: Sequence[float], l2: Sequence[float], l: Sequence[float]) -> float:
    """Between-group spread of a split of ``l`` into ``l1`` + ``l2``."""
    if len(l1) == 0 or len(l2) == 0:
        raise ValueError("both sides of a split must be non-empty")
    if len(l1) + len(l2) != len(l):
        raise ValueError("l1 and l2 must partition l")
    m = np.mean(l)
    n = len(l)
    return float(len(l1) / n * (np.mean(l1) - m) ** 2 + len(l2) / n * (np.mean(l2) - m) ** 2)


@dataclass(frozen=True)
class RankGroup:
    rank: int
    members: tuple[str, ...]
    mean: float


@dataclass(frozen=True)
class ScottKnottRanking:
    groups: tuple[RankGroup, ...]

    def rank_of(self, treatment: str) -> int:
        for g in self.groups:
            if treatment in g.members:
                return g.rank
        raise KeyError(treatment)

    def as_rows(self) -> list[tuple[int, str, float]]:
        """``(rank, treatment, group_mean)`` rows, best group first."""
        return [(g.rank, name, g.mean) for g in self.groups for name in g.members]


def median_order(treatments: Mapping[str, Sequence[float]]) -> list[str]:
    """Names sorted by median descending; ties broken by mean (descending), then name."""
    return sorted(treatments, key=lambda k: (-float(np.median(treatments[k])),
                                             -float(np.mean(treatments[k])), k))


def scott_knott_rank(treatments: Mapping[str, Sequence[float]], confidence: float = 0.99,
                     effect: float = 0.6, iterations: int = 1000, seed: int = 0) -> ScottKnottRanking:
    """Group treatments into statistically distinct ranks (1 = best mean AUC)."""
    if not treatments:
        raise ValueError("no treatments to rank")
    data = {k: np.asarray(v, dtype=np.float64) for k, v in treatments.items()}
    for k, v in data.items():
        if v.size == 0:
            raise ValueError(f"treatment {k!r} has no values")
    order = median_order(data)
    means = {k: float(np.mean(v)) for k, v in data.items()}
    leaves: list[list[str]] = []

    def pooled(names):
        return np.concatenate([data[k] for k in names])

    def recurse(names: list[str]):
        if len(names) < 2:
            leaves.append(names)
            return
        vals = [means[k] for k in names]
        best, cut = -1.0, 0
        for i in range(1, len(names)):
            d = sk_delta(vals[:i], vals[i:], vals)
            if d > best:
                best, cut = d, i
        left, right = names[:cut], names[cut:]
        a, b = pooled(left), pooled(right)
        better, worse = (a, b) if a.mean() >= b.mean() else (b, a)
        if (bootstrap_significant(a, b, iterations, confidence, seed)
                and a12(better, worse) >= effect):
            recurse(left)
            recurse(right)
        else:
            leaves.append(names)

    recurse(order)
    scored = sorted(((float(pooled(g).mean()), g) for g in leaves),
                    key=lambda item: (-item[0], order.index(item[1][0])))
    return ScottKnottRanking(tuple(RankGroup(i + 1, tuple(g), m) for i, (m, g) in enumerate(scored)))
