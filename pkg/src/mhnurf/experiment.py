"""Repeated 80/20 holdout evaluation and the results/ranking file formats."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingTable
from .ingest import RawReport, extract_facets
from .stats import ScottKnottRanking, auc, median_order, precision_recall_f1
from .training import TrainingConfig, encode_dataset, predict_proba, take, train_encoded

log = logging.getLogger(__name__)

RESULT_FIELDS = ("treatment", "run", "auc", "precision", "recall", "f1")
RANKING_FIELDS = ("rank", "treatment", "group_mean", "median", "mean")
TEST_FRACTION = 0.2


@dataclass(frozen=True)
class RunResult:
    treatment: str
    run: int
    auc: float
    precision: float
    recall: float
    f1: float

    def __post_init__(self):
        for name in ("auc", "precision", "recall", "f1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")


def run_seed(seed: int, run: int) -> int:
    return int(np.random.SeedSequence([seed, run]).generate_state(1)[0])


def holdout_split(n: int, seed: int, run: int) -> tuple[np.ndarray, np.ndarray]:
    """Random 80/20 split without replacement for one run: ``(train_idx, test_idx)``."""
    n_test = max(1, int(round(n * TEST_FRACTION)))
    if n_test >= n:
        raise ValueError(f"{n} samples are too few for a train/test split")
    perm = np.random.default_rng([seed, run, 0x5b17]).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split_digest(test_idx: np.ndarray) -> str:
    return hashlib.sha256(np.asarray(test_idx, dtype="<i8").tobytes()).hexdigest()[:12]


def run_experiment(reports: Sequence[RawReport], variants: Sequence[TrainingConfig],
                   table: EmbeddingTable, runs: int = 30, seed: int = 0) -> list[RunResult]:
    """Train and test every variant on ``runs`` independent random holdout splits.

    Within a run all variants share the same split and the same training
    seed, both derived from ``(seed, run)`` alone, so any subset of runs
    reproduces exactly regardless of order.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if not variants:
        raise ValueError("no variants to evaluate")
    names = [v.name for v in variants]
    if len(set(names)) != len(names):
        raise ValueError(f"variant names must be unique: {names}")
    labels = np.array([r.target for r in reports])
    if any(r.target is None for r in reports):
        raise ValueError("every report needs a target label for evaluation")
    if len(set(labels.tolist())) < 2:
        raise ValueError("dataset must contain both classes")

    facet_sets = {}
    for cfg in variants:
        if cfg.scheme not in facet_sets:
            facet_sets[cfg.scheme] = [extract_facets(r, cfg.scheme) for r in reports]
    encoded = [encode_dataset(facet_sets[cfg.scheme], table, cfg) for cfg in variants]

    results = []
    for run in range(runs):
        train_idx, test_idx = holdout_split(len(reports), seed, run)
        if len(set(labels[test_idx].tolist())) < 2:
            raise ValueError(f"run {run}: test split holds a single class; AUC is undefined")
        log.info("run %d split %s (train %d, test %d)", run, split_digest(test_idx),
                 train_idx.size, test_idx.size)
        for cfg, data in zip(variants, encoded):
            cfg_run = replace(cfg, seed=run_seed(seed, run))
            model, _ = train_encoded(take(data, train_idx), labels[train_idx], table, cfg_run)
            probs = predict_proba(model, table, take(data, test_idx))
            y = labels[test_idx]
            p, r, f = precision_recall_f1(probs, y)
            results.append(RunResult(cfg.name, run, auc(probs, y), p, r, f))
            log.info("run %d %s auc %.4f", run, cfg.name, results[-1].auc)
    return results


# --- files ------------------------------------------------------------------

def results_to_csv(results: Sequence[RunResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_FIELDS)
    for r in results:
        writer.writerow([r.treatment, r.run] + [repr(float(getattr(r, k))) for k in RESULT_FIELDS[2:]])
    return buf.getvalue()


def read_results(path: str | Path) -> list[RunResult]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(RESULT_FIELDS)}")
        out = []
        for lineno, row in enumerate(reader, 2):
            try:
                out.append(RunResult(row["treatment"], int(row["run"]),
                                     *(float(row[k]) for k in RESULT_FIELDS[2:])))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def auc_by_treatment(results: Sequence[RunResult]) -> dict[str, list[float]]:
    out: dict[str, list[float]] = defaultdict(list)
    for r in results:
        out[r.treatment].append(r.auc)
    return dict(out)


def ranking_rows(ranking: ScottKnottRanking, treatments: dict[str, Sequence[float]]):
    rows = []
    for group in ranking.groups:
        for name in median_order({k: treatments[k] for k in group.members}):
            values = np.asarray(treatments[name])
            rows.append((group.rank, name, group.mean, float(np.median(values)), float(values.mean())))
    return rows


def ranking_to_csv(ranking: ScottKnottRanking, treatments: dict[str, Sequence[float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RANKING_FIELDS)
    for rank, name, gmean, med, mean in ranking_rows(ranking, treatments):
        writer.writerow([rank, name, repr(gmean), repr(med), repr(mean)])
    return buf.getvalue()


def ranking_to_text(ranking: ScottKnottRanking, treatments: dict[str, Sequence[float]]) -> str:
    rows = ranking_rows(ranking, treatments)
    width = max([len("treatment")] + [len(r[1]) for r in rows])
    lines = [f"{'rank':>4}  {'treatment':<{width}}  {'group mean':>10}  {'median':>8}  {'mean':>8}"]
    for rank, name, gmean, med, mean in rows:
        lines.append(f"{rank:>4}  {name:<{width}}  {gmean:>10.4f}  {med:>8.4f}  {mean:>8.4f}")
    return "\n".join(lines) + "\n"
