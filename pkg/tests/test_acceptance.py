"""Acceptance criteria, one test each.

Every test prints a ``PASS``/``FAIL`` line and the lines are repeated in
the terminal summary. Criterion 6 trains 20 models and takes a couple of
minutes.
"""

import time

import numpy as np
import pytest

from mhnurf.checkpoint import dumps, load_checkpoint, loads, save_checkpoint
from mhnurf.cli import main
from mhnurf.experiment import run_experiment
from mhnurf.gradcheck import check_instance, random_instance
from mhnurf.ingest import FACETS, tokenize_code
from mhnurf.layers import AttentionParams, attention_pool
from mhnurf.stats import a12, auc, scott_knott_rank, sk_delta
from mhnurf.synthetic import CLUSTERS, corpus_vocab, random_embeddings, separable_corpus, toy_corpus, write_toy_files
from mhnurf.training import TrainingConfig, predict, train_reports


def test_c1_gradient_correctness(criterion):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(10):
        k = int(rng.integers(1, 4))
        facets = tuple(str(f) for f in rng.choice(FACETS, size=k, replace=False))
        inst = random_instance(facets, int(rng.integers(2**31)), hidden_dim=int(rng.integers(2, 9)),
                               embedding_dim=int(rng.integers(2, 5)), max_sentences=3, max_tokens=4)
        report = check_instance(inst, tolerance=1e-4, step=1e-5)
        assert report.passed, report.failures()
        worst = max(worst, report.max_error)
    elapsed = time.perf_counter() - start
    criterion.detail = f"10 configs, max rel error {worst:.2e}, {elapsed:.1f}s"
    assert elapsed < 60


def test_c2_attention_invariants(criterion):
    rng = np.random.default_rng(7)
    for _ in range(1000):
        t, d, a = rng.integers(1, 12), rng.integers(1, 6), rng.integers(1, 6)
        params = AttentionParams(rng.normal(size=(a, d)), rng.normal(size=a), rng.normal(0, 3, size=a))
        states = rng.normal(0, 2, size=(t, d))
        mask = rng.random(t) < 0.7
        mask[rng.integers(t)] = True
        w, pooled, _ = attention_pool(states, mask, params)
        assert abs(w[mask].sum() - 1.0) < 1e-12
        assert (w[~mask] == 0.0).all() and (w >= 0).all()
        assert (pooled >= states[mask].min(axis=0) - 1e-12).all()
        assert (pooled <= states[mask].max(axis=0) + 1e-12).all()
    criterion.detail = "1000 trials"


def _brute_auc(scores, labels):
    pos, neg = scores[labels == 1], scores[labels == 0]
    return float(((pos[:, None] > neg[None]).sum() + 0.5 * (pos[:, None] == neg[None]).sum())
                 / (pos.size * neg.size))


def test_c3_auc_oracle(criterion):
    rng = np.random.default_rng(11)
    done = 0
    while done < 500:
        n = int(rng.integers(2, 201))
        scores = rng.integers(0, rng.integers(2, 50), size=n) / 7.0
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            continue
        assert auc(scores, labels) == _brute_auc(scores, labels)
        if done < 100:
            for f in (np.exp, lambda s: s ** 3 + 2 * s, lambda s: np.arctan(s) * 4 - 1):
                assert auc(f(scores), labels) == auc(scores, labels)
        done += 1
    criterion.detail = "500 exact matches, 100 monotone-transform trials"


def test_c4_a12_symmetry(criterion):
    rng = np.random.default_rng(13)
    for _ in range(500):
        x = rng.integers(0, 10, size=rng.integers(1, 40)) / 3
        y = rng.integers(0, 10, size=rng.integers(1, 40)) / 3
        assert a12(x, y) + a12(y, x) == 1.0
    assert a12([1, 2, 3], [0, 0, 0]) == 1.0 and a12([0.9] * 5, [0.1, 0.2]) == 1.0
    assert a12([5, 5], [5, 5]) == 0.5 and a12([0.3, 0.7, 0.1], [0.3, 0.7, 0.1]) == 0.5
    criterion.detail = "500 random pairs exact"


def test_c5_scott_knott(criterion):
    for seed in range(50):
        rng = np.random.default_rng(seed)
        # one treatment of 30 AUCs per cluster
        ranking = scott_knott_rank({"lo": rng.normal(0.6, 0.01, 30), "hi": rng.normal(0.9, 0.01, 30)},
                                   seed=seed)
        assert [g.members for g in ranking.groups] == [("hi",), ("lo",)]
        # two treatments per cluster drawn from the same distribution
        treatments = {f"hi{i}": rng.normal(0.9, 0.01, 30) for i in range(2)}
        treatments |= {f"lo{i}": rng.normal(0.6, 0.01, 30) for i in range(2)}
        ranking = scott_knott_rank(treatments, seed=seed)
        assert [set(g.members) for g in ranking.groups] == [{"hi0", "hi1"}, {"lo0", "lo1"}]
    assert len(scott_knott_rank({"only": [0.7, 0.8]}).groups) == 1
    vals = np.random.default_rng(0).normal(0.8, 0.05, 30)
    dup = scott_knott_rank({"A": vals, "B": vals.copy(), "C": vals.copy()})
    assert len(dup.groups) == 1 and len(dup.groups[0].members) == 3
    for l1, l2, want in (([1], [1], 0.0), ([2], [0], 1.0), ([4, 4], [1], 2.0)):
        assert abs(sk_delta(l1, l2, l1 + l2) - want) <= 1e-12
    criterion.detail = "50 seeds two groups; single and duplicated cases; delta examples"


# scaled-down sizes so 20 trainings fit in a couple of minutes
TOY = dict(hidden_dim=16, embedding_dim=16, max_sentences=8, max_tokens=12,
           learning_rate=0.003, batch_size=32, epochs=25)


@pytest.mark.slow
def test_c6_toy_reproduction(criterion):
    start = time.perf_counter()
    reports = toy_corpus(400, seed=0)
    table = random_embeddings(corpus_vocab(reports), 16, seed=0, clusters=CLUSTERS)
    variants = [TrainingConfig(name="MHNurf_A", facets=("content",), **TOY),
                TrainingConfig(name="MHNurf_F", facets=("content", "comment", "code"), **TOY)]
    results = run_experiment(reports, variants, table, runs=10, seed=0)
    mean = {v.name: np.mean([r.auc for r in results if r.treatment == v.name]) for v in variants}
    elapsed = time.perf_counter() - start
    criterion.detail = (f"mean AUC F {mean['MHNurf_F']:.4f} vs A {mean['MHNurf_A']:.4f}, "
                        f"{elapsed:.0f}s")
    assert mean["MHNurf_F"] >= mean["MHNurf_A"]
    assert min(mean.values()) > 0.9
    assert elapsed < 15 * 60


def test_c7_overfit(criterion):
    reports = separable_corpus()
    table = random_embeddings(corpus_vocab(reports), 100, seed=0)
    cfg = TrainingConfig(batch_size=1)
    model, history = train_reports(reports, table, cfg)
    probs = [predict(model, table, r, cfg)[1] for r in reports]
    train_auc = auc(probs, [r.target for r in reports])
    criterion.detail = f"final loss {history[-1]:.2e} after {len(history)} epochs, train AUC {train_auc}"
    assert len(history) <= 25
    assert history[-1] < 0.05 and train_auc == 1.0


def test_c8_determinism(criterion, tmp_path, capsys):
    reports, emb = write_toy_files(tmp_path / "data", n=60, dim=8, seed=5)
    cfg = tmp_path / "v.cfg"
    cfg.write_text("name = F\nhidden_dim = 4\nembedding_dim = 8\nepochs = 2\nbatch_size = 16\n"
                   "max_sentences = 6\nmax_tokens = 10\n")
    for i in (1, 2):
        assert main(["train", "--reports", str(reports), "--embeddings", str(emb), "--config", str(cfg),
                     "--seed", "17", "--out", str(tmp_path / f"m{i}.ckpt")]) == 0
        assert main(["evaluate", "--reports", str(reports), "--embeddings", str(emb), "--variants", str(cfg),
                     "--runs", "3", "--seed", "17", "--out", str(tmp_path / f"r{i}.csv")]) == 0
    capsys.readouterr()
    assert (tmp_path / "m1.ckpt").read_bytes() == (tmp_path / "m2.ckpt").read_bytes()
    assert (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()
    criterion.detail = "checkpoints and evaluation CSVs byte-identical"


def test_c9_format_fidelity(criterion, tmp_path):
    reports = separable_corpus()
    table = random_embeddings(corpus_vocab(reports), 6, seed=1)
    cfg = TrainingConfig(facets=("content", "comment", "label"), hidden_dim=3, embedding_dim=6, epochs=2)
    model, _ = train_reports(reports, table, cfg)
    save_checkpoint(tmp_path / "m.ckpt", model, cfg, "emb.txt")
    back, back_cfg, _ = load_checkpoint(tmp_path / "m.ckpt")
    assert back_cfg == cfg
    assert all(back.tensors[k].tobytes() == v.tobytes() for k, v in model.tensors.items())
    assert dumps(*loads((tmp_path / "m.ckpt").read_bytes())) == (tmp_path / "m.ckpt").read_bytes()
    assert tokenize_code('model.compile(loss="crossentropy")') == [
        ["model", ".", "compile", "(", "loss", "=", "<STR_LIT>", ")"]]
    criterion.detail = f"{len(model.tensors)} tensors bit-exact; code tokenizer example exact"
