import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mhnurf import training
from mhnurf.ingest import RawReport, extract_facets
from mhnurf.model import ModelParams
from mhnurf.stats import auc
from mhnurf.synthetic import corpus_vocab, random_embeddings, separable_corpus
from mhnurf.training import (AdamState, TrainingConfig, adam_step, bce_loss, encode_dataset,
                             epoch_permutation, parse_config, predict, predict_proba, train,
                             train_encoded, train_reports)

SMALL = TrainingConfig(hidden_dim=3, embedding_dim=4, epochs=3, batch_size=3, max_sentences=3,
                       max_tokens=5, seed=9)


@pytest.fixture(scope="module")
def separable():
    reports = separable_corpus()
    return reports, random_embeddings(corpus_vocab(reports), 100, seed=0)


@pytest.fixture(scope="module")
def overfit(separable):
    reports, table = separable
    # the defaults, except one report per update
    cfg = TrainingConfig(batch_size=1)
    model, history = train_reports(reports, table, cfg)
    return model, history, cfg


class TestConfig:
    def test_defaults(self):
        cfg = TrainingConfig()
        assert (cfg.batch_size, cfg.epochs, cfg.hidden_dim, cfg.embedding_dim) == (64, 25, 100, 100)
        assert (cfg.beta1, cfg.beta2, cfg.epsilon, cfg.learning_rate) == (0.9, 0.98, 1e-9, 0.001)
        assert cfg.facets == ("content", "comment", "code") and cfg.scheme == "title+desc"

    def test_round_trip(self):
        cfg = TrainingConfig(name="v", facets=("label", "content"), learning_rate=0.003, seed=4)
        assert parse_config(cfg.dumps()) == cfg
        assert cfg.facets == ("content", "label")

    def test_parse_with_comments(self):
        cfg = parse_config("# variant A\nname = A  # content only\nfacets = content\n\nepochs = 2\n")
        assert (cfg.name, cfg.facets, cfg.epochs) == ("A", ("content",), 2)

    @pytest.mark.parametrize("text", ["facets = code", "bogus = 1", "batch_size = 0", "epochs",
                                      "scheme = body", "beta2 = 1"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            parse_config(text)

    def test_label_limits(self):
        assert TrainingConfig(max_sentences=7, max_tokens=3).limits("label") == (1, 3)


class TestBce:
    def test_half(self):
        assert bce_loss([0.5], [1]) == pytest.approx(math.log(2), abs=1e-15)

    def test_clamped(self):
        assert bce_loss([1 - 1e-12], [1]) == pytest.approx(0, abs=2e-12)
        assert math.isfinite(bce_loss([1.0, 0.0], [0, 1]))

    def test_hand_value(self):
        assert bce_loss([0.9, 0.1], [1, 0]) == pytest.approx(-math.log(0.9), rel=1e-14)
        assert round(bce_loss([0.9, 0.1], [1, 0]), 6) == 0.105361

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            bce_loss([0.5, 0.5], [1])


class TestAdam:
    def step(self, g, state=None, theta=0.0, cfg=TrainingConfig()):
        params = {"x": np.array([theta])}
        state = state or AdamState.zeros_like(params)
        adam_step(params, {"x": np.array([g])}, state, cfg)
        return params["x"][0], state

    def test_first_step(self):
        theta, state = self.step(1.0)
        assert theta == pytest.approx(-0.001 / (1 + 1e-9), rel=1e-12)
        assert state.t == 1

    def test_zero_gradient_is_a_no_op(self):
        params = {"a": np.array([0.3, -1.2]), "b": np.array([[7.0]])}
        before = {k: v.copy() for k, v in params.items()}
        state = AdamState.zeros_like(params)
        adam_step(params, {k: np.zeros_like(v) for k, v in params.items()}, state, TrainingConfig())
        assert state.t == 1
        assert all(np.array_equal(params[k], before[k]) for k in params)

    def test_constant_gradient_moves_lr_per_step(self):
        theta1, state = self.step(2.5)
        theta2, _ = self.step(2.5, state, theta1)
        assert theta2 - theta1 == pytest.approx(-0.001, rel=1e-8)

    @given(st.floats(-1e3, 1e3).filter(lambda g: abs(g) > 1e-3))
    def test_first_step_opposes_gradient(self, g):
        theta, _ = self.step(g)
        assert np.sign(theta) == -np.sign(g)


class TestTrain:
    def test_empty_dataset(self, tiny_table):
        with pytest.raises(ValueError):
            train([], tiny_table, SMALL)

    def test_zero_epochs_returns_init(self, separable):
        reports, table = separable
        cfg = replace(SMALL, embedding_dim=100, epochs=0)
        model, history = train_reports(reports, table, cfg)
        assert history == []
        fresh = ModelParams.init(cfg.facets, 100, 3, seed=9)
        assert all(np.array_equal(model.tensors[k], fresh.tensors[k]) for k in fresh.tensors)

    def test_same_seed_is_bit_identical(self, separable):
        reports, table = separable
        cfg = replace(SMALL, embedding_dim=100)
        a, ha = train_reports(reports, table, cfg)
        b, hb = train_reports(reports, table, cfg)
        assert ha == hb
        assert all(np.array_equal(a.tensors[k], b.tensors[k]) for k in a.tensors)
        c, _ = train_reports(reports, table, replace(cfg, seed=10))
        assert not np.array_equal(a.tensors["head.W"], c.tensors["head.W"])

    def test_shuffle_depends_on_seed_epoch_and_length_only(self):
        assert np.array_equal(epoch_permutation(3, 1, 10), epoch_permutation(3, 1, 10))
        assert not np.array_equal(epoch_permutation(3, 1, 10), epoch_permutation(3, 2, 10))
        assert sorted(epoch_permutation(5, 0, 7)) == list(range(7))

    def test_reordering_with_matching_shuffle(self, separable, monkeypatch):
        reports, table = separable
        cfg = replace(SMALL, embedding_dim=100)
        labels = np.array([r.target for r in reports])
        data = encode_dataset([extract_facets(r) for r in reports], table, cfg)
        base, h1 = train_encoded(data, labels, table, cfg)

        pi = np.random.default_rng(1).permutation(len(reports))
        inv = np.argsort(pi)
        original = training.epoch_permutation
        monkeypatch.setattr(training, "epoch_permutation",
                            lambda seed, epoch, n: inv[original(seed, epoch, n)])
        moved, h2 = train_encoded(training.take(data, pi), labels[pi], table, cfg)
        assert h1 == h2
        assert all(np.array_equal(base.tensors[k], moved.tensors[k]) for k in base.tensors)

    def test_partial_batch_is_trained(self, separable):
        reports, table = separable
        cfg = replace(SMALL, embedding_dim=100, batch_size=5, epochs=1)
        model, _ = train_reports(reports, table, cfg)
        # one full batch plus a partial one gives two Adam steps; compare against batch_size=8
        single, _ = train_reports(reports, table, replace(cfg, batch_size=8))
        assert not np.array_equal(model.tensors["head.b"], single.tensors["head.b"])

    def test_dim_mismatch(self, separable):
        reports, table = separable
        with pytest.raises(ValueError, match="dim"):
            train_reports(reports, table, SMALL)

    def test_unlabelled_reports_rejected(self, separable):
        _, table = separable
        with pytest.raises(ValueError, match="target"):
            train_reports([RawReport(id="x")], table, replace(SMALL, embedding_dim=100))


class TestOverfit:
    def test_loss_and_auc(self, overfit, separable):
        model, history, cfg = overfit
        reports, table = separable
        assert history[-1] < 0.05
        probs = [predict(model, table, r, cfg)[1] for r in reports]
        assert auc(probs, [r.target for r in reports]) == 1.0

    def test_loss_non_increasing_after_epoch_5(self, overfit):
        tail = overfit[1][4:]
        assert all(b <= a for a, b in zip(tail, tail[1:]))

    def test_memorized_positive(self, overfit, separable):
        model, _, cfg = overfit
        _, table = separable
        label, prob = predict(model, table, RawReport(id="q", title="slow data loader"), cfg)
        assert label == 1 and prob > 0.5


class TestPredict:
    def test_zero_head_tie_goes_positive(self, separable):
        _, table = separable
        cfg = replace(SMALL, embedding_dim=100)
        model = ModelParams.init(cfg.facets, 100, 3)
        model.tensors["head.W"][:] = 0
        assert predict(model, table, RawReport(id="q", title="slow"), cfg) == (1, 0.5)

    def test_empty_report(self, separable):
        _, table = separable
        cfg = replace(SMALL, embedding_dim=100)
        model = ModelParams.init(cfg.facets, 100, 3, seed=2)
        label, prob = predict(model, table, RawReport(id="q"), cfg)
        b = model.tensors["head.b"]
        # all facet vectors are zero, so only the head bias speaks
        assert prob == pytest.approx(1 / (1 + math.exp(b[0] - b[1])))
        assert label == int(prob >= 0.5)

    def test_proba_matches_predict(self, overfit, separable):
        model, _, cfg = overfit
        reports, table = separable
        data = encode_dataset([extract_facets(r) for r in reports], table, cfg)
        batch = predict_proba(model, table, data)
        single = [predict(model, table, r, cfg)[1] for r in reports]
        np.testing.assert_allclose(batch, single, atol=1e-14)
