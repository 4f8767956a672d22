import numpy as np
import pytest
from scipy.stats import chisquare

from adjnorm import models as M
from adjnorm import sparsegraph as S
from adjnorm import training as T
from adjnorm.baselines import BaselineConfig
from conftest import make_dataset
from test_sparsegraph import tiny_ds


class TestSampleBatch:
    def test_forced_negative(self):
        ds = tiny_ds([(0, 0)], 1, 2)
        rng = np.random.default_rng(0)
        triples = T.sample_batch(ds, 50, 0.0, rng)
        assert np.all(triples[:, 2] == 1)

    def test_popularity_weighted_ratio(self):
        # user 0 interacts with item 0 only; items 1 (deg 1) and 2 (deg 3) are negatives
        pairs = [(0, 0), (1, 1), (1, 2), (2, 2), (3, 2)]
        ds = tiny_ds(pairs, 4, 3)
        rng = np.random.default_rng(1)
        triples = T.sample_batch(ds, 100_000, 1.0, rng)
        mask = triples[:, 0] == 0
        negs = triples[mask, 2]
        counts = np.bincount(negs, minlength=3).astype(float)
        ratio = counts[2] / counts[1]
        assert abs(ratio - 3.0) < 3.0 * 0.02 * 3  # 2% relative band

    def test_uniform_negatives_chi_square(self):
        ds = tiny_ds([(0, 0)], 1, 6)
        rng = np.random.default_rng(2)
        triples = T.sample_batch(ds, 100_000, 0.0, rng)
        counts = np.bincount(triples[:, 2], minlength=6)[1:]  # items 1..5
        _, p = chisquare(counts)
        assert p > 0.01

    def test_invariants_hold(self, small_ds):
        rng = np.random.default_rng(3)
        triples = T.sample_batch(small_ds, 500, 0.5, rng)
        sets = small_ds.user_train_sets()
        for u, i, j in triples:
            assert i in sets[u]
            assert j not in sets[u]

    def test_deterministic_under_seed(self, small_ds):
        a = T.sample_batch(small_ds, 64, 0.0, np.random.default_rng(7))
        b = T.sample_batch(small_ds, 64, 0.0, np.random.default_rng(7))
        assert np.array_equal(a, b)


class TestBprLoss:
    def make_cache(self, E):
        return M.ForwardCache([], np.asarray(E, dtype=float))

    def test_equal_scores_give_ln2(self):
        E = np.ones((3, 2))
        cache = self.make_cache(E)
        table = M.EmbeddingTable(E.copy())
        triples = np.array([[0, 0, 1]])  # num_users=1: items at rows 1, 2
        loss, _, _ = T.bpr_loss_and_grad(triples, cache, table, 0.0, 1)
        assert abs(loss - np.log(2)) < 1e-12

    def test_large_margin_stable(self):
        E = np.array([[1.0], [40.0], [0.0]])
        cache = self.make_cache(E)
        table = M.EmbeddingTable(E.copy())
        triples = np.array([[0, 0, 1]])
        loss, _, _ = T.bpr_loss_and_grad(triples, cache, table, 0.0, 1)
        assert 0 < loss < 1e-15
        assert np.isfinite(loss)

    def test_directional_finite_difference(self):
        ds = make_dataset(num_users=6, num_items=8, per_user=4, seed=8, split_seed=1)
        spec = M.ModelSpec("lightgcn", layers=1, r=0.6, embed_dim=3)
        P = S.normalize_r(S.build_adjacency(ds, False), 0.6)
        table = M.init_embeddings(ds.num_nodes, 3, seed=0)
        triples = T.sample_batch(ds, 12, 0.0, np.random.default_rng(0))

        def loss_of(E0):
            t = M.EmbeddingTable(E0)
            c = M.forward(spec, P, t)
            l, _, _ = T.bpr_loss_and_grad(triples, c, t, 1e-3, ds.num_users)
            return l

        cache = M.forward(spec, P, table)
        _, gc, gl2 = T.bpr_loss_and_grad(triples, cache, table, 1e-3, ds.num_users)
        g = M.backward(spec, P, gc) + gl2
        rng = np.random.default_rng(4)
        direction = rng.standard_normal(table.E0.shape)
        eps = 1e-6
        fd = (loss_of(table.E0 + eps * direction) - loss_of(table.E0 - eps * direction)) / (2 * eps)
        an = float(np.sum(g * direction))
        assert abs(fd - an) / max(abs(fd), 1e-12) < 1e-5

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            T.bpr_loss_and_grad(
                np.empty((0, 3), dtype=int),
                M.ForwardCache([], np.eye(2)),
                M.EmbeddingTable(np.eye(2)),
                0.0,
                1,
            )


class TestAdam:
    def test_zero_gradient_no_change(self):
        table = M.EmbeddingTable(np.ones((3, 2)))
        state = T.AdamState.zeros_like(table.E0)
        before = table.E0.copy()
        T.adam_step(state, table, np.zeros((3, 2)), 0.001)
        assert np.array_equal(table.E0, before)

    def test_single_scalar_hand_value(self):
        table = M.EmbeddingTable(np.zeros((1, 1)))
        state = T.AdamState.zeros_like(table.E0)
        T.adam_step(state, table, np.ones((1, 1)), 0.001)
        want = -0.001 * 1.0 / (1.0 + 1e-8)
        assert abs(table.E0[0, 0] - want) < 1e-15

    def test_deterministic_over_steps(self):
        rng1, rng2 = np.random.default_rng(5), np.random.default_rng(5)
        tables = []
        for rng in (rng1, rng2):
            table = M.EmbeddingTable(np.zeros((4, 3)))
            state = T.AdamState.zeros_like(table.E0)
            for _ in range(10):
                T.adam_step(state, table, rng.standard_normal((4, 3)), 0.01)
            tables.append(table.E0)
        assert np.array_equal(tables[0], tables[1])

    def test_nan_gradient_aborts(self):
        table = M.EmbeddingTable(np.zeros((2, 2)))
        state = T.AdamState.zeros_like(table.E0)
        bad = np.zeros((2, 2))
        bad[0, 0] = np.nan
        with pytest.raises(FloatingPointError):
            T.adam_step(state, table, bad, 0.001)


class TestFullBatchDescent:
    def test_loss_nonincreasing_small_lr(self):
        ds = make_dataset(num_users=6, num_items=8, per_user=4, seed=8, split_seed=1)
        spec = M.ModelSpec("lightgcn", layers=1, r=0.5, embed_dim=4)
        P = S.normalize_r(S.build_adjacency(ds, False), 0.5)
        table = M.init_embeddings(ds.num_nodes, 4, seed=1)
        triples = T.sample_batch(ds, 20, 0.0, np.random.default_rng(1))
        losses = []
        for _ in range(100):
            cache = M.forward(spec, P, table)
            loss, gc, _ = T.bpr_loss_and_grad(triples, cache, table, 0.0, ds.num_users)
            losses.append(loss)
            table.E0 -= 0.01 * M.backward(spec, P, gc)
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


class TestTrainLoop:
    def test_empty_validation_rejected(self):
        ds = tiny_ds([(0, 0), (1, 1)], 2, 2)
        with pytest.raises(ValueError):
            T.train(ds, M.ModelSpec("mf", embed_dim=2), T.TrainConfig(max_epochs=1))

    def test_max_epochs_zero_returns_initial(self, small_ds):
        cfg = T.TrainConfig(max_epochs=0, seed=3)
        table, entries = T.train(small_ds, M.ModelSpec("mf", embed_dim=4), cfg)
        assert entries == []
        assert np.array_equal(
            table.E0, M.init_embeddings(small_ds.num_nodes, 4, seed=3).E0
        )

    def test_early_stopping_keeps_best_snapshot(self, small_ds, monkeypatch):
        # feed a strictly decreasing fake validation curve
        recalls = iter([0.9, 0.8, 0.7, 0.6])
        snapshots = []

        def fake_recall(spec, P, table, ds, k=20):
            snapshots.append(table.E0.copy())
            return next(recalls)

        monkeypatch.setattr(T, "_validation_recall", fake_recall)
        cfg = T.TrainConfig(max_epochs=100, eval_every=1, patience=1, batch_size=32, seed=0)
        table, entries = T.train(small_ds, M.ModelSpec("mf", embed_dim=4), cfg)
        evals = [e for e in entries if e.val_recall is not None]
        assert len(evals) == 2  # stops at the second, non-improving evaluation
        assert np.array_equal(table.E0, snapshots[0])

    def test_smoke_training_improves_validation(self):
        ds = make_dataset(num_users=200, num_items=100, per_user=12, seed=1, split_seed=3)
        spec = M.ModelSpec("lightgcn", layers=2, r=0.5, embed_dim=16)
        cfg = T.TrainConfig(max_epochs=40, eval_every=5, batch_size=512, seed=0)
        table, entries = T.train(ds, spec, cfg)
        P = S.normalize_r(S.build_adjacency(ds, False), 0.5)
        final = T._validation_recall(spec, P, table, ds)
        init = T._validation_recall(
            spec, P, M.init_embeddings(ds.num_nodes, 16, seed=0), ds
        )
        assert final > init

    def test_training_log_format(self, tmp_path, small_ds):
        cfg = T.TrainConfig(max_epochs=5, eval_every=5, batch_size=32, seed=0)
        _, entries = T.train(small_ds, M.ModelSpec("mf", embed_dim=4), cfg)
        path = tmp_path / "log.csv"
        T.write_training_log(entries, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,loss,val_recall@20,elapsed_ms"
        assert len(lines) == 1 + len(entries)
