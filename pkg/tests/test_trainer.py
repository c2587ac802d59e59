import json

import numpy as np
import pytest

from lexner import (Checkpoint, ParamStore, TrainConfig, adam_step,
                    build_lexicon, make_synthetic_corpus, train)
from lexner.corpus import Dataset, Sentence, TagScheme
from lexner.errors import ConfigError, NumericError
from lexner.model import prepare_sentence, sentence_loss
from lexner.trainer import evaluate, gold_spans


def tiny_config(**kw):
    base = dict(lr=1e-2, batch_size=8, dropout=0.1, d_c=8, d_w=8, bigru_total=16,
                epochs=3, patience=100, seed=5, knowledge_mode="slk")
    base.update(kw)
    return TrainConfig(**base)


def tiny_corpus(n=6, seed=3):
    ds, words, scheme = make_synthetic_corpus(n_sentences=n, seed=seed)
    lex = build_lexicon(words, None, dim=8, rng=np.random.default_rng(0))
    return ds, lex, scheme


class TestAdamStep:
    def test_first_step_closed_form(self):
        store = ParamStore()
        store.add("w", np.array([1.0, -2.0, 0.5]))
        g = np.array([0.3, -0.1, 2.0])
        store["w"].grad += g
        lr, eps = 1e-2, 1e-8
        adam_step(store, lr, t=1, eps=eps)
        expected = np.array([1.0, -2.0, 0.5]) - lr * g / (np.abs(g) + eps)
        assert np.allclose(store.value("w"), expected, atol=1e-12)
        assert np.all(store["w"].grad == 0.0)

    def test_zero_gradient_keeps_value(self):
        store = ParamStore()
        store.add("w", np.array([1.0, 2.0]))
        adam_step(store, 1e-2, t=1)
        assert np.array_equal(store.value("w"), [1.0, 2.0])

    def test_moments_decay_on_zero_gradient(self):
        store = ParamStore()
        store.add("w", np.array([1.0, 2.0]))
        store["w"].grad += 0.5
        adam_step(store, 1e-2, t=1)
        m_after_first = store["w"].m.copy()
        adam_step(store, 1e-2, t=2)   # zero gradient step
        assert np.allclose(store["w"].m, 0.9 * m_after_first, atol=1e-15)

    def test_non_finite_gradient_names_param(self):
        store = ParamStore()
        store.add("bad_one", np.zeros(2))
        store["bad_one"].grad[0] = np.inf
        with pytest.raises(NumericError, match="bad_one"):
            adam_step(store, 1e-2, t=1)

    def test_skip_freezes_param(self):
        store = ParamStore()
        store.add("w", np.ones(2))
        store["w"].grad += 1.0
        adam_step(store, 1e-2, t=1, skip=("w",))
        assert np.array_equal(store.value("w"), [1.0, 1.0])

    def test_clip_norm(self):
        store = ParamStore()
        store.add("w", np.zeros(4))
        store["w"].grad += np.array([3.0, 4.0, 0.0, 0.0])   # norm 5
        adam_step(store, 1.0, t=1, clip_norm=1.0)
        # post-clip gradient direction is preserved
        v = store.value("w")
        assert v[0] < 0 and v[1] < 0 and abs(v[2]) < 1e-12

    def test_three_step_replay_bit_identical(self):
        def run():
            rng = np.random.default_rng(9)
            store = ParamStore()
            store.add("w", rng.normal(size=5))
            for t in range(1, 4):
                store["w"].grad += rng.normal(size=5)
                adam_step(store, 1e-3, t=t)
            return store.value("w").tobytes()

        assert run() == run()


class TestTrainConfig:
    def test_defaults_match_reference_settings(self):
        cfg = TrainConfig()
        assert (cfg.lr, cfg.batch_size, cfg.dropout) == (5e-5, 32, 0.1)
        assert (cfg.max_len, cfg.d_w, cfg.bigru_total, cfg.layers) == (250, 50, 512, 1)

    def test_rejects_multi_layer(self):
        with pytest.raises(ConfigError):
            TrainConfig(layers=2)

    def test_rejects_bad_mode(self):
        with pytest.raises(ConfigError):
            TrainConfig(knowledge_mode="zeroth")

    def test_round_trip_dict(self):
        cfg = tiny_config()
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg


class TestTrainLoop:
    def test_empty_train_set_rejected(self):
        ds, lex, scheme = tiny_corpus()
        empty = Dataset([], "train", scheme)
        with pytest.raises(ConfigError):
            train(empty, ds, lex, tiny_config())

    def test_history_and_log_file(self, tmp_path):
        ds, lex, _ = tiny_corpus()
        log_path = tmp_path / "train.log"
        result = train(ds, ds, lex, tiny_config(epochs=2), log_path=log_path)
        assert len(result.history) == 2
        for rec in result.history:
            assert rec["train_nll"] >= 0.0 and np.isfinite(rec["train_nll"])
            assert set(rec) == {"epoch", "train_nll", "dev_p", "dev_r", "dev_f1", "seconds"}
        lines = [json.loads(line) for line in log_path.read_text().splitlines()]
        assert [l["epoch"] for l in lines] == [1, 2]

    def test_deterministic_given_seed(self):
        ds, lex, _ = tiny_corpus()

        def run():
            result = train(ds, ds, lex, tiny_config(epochs=2))
            return {name: result.last.store.value(name).tobytes()
                    for name in result.last.store.names()}

        a, b = run(), run()
        assert a == b

    def test_worker_count_does_not_change_result(self):
        ds, lex, _ = tiny_corpus()
        r1 = train(ds, ds, lex, tiny_config(epochs=2, workers=1))
        r2 = train(ds, ds, lex, tiny_config(epochs=2, workers=3))
        for name in r1.last.store.names():
            assert r1.last.store.value(name).tobytes() == r2.last.store.value(name).tobytes()

    def test_resume_matches_uninterrupted(self, tmp_path):
        ds, lex, _ = tiny_corpus()
        full = train(ds, ds, lex, tiny_config(epochs=4))
        half = train(ds, ds, lex, tiny_config(epochs=2))
        path = tmp_path / "half.ckpt"
        half.last.save(path)
        resumed = train(ds, ds, lex, tiny_config(epochs=4),
                        resume=Checkpoint.load(path))
        assert resumed.last.epoch == 4
        for name in full.last.store.names():
            assert (full.last.store.value(name).tobytes()
                    == resumed.last.store.value(name).tobytes()), name

    def test_none_mode_equals_slk_on_empty_lexicon(self):
        ds, _, _ = tiny_corpus()
        empty_lex = build_lexicon(["只"], None, dim=8)   # all entries skipped
        assert len(empty_lex) == 0
        r_none = train(ds, ds, empty_lex, tiny_config(epochs=2, knowledge_mode="slk"))
        r_slk = train(ds, ds, empty_lex, tiny_config(epochs=2, knowledge_mode="none"))
        for name in r_none.last.store.names():
            assert (r_none.last.store.value(name).tobytes()
                    == r_slk.last.store.value(name).tobytes())

    def test_freeze_word_emb(self):
        ds, lex, _ = tiny_corpus()
        result = train(ds, ds, lex, tiny_config(epochs=1, freeze_word_emb=True))
        assert np.array_equal(result.last.store.value("word_emb"), lex.embeddings)

    def test_parameter_coverage_across_seeds(self):
        # over a 5-seed ensemble, every parameter sees a nonzero gradient
        # in the first batch
        ds, lex, scheme = tiny_corpus(n=8)
        cfg = tiny_config()
        covered = None
        for seed in range(5):
            rng = np.random.default_rng(seed)
            from lexner.corpus import build_char_vocab
            from lexner.model import init_params
            vocab = build_char_vocab(ds.sentences)
            mcfg = cfg.model_config(scheme.size)
            store = init_params(mcfg, len(vocab), lex.embeddings, rng)
            store.zero_grads()
            for sent in ds.sentences:
                item = prepare_sentence(sent, lex, vocab, "slk")
                _, grads = sentence_loss(store, item, mcfg, train=True, rng=rng)
                grads.reduce_into(store)
            got = {name for name in store.names()
                   if np.any(store[name].grad != 0.0)}
            covered = got if covered is None else covered | got
        assert covered == set(store.names())

    def test_memorizes_single_sentence(self):
        scheme = TagScheme("BIOES", ("LOC",))
        sent = Sentence(tuple("去江城里看"),
                        tuple(scheme.index_of(t) for t in
                              ("O", "B-LOC", "E-LOC", "O", "O")), "m0")
        ds = Dataset([sent], "train", scheme)
        lex = build_lexicon(["江城", "城里"], None, dim=8,
                            rng=np.random.default_rng(0))
        cfg = tiny_config(dropout=0.0, epochs=120, batch_size=4)
        result = train(ds, ds, lex, cfg)
        item = prepare_sentence(sent, lex, result.last.char_vocab, "slk")
        loss, _ = sentence_loss(result.last.store, item,
                                cfg.model_config(scheme.size), train=False)
        assert loss < 0.01
        # 5-epoch moving average of the training loss never increases
        nll = np.array([h["train_nll"] for h in result.history])
        ma = np.convolve(nll, np.ones(5) / 5, mode="valid")
        assert np.all(np.diff(ma) <= 1e-9)

    def test_checkpoint_reproduces_dev_f1(self, tmp_path):
        ds, lex, scheme = tiny_corpus(n=8)
        cfg = tiny_config(epochs=3)
        result = train(ds, ds, lex, cfg)
        path = tmp_path / "best.ckpt"
        result.best.save(path)
        loaded = Checkpoint.load(path)
        mcfg = loaded.config.model_config(loaded.scheme().size)
        inputs = [prepare_sentence(s, lex, loaded.char_vocab, cfg.knowledge_mode)
                  for s in ds.sentences]
        _, _, f1 = evaluate(loaded.store, inputs, gold_spans(ds),
                            loaded.scheme(), mcfg)
        assert f1 == result.best.best_dev_f1

    def test_early_stopping(self):
        ds, lex, _ = tiny_corpus()
        result = train(ds, ds, lex, tiny_config(epochs=50, patience=2, lr=1e-9))
        # lr too small to improve; must stop well before 50 epochs
        assert len(result.history) <= 10

    def test_float32_training_mode(self, tmp_path):
        ds, lex, _ = tiny_corpus()
        result = train(ds, ds, lex, tiny_config(epochs=2, precision="float32"))
        store = result.last.store
        assert all(store.value(n).dtype == np.float32 for n in store.names())
        assert all(np.isfinite(h["train_nll"]) for h in result.history)
        path = tmp_path / "f32.ckpt"
        result.last.save(path)
        loaded = Checkpoint.load(path)
        for name in store.names():
            assert loaded.store.value(name).dtype == np.float32
            assert loaded.store.value(name).tobytes() == store.value(name).tobytes()

    def test_float32_rejoins_relaxed_grad_check(self):
        from lexner.diagnostics import end_to_end_grad_check
        for seed in (1, 2, 3):
            err = end_to_end_grad_check(seed, precision="float32",
                                        eps=1e-2, denom_floor=1e-3)
            assert err < 1e-2, f"seed {seed}: {err}"

    def test_invalid_precision_rejected(self):
        with pytest.raises(ConfigError):
            tiny_config(precision="float16")

    def test_train_with_precomputed_char_vectors(self, tmp_path):
        ds, lex, _ = tiny_corpus()
        rng = np.random.default_rng(0)
        vectors = {s.id: rng.normal(size=(len(s), 8)) for s in ds.sentences}
        result = train(ds, ds, lex, tiny_config(epochs=1), char_vectors=vectors)
        assert "char_emb" not in result.last.store
        path = tmp_path / "file_mode.ckpt"
        result.last.save(path)
        loaded = Checkpoint.load(path)
        assert loaded.model_config().char_source == "file"

    def test_missing_char_vectors_for_sentence(self):
        from lexner.errors import DataError
        ds, lex, _ = tiny_corpus()
        vectors = {ds.sentences[0].id: np.zeros((len(ds.sentences[0]), 8))}
        with pytest.raises(DataError):
            train(ds, ds, lex, tiny_config(epochs=1), char_vectors=vectors)


class TestCheckpointIO:
    def test_round_trip_fields(self, tmp_path):
        ds, lex, _ = tiny_corpus()
        result = train(ds, ds, lex, tiny_config(epochs=1))
        path = tmp_path / "model.ckpt"
        result.best.save(path)
        loaded = Checkpoint.load(path)
        assert loaded.config == result.best.config
        assert loaded.epoch == result.best.epoch
        assert loaded.best_dev_f1 == result.best.best_dev_f1
        assert loaded.char_vocab == result.best.char_vocab
        assert loaded.words == result.best.words
        assert loaded.rng_state == result.best.rng_state
        for name in result.best.store.names():
            assert (loaded.store.value(name).tobytes()
                    == result.best.store.value(name).tobytes())
