import numpy as np
import pytest
from hypothesis import given, strategies as st

from srlmtl.encoder import ConfigError
from srlmtl.mtl import (BatchScheduler, LoadError, MTLSystem, assemble_hps, joint_loss, load_fir, make_plan,
                        next_batch, syn_rep)
from srlmtl.nn import autodiff as ad
from srlmtl.nn.autodiff import ShapeError, Tensor
from srlmtl.nn.checkpoint import save_checkpoint
from srlmtl.nn.dropout import Dropout
from srlmtl.nn.optim import Adam, ParameterStore
from srlmtl.srl import GOLD_PREDICATES, SRLModel
from srlmtl.train import Trainer

from conftest import tiny_encoder, tiny_model_config


# ------------------------------------------------------------------ fusion and joint loss

def test_syn_rep_closed_forms(rng):
    layers = [Tensor(rng.normal(size=(2, 3, 4))) for _ in range(3)]
    mean = sum(l.data for l in layers) / 3
    np.testing.assert_allclose(syn_rep(layers, np.zeros(3)).data, mean, atol=1e-12)
    np.testing.assert_array_equal(syn_rep(layers[:1], np.array([3.7])).data, layers[0].data)
    with pytest.raises(ShapeError):
        syn_rep(layers, np.zeros(2))
    with pytest.raises(ShapeError):
        syn_rep([layers[0], Tensor(np.zeros((2, 3, 5)))], np.zeros(2))


@given(st.integers(1, 5), st.integers(0, 2 ** 31))
def test_syn_rep_matches_weighted_sum(N, seed):
    r = np.random.default_rng(seed)
    layers = [r.normal(size=(2, 5)) for _ in range(N)]
    logits = r.normal(size=N) * 2
    w = np.exp(logits) / np.exp(logits).sum()
    expected = sum(w[j] * layers[j] for j in range(N))
    got = syn_rep([Tensor(l) for l in layers], logits).data
    np.testing.assert_allclose(got, expected, atol=1e-12)
    assert abs(w.sum() - 1) < 1e-9


def test_joint_loss_arithmetic():
    assert joint_loss(Tensor(np.asarray(2.0)), Tensor(np.asarray(3.0)), 1.0).data == 5.0
    assert joint_loss(Tensor(np.asarray(2.0)), Tensor(np.asarray(3.0)), 0.0).data == 2.0
    assert joint_loss(Tensor(np.asarray(2.0)), None, 1.0).data == 2.0


def test_negative_alpha_rejected():
    with pytest.raises(ConfigError):
        tiny_model_config(alpha_loss=-0.5)


# ------------------------------------------------------------------ scheduling

def test_scheduler_cursor_and_reshuffle():
    s = BatchScheduler(["a", "b", "c"], 2, seed=0)
    first, second = s.next(), s.next()
    assert len(first) == 2 and len(second) == 1 and s.epoch == 0
    assert sorted(first + second) == ["a", "b", "c"]
    third = s.next()
    assert s.epoch == 1 and len(third) == 2


def test_scheduler_is_seeded():
    a = BatchScheduler(list(range(7)), 3, seed=5)
    b = BatchScheduler(list(range(7)), 3, seed=5)
    assert [a.next() for _ in range(12)] == [b.next() for _ in range(12)]


@given(st.integers(1, 9), st.integers(1, 4), st.integers(1, 40), st.integers(0, 1000))
def test_scheduler_counts_balanced(size, batch, draws, seed):
    s = BatchScheduler(list(range(size)), batch, seed=seed)
    counts = np.zeros(size, dtype=int)
    for _ in range(draws):
        for x in s.next():
            counts[x] += 1
    assert counts.max() - counts.min() <= 1


def test_plan_mixes_both_corpora_and_rejects_empty(small_corpus):
    for mode in ("IIR", "HPS"):
        plan = make_plan(mode, "span", small_corpus.srl_train, small_corpus.dep_train, 2, 2, seed=1)
        for _ in range(10):
            srl, dep = next_batch(plan)
            assert srl and dep
    assert make_plan("none", "span", small_corpus.srl_train, [], 2, 2, 0).dep is None
    with pytest.raises(ConfigError):
        make_plan("IIR", "span", small_corpus.srl_train, [], 2, 2, 0)
    with pytest.raises(ConfigError):
        make_plan("none", "span", [], small_corpus.dep_train, 2, 2, 0)


# ------------------------------------------------------------------ IIR

def test_iir_registries_disjoint(small_vocab):
    sys_ = MTLSystem(tiny_model_config("IIR"), small_vocab)
    srl, parser = set(sys_.srl.param_names), set(sys_.parser.param_names)
    assert srl & parser == set()
    assert set(sys_.store.names()) == srl | parser | {"bridge.syn_logits"}


def test_iir_parser_encoder_gets_gradient_from_both_paths(small_vocab, small_corpus):
    srl_b, dep_b = small_corpus.srl_train[:2], small_corpus.dep_train[:2]
    name = "parser.encoder.lstm.0.fwd.U"

    def grad(alpha, detach):
        sys_ = MTLSystem(tiny_model_config("IIR", alpha_loss=alpha), small_vocab)
        loss, _ = sys_.step_loss(srl_b, dep_b, detach_syn=detach)
        loss.backward()
        return sys_.store[name].grad.copy()

    both, dep_only, syn_only = grad(1.0, False), grad(1.0, True), grad(0.0, False)
    assert np.any(dep_only != 0) and np.any(syn_only != 0)
    np.testing.assert_allclose(both, dep_only + syn_only, atol=1e-12)
    assert np.all(grad(0.0, True) == 0)


def test_parser_head_gradient_linear_in_alpha(small_vocab, small_corpus):
    srl_b, dep_b = small_corpus.srl_train[:2], small_corpus.dep_train[:2]

    def grad(alpha):
        sys_ = MTLSystem(tiny_model_config("IIR", alpha_loss=alpha), small_vocab)
        loss, _ = sys_.step_loss(srl_b, dep_b)
        loss.backward()
        return [sys_.store[n].grad.copy() for n in ("parser.U_arc", "parser.lab_head.0.W", "parser.b_lab")]

    # arc_head gets no gradient at initialisation because U_arc and b_arc start at zero
    for g1, g3 in zip(grad(1.0), grad(3.0)):
        assert np.any(g1 != 0)
        np.testing.assert_allclose(g3, 3 * g1, rtol=1e-10, atol=1e-14)


# ------------------------------------------------------------------ HPS

def test_hps_shares_exactly_the_encoder(small_vocab, small_corpus):
    sys_ = MTLSystem(tiny_model_config("HPS"), small_vocab)
    assert sys_.parser.encoder is sys_.srl.encoder
    shared = set(sys_.srl.param_names) & set(sys_.parser.param_names)
    assert shared == set(sys_.srl.encoder.param_names)
    assert not set(sys_.srl.head_names) & set(sys_.parser.head_names)
    opt = Adam()
    for _ in range(3):
        loss, _ = sys_.step_loss(small_corpus.srl_train[:2], small_corpus.dep_train[:2])
        loss.backward()
        opt.step(sys_.store, 1e-2)
    assert sys_.parser.encoder is sys_.srl.encoder
    assert sys_.store["srl.encoder.word_emb"] is sys_.parser.encoder.word_emb
    for layer_s, layer_p in zip(sys_.srl.encoder.bilstm.layers, sys_.parser.encoder.bilstm.layers):
        assert layer_s.fwd.U is layer_p.fwd.U and layer_s.bwd.W is layer_p.bwd.W
    sents = small_corpus.dep_dev
    np.testing.assert_array_equal(sys_.parser.encoder(sents).top.data, sys_.srl.encoder(sents).top.data)


def test_hps_parser_only_step(small_vocab, small_corpus):
    sys_ = MTLSystem(tiny_model_config("HPS"), small_vocab)
    sents = small_corpus.srl_train[:2]
    before_enc = sys_.srl.encoder(sents).top.data.copy()
    heads = {n: sys_.store[n].data.copy() for n in sys_.srl.head_names}
    sys_.parser.loss(small_corpus.dep_train[:2]).backward()
    Adam().step(sys_.store, 1e-2)
    assert not np.allclose(sys_.srl.encoder(sents).top.data, before_enc)
    for n, v in heads.items():
        np.testing.assert_array_equal(sys_.store[n].data, v)


def test_hps_rejects_mismatched_encoders(small_vocab):
    store = ParameterStore()
    srl = SRLModel(store, small_vocab, tiny_encoder(), tiny_model_config().srl, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        assemble_hps(store, srl, small_vocab, tiny_encoder(hidden=6), tiny_model_config().parser,
                     np.random.default_rng(1))


# ------------------------------------------------------------------ FIR

@pytest.fixture
def parser_checkpoint(tmp_path, small_vocab):
    sys_ = MTLSystem(tiny_model_config("none", task="dep", seed=4), small_vocab)
    path = tmp_path / "parser.ckpt"
    save_checkpoint(path, sys_.state(), sys_.meta())
    return path, sys_.state()


def test_fir_freezes_parser_and_trains_fusion(parser_checkpoint, small_vocab, small_corpus):
    path, saved = parser_checkpoint
    sys_ = MTLSystem(tiny_model_config("FIR"), small_vocab, fir_path=path)
    assert not any(n.startswith("parser.") for n in sys_.store.names())
    logits0 = sys_.syn_logits.data.copy()
    corpora = {"srl_train": small_corpus.srl_train, "srl_dev": [], "dep_train": [], "dep_dev": []}
    Trainer(sys_, corpora, lr=1e-2, srl_batch=2, eval_interval=1000).run(100)
    for name, value in saved.items():
        np.testing.assert_array_equal(sys_.frozen_store[name].data, value)
    assert np.any(sys_.syn_logits.data != logits0)


def test_fir_matches_iir_at_step_zero(parser_checkpoint, small_vocab, small_corpus):
    path, saved = parser_checkpoint
    fir = MTLSystem(tiny_model_config("FIR"), small_vocab, fir_path=path)
    iir = MTLSystem(tiny_model_config("IIR"), small_vocab)
    for name in iir.parser.param_names:
        iir.store[name].data[...] = saved[name]
    batch = small_corpus.srl_dev
    np.testing.assert_array_equal(fir.syntactic_features(batch).data, iir.syntactic_features(batch).data)


def test_fir_load_errors(tmp_path, small_vocab):
    with pytest.raises(LoadError):
        load_fir(tmp_path / "missing.ckpt")
    sys_ = MTLSystem(tiny_model_config("none"), small_vocab)
    save_checkpoint(tmp_path / "srl.ckpt", sys_.state(), sys_.meta())
    with pytest.raises(LoadError):
        load_fir(tmp_path / "srl.ckpt")
    with pytest.raises(ConfigError):
        MTLSystem(tiny_model_config("FIR"), small_vocab)


def test_fir_checkpoint_round_trip(tmp_path, parser_checkpoint, small_vocab, small_corpus):
    path, _ = parser_checkpoint
    sys_ = MTLSystem(tiny_model_config("FIR"), small_vocab, fir_path=path)
    sys_.syn_logits.data[...] = [0.3, -0.2]
    save_checkpoint(tmp_path / "fir.ckpt", sys_.state(), sys_.meta())
    back = MTLSystem.from_checkpoint(tmp_path / "fir.ckpt")
    batch = small_corpus.srl_dev
    assert back.predict(batch) == sys_.predict(batch)


# ------------------------------------------------------------------ baseline equivalence

def test_mode_none_reproduces_a_separately_built_baseline(small_vocab, small_corpus):
    cfg = tiny_model_config("none", seed=6)
    sys_ = MTLSystem(cfg, small_vocab)
    store = ParameterStore()
    dropout = Dropout(cfg.dropout, np.random.default_rng([6, 2]))
    baseline = SRLModel(store, small_vocab, cfg.encoder, cfg.srl, np.random.default_rng([6, 0]), dropout)
    opt_a, opt_b = Adam(clip_norm=5.0), Adam(clip_norm=5.0)
    for k in range(4):
        batch = small_corpus.srl_train[k:k + 2]
        la, _ = sys_.step_loss(batch)
        la.backward()
        opt_a.step(sys_.store, 1e-2)
        lb, _ = baseline.loss(batch, GOLD_PREDICATES)
        lb.backward()
        opt_b.step(store, 1e-2)
        assert float(la.data) == float(lb.data)
    for name, value in store.full_state().items():
        np.testing.assert_array_equal(sys_.store[name].data, value)
