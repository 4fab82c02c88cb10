import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from srlmtl.data import AnnotatedSentence, Argument, PredicateFrame, Vocabulary, gen_synthetic, to_word_based
from srlmtl.data.vocab import NULL_ROLE, PAD, UNK
from srlmtl.nn import autodiff as ad
from srlmtl.nn.autodiff import Tensor
from srlmtl.nn.checkpoint import load_checkpoint, save_checkpoint
from srlmtl.nn.optim import Adam, ParameterStore
from srlmtl.srl import (END_TO_END, GOLD_PREDICATES, SRLConfig, SRLModel, decode_frames, enumerate_spans,
                        keep_count, prune, represent, span_means)

from conftest import tiny_encoder


def build(vocab, seed=0, **kw):
    store = ParameterStore()
    cfg = SRLConfig(**{"mlp_hidden": 5, "lambda_a": 1.0, "max_width": 4, **kw})
    return store, SRLModel(store, vocab, tiny_encoder(), cfg, np.random.default_rng(seed))


def three_role_vocab():
    return Vocabulary({PAD: 0, UNK: 1, "a": 2, "b": 3, "c": 4}, {PAD: 0, UNK: 1, "a": 2, "b": 3, "c": 4},
                      {NULL_ROLE: 0, "A0": 1, "A1": 2, "LOC": 3}, {})


def fixture_sentence():
    return AnnotatedSentence(["a", "b", "c"], frames=[PredicateFrame(2, (Argument(1, 1, "A0"), Argument(3, 3, "A1")))])


# ------------------------------------------------------------------ representations

def test_represent_examples():
    h = Tensor(np.array([[2.0, 0.0], [0.0, 2.0], [5.0, 1.0]]))
    rep_p, rep_a = represent(h, np.array([[1, 2], [3, 3]]))
    np.testing.assert_array_equal(rep_p.data, h.data)
    np.testing.assert_array_equal(rep_a.data[0], [1.0, 1.0])
    np.testing.assert_array_equal(rep_a.data[1], h.data[2])
    with pytest.raises(IndexError):
        span_means(h, np.array([[2, 4]]))


def test_span_mean_matches_direct_sum(rng):
    h = rng.normal(size=(9, 5))
    spans = enumerate_spans(9, 4)
    got = span_means(Tensor(h), spans).data
    for r, (j, k) in enumerate(spans):
        direct = sum(h[i] for i in range(j - 1, k)) / (k - j + 1)
        np.testing.assert_allclose(got[r], direct, atol=1e-12)


# ------------------------------------------------------------------ pruning

def test_keep_count_examples():
    assert keep_count(10, 0.4, 10) == 4
    assert keep_count(1, 0.4, 1) == 1 and keep_count(1, 0.8, 1) == 1
    assert keep_count(15, 0.4, 15) == 6


@given(st.integers(1, 200), st.sampled_from([0.4, 0.8, 1.0]))
def test_keep_count_is_capped_ceiling(n, lam):
    spans = len(enumerate_spans(n, 30))
    assert keep_count(n, lam, n) == min(n, math.ceil(lam * n - 1e-9))
    assert keep_count(n, lam, spans) == min(spans, math.ceil(lam * n - 1e-9))


@given(st.integers(1, 12), st.integers(0, 2 ** 31))
def test_prune_matches_full_sort(n, seed):
    r = np.random.default_rng(seed)
    spans = enumerate_spans(n, 5)
    # coarse scores force ties so the tie-break is exercised
    phi_p = r.integers(0, 3, size=n).astype(float)
    phi_a = r.integers(0, 3, size=len(spans)).astype(float)
    cfg = SRLConfig(lambda_p=0.4, lambda_a=0.8, max_width=5)
    cand = prune(n, phi_p, phi_a, spans, cfg)
    order_p = sorted(range(n), key=lambda i: (-phi_p[i], i))[:keep_count(n, 0.4, n)]
    order_a = sorted(range(len(spans)), key=lambda i: (-phi_a[i], spans[i][0], spans[i][1]))
    order_a = order_a[:keep_count(n, 0.8, len(spans))]
    assert sorted(order_p) == list(cand.pred_rows)
    assert sorted(order_a) == list(cand.span_rows)


def test_full_width_enumeration_covers_gold_and_word_mode_keeps_all():
    corpus = gen_synthetic("hard", seed=2, srl_train=20, srl_dev=0)
    rng = np.random.default_rng(0)
    for s in corpus.srl_train:
        spans = {tuple(x) for x in enumerate_spans(s.n, s.n)}
        assert all((a.start, a.end) in spans for f in s.frames for a in f.arguments)
        # width 1 leaves exactly n candidates, all of which survive at lambda_a = 1
        w = to_word_based(s)
        spans1 = enumerate_spans(s.n, 1)
        cand = prune(s.n, rng.normal(size=s.n), rng.normal(size=s.n), spans1, SRLConfig(lambda_a=1.0, word_mode=True),
                     gold_predicates=[f.predicate for f in w.frames])
        kept = {tuple(x) for x in cand.spans}
        assert all((a.start, a.end) in kept for f in w.frames for a in f.arguments)


def test_word_mode_candidates_have_width_one(small_vocab, small_corpus):
    store, model = build(small_vocab, word_mode=True, max_width=7)
    assert model.cfg.max_width == 1
    s = to_word_based(small_corpus.srl_train[0])
    (sc,) = model.forward([s], END_TO_END)
    assert np.all(sc.candidates.spans[:, 0] == sc.candidates.spans[:, 1])
    frames = model.predict([s], END_TO_END)[0]
    assert all(a.start == a.end for f in frames for a in f.arguments)


# ------------------------------------------------------------------ scoring and loss

def zero_heads(store):
    for name, p in store.items():
        if not name.startswith("srl.encoder"):
            p.data[...] = 0.0


def test_zero_mlps_give_uniform_scores_and_ln4_loss():
    vocab = three_role_vocab()
    store, model = build(vocab)
    zero_heads(store)
    s = fixture_sentence()
    (sc,) = model.forward([s], GOLD_PREDICATES)
    assert np.all(sc.logits.data == 0.0)
    pairs = sc.logits.shape[0] * sc.logits.shape[1]
    loss = model.srl_loss(s, sc).data
    assert loss == pytest.approx(pairs * math.log(4), rel=1e-12)


def test_role_distribution_sums_to_one(small_vocab, small_corpus):
    _, model = build(small_vocab)
    (sc,) = model.forward(small_corpus.srl_train[:1], END_TO_END)
    probs = ad.softmax(sc.logits, axis=-1).data
    np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(sc.logits.data[..., 0] == 0.0)


def test_loss_matches_manual_enumeration():
    vocab = three_role_vocab()
    _, model = build(vocab, seed=4, word_mode=True)
    s = fixture_sentence()
    (sc,) = model.forward([s], GOLD_PREDICATES)
    logits = sc.logits.data
    gold = {(2, 1, 1): 1, (2, 3, 3): 2}
    total = 0.0
    for pi, p in enumerate(sc.candidates.predicates):
        for ai, (j, k) in enumerate(sc.candidates.spans):
            row = logits[pi, ai]
            target = gold.get((int(p), int(j), int(k)), 0)
            total -= row[target] - math.log(sum(math.exp(x) for x in row))
    loss = model.srl_loss(s, sc).data
    assert loss == pytest.approx(total, rel=1e-12)
    assert loss >= 0 and sc.gold_total == 2 and sc.gold_kept == 2


def test_scores_recomputed_from_checkpoint(tmp_path, small_vocab, small_corpus):
    store, model = build(small_vocab, seed=7)
    batch = small_corpus.srl_train[:2]
    before = [sc.logits.data for sc in model.forward(batch, END_TO_END)]
    save_checkpoint(tmp_path / "m.ckpt", store.full_state())
    state, _ = load_checkpoint(tmp_path / "m.ckpt")
    store2, model2 = build(small_vocab, seed=99)
    store2.load_state(state)
    after = [sc.logits.data for sc in model2.forward(batch, END_TO_END)]
    for a, b in zip(before, after):
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_tuple_scorer_gradient(small_vocab, small_corpus):
    from srlmtl.nn.gradcheck import max_relative_error
    store, model = build(small_vocab)
    s = small_corpus.srl_train[0]
    rng = np.random.default_rng(1)
    h = ad.parameter(rng.normal(size=(s.n, model.encoder.cfg.output_dim)))
    spans = enumerate_spans(s.n, 3)[:6]

    def fn():
        rep_p, rep_a, phi_p, phi_a = model.unary_scores(h, spans)
        return model.score_tuples(rep_p[:2], rep_a, phi_p[:2], phi_a)

    params = [h, store["srl.mlp_r.0.W"], store["srl.mlp_p.0.W"]]
    seed = rng.normal(size=fn().shape)
    assert max_relative_error(fn, params, seed_grad=seed, max_entries=40, rng=rng) < 1e-4


# ------------------------------------------------------------------ decoding

def candidates(spans, preds=(2,)):
    from srlmtl.srl import CandidateSet
    spans = np.array(spans)
    return CandidateSet(np.array(preds), spans, np.array(preds) - 1, np.arange(len(spans)), None, None)


def test_decode_all_null_gives_nothing():
    cand = candidates([(1, 1), (3, 3)])
    logits = np.zeros((1, 2, 3))
    logits[..., 1:] = -1.0
    assert decode_frames(cand, logits, [NULL_ROLE, "A0", "A1"], END_TO_END) == []
    assert decode_frames(cand, logits, [NULL_ROLE, "A0", "A1"], GOLD_PREDICATES) == [PredicateFrame(2, ())]


def test_decode_overlap_keeps_higher_score():
    cand = candidates([(1, 2), (2, 3), (4, 4)], preds=(5,))
    logits = np.zeros((1, 3, 3))
    logits[0, 0, 1] = 2.0  # (1,2) A0
    logits[0, 1, 2] = 3.0  # (2,3) A1 overlaps and wins
    logits[0, 2, 1] = 0.5  # (4,4) A0 disjoint
    (frame,) = decode_frames(cand, logits, [NULL_ROLE, "A0", "A1"], END_TO_END)
    assert frame.arguments == (Argument(2, 3, "A1"), Argument(4, 4, "A0"))


def test_gold_predicate_decoding_only_at_gold_positions(small_vocab, small_corpus):
    _, model = build(small_vocab, lambda_p=1.0)
    for s in small_corpus.srl_dev:
        gold = sorted(f.predicate for f in s.frames)
        pred = model.predict([s], GOLD_PREDICATES)[0]
        assert [f.predicate for f in pred] == gold


# ------------------------------------------------------------------ optimizer sanity

def test_loss_decreases_over_50_full_batch_steps():
    # word mode at lambda_a = 1 keeps every candidate, so the objective itself stays fixed across steps
    corpus = gen_synthetic("simple", seed=11, srl_train=5, srl_dev=0)
    sents = [to_word_based(s) for s in corpus.srl_train]
    vocab = Vocabulary.build(sents)
    store, model = build(vocab, seed=3, word_mode=True)
    opt = Adam()
    losses = []
    for _ in range(50):
        loss, _ = model.loss(sents, GOLD_PREDICATES)
        loss.backward()
        losses.append(float(loss.data))
        opt.step(store, 1e-3)
    assert all(b < a for a, b in zip(losses, losses[1:])), losses
