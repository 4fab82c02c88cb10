import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from srlmtl.data import AnnotatedSentence, DepTree, Vocabulary, gen_synthetic, is_tree
from srlmtl.mst import decode_heads, max_spanning_tree
from srlmtl.nn import autodiff as ad
from srlmtl.nn.gradcheck import max_relative_error
from srlmtl.nn.optim import Adam, ParameterStore
from srlmtl.parser import BiaffineParser, ParserConfig, parser_loss, uas_las

from conftest import tiny_encoder


def build(vocab, seed=0, enc=None, **kw):
    store = ParameterStore()
    cfg = ParserConfig(**{"arc_dim": 5, "label_dim": 4, **kw})
    return store, BiaffineParser(store, vocab, enc or tiny_encoder(), cfg, np.random.default_rng(seed))


def brute_best(arc):
    """Independent oracle: enumerate every head assignment, keep single-rooted trees."""
    n = arc.shape[1]
    best = -np.inf
    for heads in itertools.product(range(n + 1), repeat=n):
        if is_tree(list(heads)):
            best = max(best, sum(arc[h, m] for m, h in enumerate(heads)))
    return best


def score_of(arc, heads):
    return sum(arc[h, m] for m, h in enumerate(heads))


# ------------------------------------------------------------------ scoring

def test_zero_biaffine_gives_zero_scores(small_vocab, small_corpus):
    store, parser = build(small_vocab)
    store["parser.U_arc"].data[...] = 0
    store["parser.b_arc"].data[...] = 0
    arc = parser.biaffine_score(small_corpus.dep_train[0]).arc
    finite = np.isfinite(arc)
    assert np.all(arc[finite] == 0)
    n = arc.shape[1]
    assert all(arc[m, m - 1] == -np.inf for m in range(1, n + 1))
    assert finite.sum() == (n + 1) * n - n


def test_arc_scores_match_loop(rng, small_vocab):
    store, parser = build(small_vocab, seed=2)
    store["parser.U_arc"].data[...] = rng.normal(size=(5, 5))
    store["parser.b_arc"].data[...] = rng.normal(size=5)
    arc_h, arc_d = rng.normal(size=(1, 5, 5)), rng.normal(size=(1, 4, 5))
    got = parser.arc_scores(ad.Tensor(arc_h), ad.Tensor(arc_d)).data[0]
    U, b = store["parser.U_arc"].data, store["parser.b_arc"].data
    for h in range(5):
        for m in range(4):
            expected = sum(arc_h[0, h, i] * U[i, j] * arc_d[0, m, j] for i in range(5) for j in range(5))
            expected += sum(b[i] * arc_h[0, h, i] for i in range(5))
            assert got[h, m] == pytest.approx(expected, abs=1e-10)


def test_biaffine_gradients(rng, small_vocab):
    store, parser = build(small_vocab, seed=1)
    store["parser.U_arc"].data[...] = rng.normal(size=(5, 5))
    store["parser.U_lab"].data[...] = rng.normal(size=store["parser.U_lab"].shape)
    arc_h, arc_d = ad.parameter(rng.normal(size=(1, 4, 5))), ad.parameter(rng.normal(size=(1, 3, 5)))
    lab_h, lab_d = ad.parameter(rng.normal(size=(1, 4, 4))), ad.parameter(rng.normal(size=(1, 3, 4)))
    params = [arc_h, arc_d, store["parser.U_arc"], store["parser.b_arc"]]
    assert max_relative_error(lambda: parser.arc_scores(arc_h, arc_d), params,
                              seed_grad=rng.normal(size=(1, 4, 3))) < 1e-4
    fn = lambda: parser.full_label_scores(lab_h, lab_d)  # noqa: E731
    params = [lab_h, lab_d, store["parser.U_lab"], store["parser.W_lab_h"]]
    assert max_relative_error(fn, params, seed_grad=rng.normal(size=fn().shape)) < 1e-4


def test_empty_sentence_is_an_error(small_vocab):
    _, parser = build(small_vocab)
    with pytest.raises(ValueError):
        parser.parse([AnnotatedSentence([])])


def test_no_part_of_speech_anywhere(small_vocab):
    store, parser = build(small_vocab)
    assert not any("pos" in name.lower() for name in store.names())
    assert not any("pos" in f.lower() for f in vars(parser.cfg))
    assert not any("pos" in f.lower() for f in vars(small_vocab))


# ------------------------------------------------------------------ loss

def test_uniform_scores_give_ln3_per_token():
    n = 3
    arc = np.zeros((n + 1, n))
    arc[np.arange(1, n + 1), np.arange(n)] = -np.inf
    labels = np.zeros((n + 1, n, 1))
    gold = DepTree((2, 0, 2), ("X", "X", "X"))
    assert parser_loss(arc, labels, gold, {"X": 0}).data == pytest.approx(3 * math.log(3), rel=1e-12)


def test_confident_correct_scores_give_tiny_loss():
    gold = DepTree((2, 0, 2), ("A", "ROOT", "B"))
    arc = np.full((4, 3), -50.0)
    labels = np.full((4, 3, 3), -50.0)
    for m, (h, l) in enumerate(zip(gold.heads, (0, 1, 2))):
        arc[h, m] = 50.0
        labels[h, m, l] = 50.0
    assert parser_loss(arc, labels, gold, {"A": 0, "ROOT": 1, "B": 2}).data < 1e-3


def test_loss_matches_per_token_enumeration(rng):
    n, L = 4, 3
    arc = rng.normal(size=(n + 1, n))
    arc[np.arange(1, n + 1), np.arange(n)] = -np.inf
    labels = rng.normal(size=(n + 1, n, L))
    gold = DepTree((2, 0, 2, 3), ("a", "b", "c", "a"))
    ids = {"a": 0, "b": 1, "c": 2}
    expected = 0.0
    for m in range(n):
        col = arc[:, m]
        finite = col[np.isfinite(col)]
        expected -= col[gold.heads[m]] - math.log(sum(math.exp(x) for x in finite))
        row = labels[gold.heads[m], m]
        expected -= row[ids[gold.labels[m]]] - math.log(sum(math.exp(x) for x in row))
    assert parser_loss(arc, labels, gold, ids).data == pytest.approx(expected, rel=1e-12)


def test_batch_loss_requires_gold_tree(small_vocab):
    _, parser = build(small_vocab)
    with pytest.raises(ValueError, match="no gold tree"):
        parser.loss([AnnotatedSentence(["a", "b"])])


# ------------------------------------------------------------------ decoding

def test_chain_decodes_to_chain():
    arc = np.full((4, 3), -5.0)
    arc[0, 0] = arc[1, 1] = arc[2, 2] = 5.0
    assert decode_heads(arc).tolist() == [0, 1, 2]


def test_two_cycle_repaired_to_best_tree():
    arc = np.full((5, 4), -1.0)
    arc[2, 0], arc[1, 1] = 4.0, 4.0  # greedy: 1 <- 2 and 2 <- 1
    arc[0, 2], arc[3, 3] = 2.0, 2.0
    arc[np.arange(1, 5), np.arange(4)] = -np.inf
    greedy = arc.argmax(axis=0)
    assert not is_tree(greedy.tolist())
    heads = decode_heads(arc)
    assert is_tree(heads.tolist())
    assert score_of(arc, heads) == brute_best(arc)


def test_self_heads_never_selected():
    arc = np.zeros((3, 2))
    arc[1, 0] = arc[2, 1] = -np.inf
    heads = decode_heads(arc)
    assert heads[0] != 1 and heads[1] != 2


@given(st.integers(1, 4), st.integers(0, 2 ** 31))
def test_repair_matches_exhaustive_optimum(n, seed):
    r = np.random.default_rng(seed)
    arc = r.normal(size=(n + 1, n))
    arc[np.arange(1, n + 1), np.arange(n)] = -np.inf
    heads = decode_heads(arc)
    assert is_tree(heads.tolist())
    greedy = arc.argmax(axis=0)
    if not is_tree(greedy.tolist()):
        assert score_of(arc, heads) == pytest.approx(brute_best(arc), abs=1e-12)


@given(st.integers(2, 9), st.integers(0, 2 ** 31))
def test_mst_single_root_always(n, seed):
    r = np.random.default_rng(seed)
    S = np.full((n + 1, n + 1), -np.inf)
    S[:, 1:] = r.normal(size=(n + 1, n)) * 3
    np.fill_diagonal(S, -np.inf)
    heads = max_spanning_tree(S)
    assert is_tree(heads[1:].tolist())


# ------------------------------------------------------------------ attachment scores

def test_uas_las_examples():
    g = [DepTree((2, 0, 2, 3), ("a", "b", "c", "d"))]
    assert uas_las(g, g) == (100.0, 100.0)
    assert uas_las([DepTree((2, 0, 2, 3), ("x", "x", "x", "x"))], g) == (100.0, 0.0)
    assert uas_las([DepTree((2, 0, 2, 1), ("a", "b", "x", "d"))], g) == (75.0, 50.0)
    with pytest.raises(ValueError):
        uas_las(g, g + g)


# ------------------------------------------------------------------ training sanity

def test_parse_output_is_always_a_tree(small_vocab, small_corpus):
    _, parser = build(small_vocab, seed=5)
    for t in parser.parse(small_corpus.dep_train + small_corpus.srl_train):
        assert is_tree(list(t.heads))


def test_parser_loss_falls_with_training():
    corpus = gen_synthetic("simple", seed=2, srl_train=1, srl_dev=0, dep_train=4)
    vocab = Vocabulary.build(corpus.dep_train)
    store, parser = build(vocab, seed=0)
    opt = Adam()
    first = None
    for _ in range(30):
        loss = parser.loss(corpus.dep_train)
        loss.backward()
        first = first if first is not None else float(loss.data)
        opt.step(store, 1e-2)
    assert float(parser.loss(corpus.dep_train).data) < 0.5 * first
