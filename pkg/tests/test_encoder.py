import numpy as np
import pytest

from srlmtl.data import AnnotatedSentence, Vocabulary
from srlmtl.encoder import ConfigError, Encoder, EncoderConfig, fuse_layers
from srlmtl.nn import autodiff as ad
from srlmtl.nn.autodiff import ShapeError, Tensor
from srlmtl.nn.layers import CharCNN
from srlmtl.nn.optim import ParameterStore

from conftest import tiny_encoder


def make_encoder(vocab, cfg=None, extra_dim=0, seed=0):
    store = ParameterStore()
    enc = Encoder(store, "enc", vocab, cfg or tiny_encoder(), np.random.default_rng(seed), extra_dim=extra_dim)
    return store, enc


def sent(*toks):
    return AnnotatedSentence(list(toks))


def test_config_validation():
    with pytest.raises(ConfigError):
        EncoderConfig(layers=0)
    with pytest.raises(ConfigError):
        EncoderConfig(ext_enabled=True, ext_dim=0)
    assert EncoderConfig().input_dim() == 400


def test_char_cnn_single_char_permutation_and_identity(rng):
    store = ParameterStore()
    cnn = CharCNN(store, "c", 10, 4, (3, 4, 5), 6, rng)
    single = cnn(np.array([[3]]), np.array([1])).data
    assert single.shape == (1, 18) and np.all(np.isfinite(single))
    ab = cnn(np.array([[2, 3, 4], [4, 3, 2], [2, 3, 4]]), np.array([3, 3, 3])).data
    assert not np.allclose(ab[0], ab[1])
    np.testing.assert_array_equal(ab[0], ab[2])
    with pytest.raises(ValueError, match="empty token"):
        cnn(np.array([[0]]), np.array([0]))


def test_input_dimension_and_identity(small_vocab):
    cfg = tiny_encoder()
    _, enc = make_encoder(small_vocab, cfg)
    s = sent("wo", "chi", "wo")
    x, mask = enc.build_inputs([s])
    assert x.shape[-1] == cfg.char_channels * len(cfg.char_windows) + cfg.word_dim
    np.testing.assert_array_equal(x.data[0, 0], x.data[0, 2])
    np.testing.assert_array_equal(enc.build_input(1, s).data, x.data[0, 0])


def test_ext_required_when_enabled(small_vocab):
    _, enc = make_encoder(small_vocab, tiny_encoder(ext_enabled=True, ext_k=2, ext_dim=3))
    with pytest.raises(ConfigError):
        enc.build_inputs([sent("a", "b")])
    s = sent("a", "b")
    s.ext_layers = np.ones((2, 2, 3))
    x, _ = enc.build_inputs([s])
    assert x.shape[-1] == tiny_encoder().input_dim() + 3


def test_ext_disabled_ignores_attached_layers(small_vocab):
    _, enc = make_encoder(small_vocab)
    a, b = sent("a", "b"), sent("a", "b")
    b.ext_layers = np.full((2, 4, 5), 9.0)
    np.testing.assert_array_equal(enc.build_inputs([a])[0].data, enc.build_inputs([b])[0].data)


def test_single_token_sentence_and_empty_error(small_vocab):
    _, enc = make_encoder(small_vocab)
    out = enc([sent("x")])
    assert len(out.layers) == 2 and out.top.shape == (1, 1, 8)
    with pytest.raises(ValueError):
        enc([])


def test_context_sensitivity(small_vocab):
    _, enc = make_encoder(small_vocab)
    words = [w for w in small_vocab.words if not w.startswith("<")]
    a = enc([sent(words[0], words[1], words[2], words[3])]).top.data[0, 0]
    b = enc([sent(words[0], words[1], words[2], words[4])]).top.data[0, 0]
    assert not np.allclose(a, b)


def test_batching_does_not_change_outputs(small_vocab):
    _, enc = make_encoder(small_vocab)
    short, long = sent("a", "b"), sent("c", "d", "e", "f", "g")
    alone = enc([short]).layers
    batched = enc([long, short]).layers
    for la, lb in zip(alone, batched):
        np.testing.assert_allclose(la.data[0], lb.data[1, :2], atol=1e-12)
        assert np.all(lb.data[1, 2:] == 0)


def test_mirror_symmetry(small_vocab):
    # one layer, no projection: swapping direction parameters and reversing the input mirrors the output
    cfg = EncoderConfig(word_dim=4, char_dim=3, char_windows=(1,), char_channels=4, layers=1, hidden=4)
    _, enc = make_encoder(small_vocab, cfg)
    layer = enc.bilstm.layers[0]
    x = Tensor(np.random.default_rng(1).normal(size=(1, 3, 8)))
    mask = np.ones((1, 3), dtype=bool)
    out = layer.bilstm(x, mask).data[0]
    for name in ("W", "U", "b"):
        f, b = getattr(layer.fwd, name), getattr(layer.bwd, name)
        f.data, b.data = b.data.copy(), f.data.copy()
    rev = layer.bilstm(Tensor(x.data[:, ::-1].copy()), mask).data[0][::-1]
    H = 4
    np.testing.assert_allclose(out[:, :H], rev[:, H:], atol=1e-12)
    np.testing.assert_allclose(out[:, H:], rev[:, :H], atol=1e-12)


def test_fusion_examples():
    rng = np.random.default_rng(0)
    stack = rng.normal(size=(3, 4, 5))
    np.testing.assert_allclose(fuse_layers(Tensor(stack), Tensor(np.zeros(4))).data, stack.mean(axis=1), atol=1e-12)
    one = rng.normal(size=(3, 1, 5))
    np.testing.assert_array_equal(fuse_layers(Tensor(one), Tensor(np.array([7.3]))).data, one[:, 0])
    logits = np.zeros(4)
    logits[2] = 50.0
    np.testing.assert_allclose(fuse_layers(Tensor(stack), Tensor(logits)).data, stack[:, 2], atol=1e-18 + 1e-12)
    with pytest.raises(ShapeError):
        fuse_layers(Tensor(stack), Tensor(np.zeros(3)))


def test_gradients_reach_chars_words_and_fusion(small_vocab):
    cfg = tiny_encoder(ext_enabled=True, ext_k=2, ext_dim=3)
    store, enc = make_encoder(small_vocab, cfg)
    s = sent("wo", "chi")
    s.ext_layers = np.random.default_rng(0).normal(size=(2, 2, 3))
    out = enc([s]).top
    ad.sum(ad.mul(out, out)).backward()
    for name in ("enc.char.emb", "enc.word_emb", "enc.ext_logits", "enc.char.conv1.W"):
        assert np.any(store[name].grad != 0), name


def test_frozen_words_stay_out_of_registry(small_vocab):
    store, enc = make_encoder(small_vocab, tiny_encoder(freeze_words=True))
    assert "enc.word_emb" not in store and "enc.word_emb" in store.frozen
