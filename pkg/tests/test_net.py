import numpy as np
import pytest

from omner.net import (CharVocab, NetGrads, NetParams, PAD_INDEX, UNK_INDEX,
                       bilstm_backward, bilstm_forward, char_cnn_backward,
                       char_cnn_encode, dropout_mask, project_backward,
                       project_emissions)

from oracles import finite_difference, max_relative_error


def small_params(rng, word_dim=4, char_dim=2, window=2, filters=3, hidden=3,
                 char_count=6, num_tags=4):
    return NetParams.init(rng, char_count=char_count, word_dim=word_dim,
                          char_dim=char_dim, conv_window=window,
                          conv_filters=filters, hidden_dim=hidden,
                          num_tags=num_tags)


def test_char_vocab_reserved_indices():
    vocab = CharVocab.build(["ab", "ba"])
    assert len(vocab) == 4
    idx = vocab.encode("abz")
    assert idx[2] == UNK_INDEX
    assert PAD_INDEX == 0 and UNK_INDEX == 1


def test_char_cnn_zero_filters_give_bias():
    rng = np.random.default_rng(0)
    p = small_params(rng, char_count=10)
    p.conv_w[:] = 0.0
    p.conv_b[:] = [1.0, -2.0, 0.5]
    for token in ("a", "abc", "abcdef"):
        out, _ = char_cnn_encode(CharVocab.build(["abcdef"]).encode(token), p)
        assert np.allclose(out, p.conv_b)


def test_char_cnn_max_over_time_hand_case():
    # f=1, w=1, d_c=1, char embeddings [2,-3,5] -> max is 5
    p = NetParams.init(np.random.default_rng(0), char_count=5, word_dim=1,
                       char_dim=1, conv_window=1, conv_filters=1, hidden_dim=1,
                       num_tags=2)
    p.char_emb[:, 0] = [0.0, 0.0, 2.0, -3.0, 5.0]
    p.conv_w[:] = 1.0
    p.conv_b[:] = 0.0
    out, _ = char_cnn_encode(np.array([2, 3, 4]), p)
    assert np.allclose(out, [5.0])


def test_char_cnn_output_width_fixed():
    rng = np.random.default_rng(1)
    p = small_params(rng, filters=4, char_count=12)
    vocab = CharVocab.build(["abcdefgh"])
    for token in ("a", "ab", "abcdefgh"):
        out, _ = char_cnn_encode(vocab.encode(token), p)
        assert out.shape == (4,)


def test_char_cnn_gradients():
    rng = np.random.default_rng(2)
    p = small_params(rng)
    idx = np.array([2, 3, 4, 5])
    target = rng.normal(size=p.conv_filters)

    def loss():
        out, _ = char_cnn_encode(idx, p)
        return float(np.sum(out * target))

    grads = NetGrads.zeros_like(p)
    _, cache = char_cnn_encode(idx, p)
    char_cnn_backward(target, cache, p, grads)
    fd = finite_difference(loss, {"emb": p.char_emb, "w": p.conv_w, "b": p.conv_b})
    assert max_relative_error(grads.char_emb, fd["emb"]) < 1e-5
    assert max_relative_error(grads.conv_w, fd["w"]) < 1e-5
    assert max_relative_error(grads.conv_b, fd["b"]) < 1e-5


def test_bilstm_zero_params_zero_output():
    rng = np.random.default_rng(3)
    p = small_params(rng)
    for blk in (p.lstm_fwd, p.lstm_bwd):
        blk.Wx[:] = 0.0
        blk.Wh[:] = 0.0
        blk.b[:] = 0.0
    xs = rng.normal(size=(5, p.lstm_fwd.Wx.shape[1]))
    hidden, _ = bilstm_forward(xs, p)
    assert np.allclose(hidden, 0.0)


def test_bilstm_output_shape():
    rng = np.random.default_rng(4)
    p = small_params(rng, hidden=3)
    for L in (1, 2, 7):
        xs = rng.normal(size=(L, p.lstm_fwd.Wx.shape[1]))
        hidden, _ = bilstm_forward(xs, p)
        assert hidden.shape == (L, 6)


def test_bilstm_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    p = small_params(rng, hidden=3)
    L = 4
    xs = rng.normal(size=(L, p.lstm_fwd.Wx.shape[1]))
    target = rng.normal(size=(L, 2 * p.hidden_dim))

    def loss():
        hidden, _ = bilstm_forward(xs, p)
        return float(np.sum(hidden * target))

    hidden, cache = bilstm_forward(xs, p)
    grads = NetGrads.zeros_like(p)
    dx = bilstm_backward(target, xs, cache, p, grads)

    arrays = {"x": xs,
              "fWx": p.lstm_fwd.Wx, "fWh": p.lstm_fwd.Wh, "fb": p.lstm_fwd.b,
              "bWx": p.lstm_bwd.Wx, "bWh": p.lstm_bwd.Wh, "bb": p.lstm_bwd.b}
    fd = finite_difference(loss, arrays, sample=40)
    assert max_relative_error(dx, fd["x"]) < 1e-5
    assert max_relative_error(grads.lstm_fwd[0], fd["fWx"]) < 1e-5
    assert max_relative_error(grads.lstm_fwd[1], fd["fWh"]) < 1e-5
    assert max_relative_error(grads.lstm_fwd[2], fd["fb"]) < 1e-5
    assert max_relative_error(grads.lstm_bwd[0], fd["bWx"]) < 1e-5
    assert max_relative_error(grads.lstm_bwd[1], fd["bWh"]) < 1e-5
    assert max_relative_error(grads.lstm_bwd[2], fd["bb"]) < 1e-5


def test_projection_zero_weights_give_bias():
    rng = np.random.default_rng(6)
    p = small_params(rng, num_tags=4)
    p.W_out[:] = 0.0
    p.b_out[:] = [1, 2, 3, 4]
    hidden = rng.normal(size=(5, 2 * p.hidden_dim))
    em = project_emissions(hidden, p)
    assert np.allclose(em, np.tile(p.b_out, (5, 1)))


def test_projection_hand_computed():
    rng = np.random.default_rng(7)
    p = NetParams.init(rng, char_count=4, word_dim=1, char_dim=1, conv_window=1,
                       conv_filters=1, hidden_dim=1, num_tags=1)
    p.W_out[:] = [[2.0, -1.0]]
    p.b_out[:] = [0.5]
    hidden = np.array([[1.0, 3.0], [0.0, -2.0]])
    em = project_emissions(hidden, p)
    assert np.allclose(em, [[2 * 1 - 3 + 0.5], [2.0 + 0.5]])


def test_projection_gradients():
    rng = np.random.default_rng(8)
    p = small_params(rng)
    hidden = rng.normal(size=(4, 2 * p.hidden_dim))
    target = rng.normal(size=(4, p.b_out.shape[0]))

    def loss():
        return float(np.sum(project_emissions(hidden, p) * target))

    grads = NetGrads.zeros_like(p)
    d_hidden = project_backward(target, hidden, p, grads)
    fd = finite_difference(loss, {"h": hidden, "W": p.W_out, "b": p.b_out})
    assert max_relative_error(d_hidden, fd["h"]) < 1e-5
    assert max_relative_error(grads.W_out, fd["W"]) < 1e-5
    assert max_relative_error(grads.b_out, fd["b"]) < 1e-5


def test_no_nan_for_bounded_inputs():
    rng = np.random.default_rng(9)
    p = small_params(rng, hidden=4)
    xs = rng.uniform(-10, 10, size=(6, p.lstm_fwd.Wx.shape[1]))
    hidden, _ = bilstm_forward(xs, p)
    em = project_emissions(hidden, p)
    assert np.all(np.isfinite(hidden)) and np.all(np.isfinite(em))


def test_dropout_mask_deterministic_with_seed():
    a = dropout_mask(np.random.default_rng(42), (5, 5), 0.5)
    b = dropout_mask(np.random.default_rng(42), (5, 5), 0.5)
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {0.0, 2.0}
    assert np.array_equal(dropout_mask(np.random.default_rng(0), (3,), 0.0),
                          np.ones(3))
