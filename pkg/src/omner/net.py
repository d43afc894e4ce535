"""Dense layers with exact backpropagation: char-CNN with max-over-time
pooling, bidirectional LSTM, and the linear projection to tag emission scores.

All arithmetic is float64. Each forward returns a cache consumed by the
matching backward; caches are per-call, so shared parameters stay read-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import lstm_backward, lstm_forward
from .schema import NUM_TAGS

PAD_INDEX = 0
UNK_INDEX = 1


class CharVocab:
    """Character inventory built from training tokens; PAD=0, UNK=1 reserved."""

    def __init__(self, chars: list[str] | None = None):
        self.index = {}
        for ch in chars or []:
            if ch not in self.index:
                self.index[ch] = len(self.index) + 2

    @classmethod
    def build(cls, token_norms) -> "CharVocab":
        seen = []
        known = set()
        for norm in token_norms:
            for ch in norm:
                if ch not in known:
                    known.add(ch)
                    seen.append(ch)
        return cls(sorted(seen))

    def __len__(self) -> int:
        return len(self.index) + 2

    def encode(self, token_norm: str) -> np.ndarray:
        return np.array([self.index.get(ch, UNK_INDEX) for ch in token_norm],
                        dtype=np.intp)

    def to_dict(self) -> dict:
        return {"chars": sorted(self.index, key=self.index.get)}

    @classmethod
    def from_dict(cls, d: dict) -> "CharVocab":
        return cls(d["chars"])


def glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class LstmBlock:
    Wx: np.ndarray  # (4h, D)
    Wh: np.ndarray  # (4h, h)
    b: np.ndarray   # (4h,), gate order i,f,g,o; forget bias initialized to 1

    @classmethod
    def init(cls, rng, input_dim: int, hidden_dim: int) -> "LstmBlock":
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim:2 * hidden_dim] = 1.0
        return cls(
            Wx=glorot(rng, (4 * hidden_dim, input_dim), input_dim, hidden_dim),
            Wh=glorot(rng, (4 * hidden_dim, hidden_dim), hidden_dim, hidden_dim),
            b=b,
        )

    @property
    def hidden_dim(self) -> int:
        return self.Wh.shape[1]


@dataclass
class NetParams:
    char_emb: np.ndarray   # (C, d_c)
    conv_w: np.ndarray     # (f, w * d_c)
    conv_b: np.ndarray     # (f,)
    lstm_fwd: LstmBlock
    lstm_bwd: LstmBlock
    W_out: np.ndarray      # (K, 2h)
    b_out: np.ndarray      # (K,)

    @classmethod
    def init(cls, rng: np.random.Generator, char_count: int, word_dim: int,
             char_dim: int = 30, conv_window: int = 3, conv_filters: int = 30,
             hidden_dim: int = 100, num_tags: int = NUM_TAGS) -> "NetParams":
        in_dim = word_dim + conv_filters
        return cls(
            char_emb=glorot(rng, (char_count, char_dim), char_count, char_dim),
            conv_w=glorot(rng, (conv_filters, conv_window * char_dim),
                          conv_window * char_dim, conv_filters),
            conv_b=np.zeros(conv_filters),
            lstm_fwd=LstmBlock.init(rng, in_dim, hidden_dim),
            lstm_bwd=LstmBlock.init(rng, in_dim, hidden_dim),
            W_out=glorot(rng, (num_tags, 2 * hidden_dim), 2 * hidden_dim, num_tags),
            b_out=np.zeros(num_tags),
        )

    @property
    def conv_window(self) -> int:
        return self.conv_w.shape[1] // self.char_emb.shape[1]

    @property
    def conv_filters(self) -> int:
        return self.conv_w.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.lstm_fwd.hidden_dim


@dataclass
class NetGrads:
    char_emb: np.ndarray
    conv_w: np.ndarray
    conv_b: np.ndarray
    lstm_fwd: tuple[np.ndarray, np.ndarray, np.ndarray]  # dWx, dWh, db
    lstm_bwd: tuple[np.ndarray, np.ndarray, np.ndarray]
    W_out: np.ndarray
    b_out: np.ndarray

    @classmethod
    def zeros_like(cls, p: NetParams) -> "NetGrads":
        z = np.zeros_like
        return cls(z(p.char_emb), z(p.conv_w), z(p.conv_b),
                   (z(p.lstm_fwd.Wx), z(p.lstm_fwd.Wh), z(p.lstm_fwd.b)),
                   (z(p.lstm_bwd.Wx), z(p.lstm_bwd.Wh), z(p.lstm_bwd.b)),
                   z(p.W_out), z(p.b_out))


def char_cnn_encode(char_indices: np.ndarray, params: NetParams):
    """Max-over-time convolution over one token's characters.

    Returns the f-dimensional feature vector and the backward cache.
    Tokens shorter than the window are right-padded with PAD.
    """
    w = params.conv_window
    d_c = params.char_emb.shape[1]
    idx = np.asarray(char_indices, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("token with no characters")
    if idx.size < w:
        idx = np.concatenate([idx, np.full(w - idx.size, PAD_INDEX, dtype=np.intp)])
    emb = params.char_emb[idx]                       # (Lc, d_c)
    n_pos = idx.size - w + 1
    windows = np.empty((n_pos, w * d_c))
    for p in range(n_pos):
        windows[p] = emb[p:p + w].reshape(-1)
    scores = windows @ params.conv_w.T               # (P, f)
    best = np.argmax(scores, axis=0)                 # first max per filter
    out = scores[best, np.arange(params.conv_filters)] + params.conv_b
    return out, (idx, windows, best)


def char_cnn_backward(d_out: np.ndarray, cache, params: NetParams, grads: NetGrads):
    """Accumulate char-CNN gradients into `grads` for one token."""
    idx, windows, best = cache
    w = params.conv_window
    d_c = params.char_emb.shape[1]
    grads.conv_b += d_out
    d_windows = np.zeros_like(windows)
    for j in range(params.conv_filters):
        p = best[j]
        grads.conv_w[j] += d_out[j] * windows[p]
        d_windows[p] += d_out[j] * params.conv_w[j]
    d_emb = np.zeros((idx.size, d_c))
    for p in range(windows.shape[0]):
        d_emb[p:p + w] += d_windows[p].reshape(w, d_c)
    np.add.at(grads.char_emb, idx, d_emb)


def bilstm_forward(xs: np.ndarray, params: NetParams):
    """Concatenated forward/backward LSTM states, shape (L, 2h)."""
    h_f, cache_f = lstm_forward(xs, params.lstm_fwd.Wx, params.lstm_fwd.Wh,
                                params.lstm_fwd.b)
    xs_rev = xs[::-1].copy()
    h_b_rev, cache_b = lstm_forward(xs_rev, params.lstm_bwd.Wx, params.lstm_bwd.Wh,
                                    params.lstm_bwd.b)
    hidden = np.concatenate([h_f, h_b_rev[::-1]], axis=1)
    return hidden, (h_f, cache_f, xs_rev, h_b_rev, cache_b)


def bilstm_backward(d_hidden: np.ndarray, xs: np.ndarray, cache,
                    params: NetParams, grads: NetGrads) -> np.ndarray:
    """Backprop to the inputs; accumulates both LSTM blocks' gradients."""
    h_f, cache_f, xs_rev, h_b_rev, cache_b = cache
    h = params.hidden_dim
    dh_f = np.ascontiguousarray(d_hidden[:, :h])
    dh_b_rev = np.ascontiguousarray(d_hidden[::-1, h:])
    dx_f, dWx, dWh, db = lstm_backward(dh_f, xs, params.lstm_fwd.Wx,
                                       params.lstm_fwd.Wh, h_f, cache_f)
    gf = grads.lstm_fwd
    gf[0][...] += dWx
    gf[1][...] += dWh
    gf[2][...] += db
    dx_b_rev, dWx, dWh, db = lstm_backward(dh_b_rev, xs_rev, params.lstm_bwd.Wx,
                                           params.lstm_bwd.Wh, h_b_rev, cache_b)
    gb = grads.lstm_bwd
    gb[0][...] += dWx
    gb[1][...] += dWh
    gb[2][...] += db
    return dx_f + dx_b_rev[::-1]


def project_emissions(hidden: np.ndarray, params: NetParams) -> np.ndarray:
    return hidden @ params.W_out.T + params.b_out


def project_backward(d_emissions: np.ndarray, hidden: np.ndarray,
                     params: NetParams, grads: NetGrads) -> np.ndarray:
    grads.W_out += d_emissions.T @ hidden
    grads.b_out += d_emissions.sum(axis=0)
    return d_emissions @ params.W_out


def dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    """Inverted dropout mask; all-ones when rate is 0."""
    if rate <= 0.0:
        return np.ones(shape)
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(np.float64) / keep
