"""Word vectors: text-format loading, subword skip-gram training with negative
sampling (FastText-style hashed char n-grams), and total lookup with OOV
handling.

Training is single-threaded by design: determinism for a fixed seed is part
of the contract, so hogwild-style parallel updates are off the table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EmbedError(ValueError):
    pass


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


def char_ngrams(norm: str, n_min: int, n_max: int) -> list[str]:
    """Character n-grams of "<"+norm+">", boundary markers included."""
    word = f"<{norm}>"
    grams = []
    for n in range(n_min, n_max + 1):
        for i in range(len(word) - n + 1):
            grams.append(word[i:i + n])
    return grams


def ngram_buckets(norm: str, n_min: int, n_max: int, buckets: int) -> list[int]:
    return [fnv1a_64(g.encode("utf-8")) % buckets
            for g in char_ngrams(norm, n_min, n_max)]


@dataclass
class SubwordTable:
    matrix: np.ndarray  # (B, d)
    n_min: int
    n_max: int

    def __post_init__(self):
        if self.n_min > self.n_max:
            raise EmbedError(f"n_min {self.n_min} > n_max {self.n_max}")
        if self.matrix.shape[0] < 1:
            raise EmbedError("bucket count must be >= 1")

    @property
    def buckets(self) -> int:
        return self.matrix.shape[0]


@dataclass
class WordVectors:
    vocab: dict[str, int]
    matrix: np.ndarray  # (|V|, d)
    subword: SubwordTable | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self.vocab


def lookup(wv: WordVectors, token_norm: str) -> np.ndarray:
    """Total lookup: word row averaged with n-gram rows when available,
    n-gram average for OOV tokens, zero UNK row as the last resort."""
    row = wv.vocab.get(token_norm)
    if wv.subword is None:
        if row is None:
            return np.zeros(wv.dim)
        return wv.matrix[row].copy()
    sw = wv.subword
    idxs = ngram_buckets(token_norm, sw.n_min, sw.n_max, sw.buckets)
    parts = [sw.matrix[i] for i in idxs]
    if row is not None:
        parts.append(wv.matrix[row])
    if not parts:
        return np.zeros(wv.dim)
    return np.mean(parts, axis=0)


def load_word_vectors(path) -> WordVectors:
    """Read the standard text format: header "<count> <dim>", then one
    token and its values per line."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbedError(f"{path}:1: header must be '<count> <dim>'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise EmbedError(f"{path}:1: non-integer header") from None
        vocab: dict[str, int] = {}
        matrix = np.zeros((count, dim))
        row = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise EmbedError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            token = parts[0]
            if token in vocab:
                raise EmbedError(f"{path}:{lineno}: duplicate token {token!r}")
            if row >= count:
                raise EmbedError(f"{path}:{lineno}: more rows than header count {count}")
            try:
                matrix[row] = [float(v) for v in parts[1:]]
            except ValueError:
                raise EmbedError(f"{path}:{lineno}: non-numeric value") from None
            vocab[token] = row
            row += 1
        if row != count:
            raise EmbedError(f"{path}: row count mismatch: header {count}, found {row}")
    if not np.all(np.isfinite(matrix)):
        raise EmbedError(f"{path}: non-finite vector values")
    return WordVectors(vocab, matrix)


def save_word_vectors(path, wv: WordVectors) -> None:
    tokens = sorted(wv.vocab, key=wv.vocab.get)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(tokens)} {wv.dim}\n")
        for tok in tokens:
            vals = " ".join(repr(float(v)) for v in wv.matrix[wv.vocab[tok]])
            fh.write(f"{tok} {vals}\n")


@dataclass
class SgnsConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_count: int = 2
    subsample: float = 1e-4
    n_min: int = 3
    n_max: int = 6
    buckets: int = 1 << 21
    seed: int = 0
    use_subwords: bool = True

    def __post_init__(self):
        if min(self.dim, self.window, self.negatives, self.epochs, self.min_count) < 1:
            raise EmbedError("counts must be positive")
        if self.subsample <= 0 or self.learning_rate <= 0:
            raise EmbedError("subsample threshold and learning rate must be > 0")
        if self.use_subwords and self.buckets < 1:
            raise EmbedError("bucket count must be >= 1")


@dataclass
class SgnsParams:
    """Input/output matrices for the skip-gram objective.

    in_word (|V|, d) and optional in_subword (B, d) compose the center
    vector; out (|V|, d) holds context vectors.
    """
    in_word: np.ndarray
    out: np.ndarray
    in_subword: np.ndarray | None = None


def compose_input(params: SgnsParams, word_row: int, subword_rows) -> np.ndarray:
    rows = [params.in_word[word_row]]
    if params.in_subword is not None:
        rows.extend(params.in_subword[i] for i in subword_rows)
    return np.mean(rows, axis=0)


def sgns_step(center: int, context: int, negatives, params: SgnsParams,
              subword_rows=()) -> tuple[float, dict]:
    """One skip-gram-with-negative-sampling step.

    Returns (loss, sparse gradients keyed by ("in_word"|"in_subword"|"out", row)).
    loss = -log sigmoid(u_ctx . v) - sum_k log sigmoid(-u_k . v)
    """
    n_vocab = params.in_word.shape[0]
    for idx in (center, context, *negatives):
        if not (0 <= idx < n_vocab):
            raise EmbedError(f"index {idx} out of range for vocab of {n_vocab}")
    v = compose_input(params, center, subword_rows)
    n_rows = 1 + len(subword_rows) if params.in_subword is not None else 1

    grads: dict[tuple[str, int], np.ndarray] = {}
    dv = np.zeros_like(v)
    s = _sigmoid(params.out[context] @ v)
    loss = -_log(s)
    g = s - 1.0
    _accum(grads, ("out", context), g * v)
    dv += g * params.out[context]
    for k in negatives:
        s = _sigmoid(params.out[k] @ v)
        loss += -_log(1.0 - s)
        _accum(grads, ("out", k), s * v)
        dv += s * params.out[k]

    _accum(grads, ("in_word", center), dv / n_rows)
    if params.in_subword is not None:
        for r in subword_rows:
            _accum(grads, ("in_subword", r), dv / n_rows)
    return float(loss), grads


def _accum(grads, key, value):
    if key in grads:
        grads[key] = grads[key] + value
    else:
        grads[key] = value


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _log(x):
    return np.log(np.maximum(x, 1e-300))


@dataclass
class _Vocab:
    tokens: list[str]
    index: dict[str, int]
    counts: np.ndarray


def _build_vocab(sentences, min_count: int) -> _Vocab:
    counts: dict[str, int] = {}
    for sent in sentences:
        for tok in sent:
            counts[tok] = counts.get(tok, 0) + 1
    kept = [(t, c) for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    tokens = [t for t, _ in kept]
    if not tokens:
        raise EmbedError(f"empty vocabulary after min_count={min_count} filtering")
    return _Vocab(tokens, {t: i for i, t in enumerate(tokens)},
                  np.array([c for _, c in kept], dtype=np.float64))


def _negative_table(counts: np.ndarray, size: int = 1 << 17) -> np.ndarray:
    weights = counts ** 0.75
    cdf = np.cumsum(weights) / weights.sum()
    return np.searchsorted(cdf, (np.arange(size) + 0.5) / size).astype(np.intp)


def train_subword_skipgram(sentences: list[list[str]], cfg: SgnsConfig,
                           loss_log: list[float] | None = None) -> WordVectors:
    """Train word vectors on tokenized sentences (lists of token norms).

    Deterministic for a fixed seed; linear learning-rate decay over the
    total number of center-word visits.
    """
    vocab = _build_vocab(sentences, cfg.min_count)
    rng = np.random.default_rng(cfg.seed)
    n_vocab = len(vocab.tokens)

    bound = 0.5 / cfg.dim
    params = SgnsParams(
        in_word=rng.uniform(-bound, bound, (n_vocab, cfg.dim)),
        out=np.zeros((n_vocab, cfg.dim)),
        in_subword=(rng.uniform(-bound, bound, (cfg.buckets, cfg.dim))
                    if cfg.use_subwords else None),
    )
    subword_rows = {vocab.index[t]: (ngram_buckets(t, cfg.n_min, cfg.n_max, cfg.buckets)
                                     if cfg.use_subwords else [])
                    for t in vocab.tokens}

    neg_table = _negative_table(vocab.counts)
    total = vocab.counts.sum()
    keep_prob = np.minimum(1.0, np.sqrt(cfg.subsample * total / vocab.counts)
                           + cfg.subsample * total / vocab.counts)

    encoded = [[vocab.index[t] for t in sent if t in vocab.index] for sent in sentences]
    encoded = [s for s in encoded if s]
    n_visits = sum(len(s) for s in encoded) * cfg.epochs
    visit = 0

    for _ in range(cfg.epochs):
        epoch_loss = 0.0
        for sent in encoded:
            kept = [w for w in sent if keep_prob[w] >= 1.0 or rng.random() < keep_prob[w]]
            for pos, center in enumerate(kept):
                lr = cfg.learning_rate * max(1e-4, 1.0 - visit / max(1, n_visits))
                visit += 1
                span = int(rng.integers(1, cfg.window + 1))
                lo = max(0, pos - span)
                hi = min(len(kept), pos + span + 1)
                for cpos in range(lo, hi):
                    if cpos == pos:
                        continue
                    context = kept[cpos]
                    negatives = []
                    while len(negatives) < cfg.negatives:
                        cand = int(neg_table[rng.integers(0, len(neg_table))])
                        if cand != context:
                            negatives.append(cand)
                    loss, grads = sgns_step(center, context, negatives, params,
                                            subword_rows[center])
                    epoch_loss += loss
                    for (name, row), g in grads.items():
                        getattr(params, name)[row] -= lr * g
        if loss_log is not None:
            loss_log.append(epoch_loss)

    wv = WordVectors(dict(vocab.index), params.in_word)
    if cfg.use_subwords:
        wv.subword = SubwordTable(params.in_subword, cfg.n_min, cfg.n_max)
    return wv
