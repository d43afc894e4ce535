import math

import numpy as np
import pytest

from omner.embed import (EmbedError, SgnsConfig, SgnsParams, SubwordTable,
                         WordVectors, char_ngrams, load_word_vectors, lookup,
                         ngram_buckets, save_word_vectors, sgns_step,
                         train_subword_skipgram)

from oracles import finite_difference, max_relative_error


def test_load_word_vectors_ok(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("2 3\nfoo 1.0 2.0 3.0\nbar -1.0 0.5 0.25\n")
    wv = load_word_vectors(path)
    assert wv.dim == 3
    assert np.allclose(wv.matrix[wv.vocab["bar"]], [-1.0, 0.5, 0.25])


def test_load_word_vectors_row_count_mismatch(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("2 3\nfoo 1.0 2.0 3.0\n")
    with pytest.raises(EmbedError, match="row count mismatch"):
        load_word_vectors(path)


def test_load_word_vectors_wrong_width(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("1 3\nfoo 1.0 2.0 3.0 4.0\n")
    with pytest.raises(EmbedError, match=":2"):
        load_word_vectors(path)


def test_load_word_vectors_duplicate_token(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("2 2\nfoo 1 2\nfoo 3 4\n")
    with pytest.raises(EmbedError, match="duplicate"):
        load_word_vectors(path)


def test_save_load_roundtrip(tmp_path):
    wv = WordVectors({"a": 0, "b": 1}, np.array([[0.1, -0.2], [3.5, 4.25]]))
    path = tmp_path / "vec.txt"
    save_word_vectors(path, wv)
    back = load_word_vectors(path)
    assert back.vocab == wv.vocab
    assert np.array_equal(back.matrix, wv.matrix)


def test_char_ngrams_include_boundaries():
    grams = char_ngrams("ab", 3, 4)
    assert grams == ["<ab", "ab>", "<ab>"]


def test_sgns_zero_vectors_loss():
    params = SgnsParams(in_word=np.zeros((4, 3)), out=np.zeros((4, 3)))
    for n in (1, 3, 5):
        loss, _ = sgns_step(0, 1, [2] * n, params)
        assert loss == pytest.approx((1 + n) * math.log(2), rel=1e-15)


def test_sgns_index_out_of_range():
    params = SgnsParams(in_word=np.zeros((2, 3)), out=np.zeros((2, 3)))
    with pytest.raises(EmbedError):
        sgns_step(0, 5, [1], params)


def test_sgns_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    params = SgnsParams(in_word=rng.normal(size=(5, 4)) * 0.3,
                        out=rng.normal(size=(5, 4)) * 0.3,
                        in_subword=rng.normal(size=(3, 4)) * 0.3)
    center, context, negatives, sub = 0, 2, [3, 4], [0, 2]
    loss, grads = sgns_step(center, context, negatives, params, sub)

    def total():
        return sgns_step(center, context, negatives, params, sub)[0]

    fd = finite_difference(total, {"in": params.in_word, "out": params.out,
                                   "sub": params.in_subword})
    dense = {"in": np.zeros_like(params.in_word),
             "out": np.zeros_like(params.out),
             "sub": np.zeros_like(params.in_subword)}
    for (name, row), g in grads.items():
        dense[{"in_word": "in", "out": "out", "in_subword": "sub"}[name]][row] += g
    assert max_relative_error(dense["in"], fd["in"]) < 1e-5
    assert max_relative_error(dense["out"], fd["out"]) < 1e-5
    assert max_relative_error(dense["sub"], fd["sub"]) < 1e-5


def test_sgns_repeated_steps_decrease_loss():
    rng = np.random.default_rng(1)
    params = SgnsParams(in_word=rng.normal(size=(6, 5)) * 0.1,
                        out=rng.normal(size=(6, 5)) * 0.1)
    center, context, negatives = 0, 1, [2, 3]
    losses = []
    for _ in range(10):
        loss, grads = sgns_step(center, context, negatives, params)
        losses.append(loss)
        for (name, row), g in grads.items():
            getattr(params, name)[row] -= 0.1 * g
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_lookup_in_vocab_no_subwords():
    wv = WordVectors({"x": 0}, np.array([[1.0, 2.0]]))
    assert np.array_equal(lookup(wv, "x"), [1.0, 2.0])


def test_lookup_oov_no_subwords_is_zero_unk():
    wv = WordVectors({"x": 0}, np.array([[1.0, 2.0]]))
    assert np.array_equal(lookup(wv, "zzz"), [0.0, 0.0])


def test_lookup_oov_with_subwords_hand_computed():
    table = SubwordTable(np.array([[2.0, 0.0], [0.0, 4.0]]), 3, 3)
    wv = WordVectors({}, np.zeros((0, 2)), table)
    buckets = ngram_buckets("ab", 3, 3, 2)
    expected = np.mean([table.matrix[b] for b in buckets], axis=0)
    assert np.allclose(lookup(wv, "ab"), expected)


def test_lookup_in_vocab_with_subwords_averages_word_row():
    table = SubwordTable(np.array([[2.0, 0.0], [0.0, 4.0]]), 3, 3)
    wv = WordVectors({"ab": 0}, np.array([[6.0, 6.0]]), table)
    buckets = ngram_buckets("ab", 3, 3, 2)
    rows = [table.matrix[b] for b in buckets] + [wv.matrix[0]]
    assert np.allclose(lookup(wv, "ab"), np.mean(rows, axis=0))


def test_oov_sharing_all_ngrams_matches_subword_sum():
    # cosine between the OOV vector and the in-vocab token's subword average
    # is exactly 1 when the word row is excluded: the n-gram sums coincide
    rng = np.random.default_rng(2)
    table = SubwordTable(rng.normal(size=(2, 4)), 3, 3)
    wv_with_word = WordVectors({"abc": 0}, rng.normal(size=(1, 4)), table)
    wv_oov = WordVectors({}, np.zeros((0, 4)), table)
    oov_vec = lookup(wv_oov, "abc")
    buckets = ngram_buckets("abc", 3, 3, 2)
    subword_avg = np.mean([table.matrix[b] for b in buckets], axis=0)
    cos = oov_vec @ subword_avg / (np.linalg.norm(oov_vec) * np.linalg.norm(subword_avg))
    assert cos == pytest.approx(1.0, abs=1e-12)
    assert "abc" in wv_with_word  # word row would otherwise shift the average


def test_bucket_count_one_degenerate():
    cfg = SgnsConfig(dim=8, epochs=1, min_count=1, buckets=1, seed=0)
    sents = [["aa", "bb", "cc"]] * 5
    wv = train_subword_skipgram(sents, cfg)
    assert wv.subword.buckets == 1
    vec = lookup(wv, "totally-unseen")
    assert vec.shape == (8,) and np.all(np.isfinite(vec))


def test_trainer_deterministic_for_seed():
    sents = [["aa", "bb", "cc", "dd"], ["bb", "cc", "dd", "aa"]] * 10
    cfg = SgnsConfig(dim=6, epochs=2, min_count=1, buckets=16, seed=5)
    a = train_subword_skipgram(sents, cfg)
    b = train_subword_skipgram(sents, cfg)
    assert a.vocab == b.vocab
    assert np.array_equal(a.matrix, b.matrix)
    assert np.array_equal(a.subword.matrix, b.subword.matrix)


def test_empty_vocab_after_filtering():
    with pytest.raises(EmbedError, match="empty vocabulary"):
        train_subword_skipgram([["one"], ["two"]], SgnsConfig(min_count=5))


def test_topic_clusters_separate():
    rng = np.random.default_rng(3)
    lex_a = ["".join(rng.choice(list("abcdefg"), size=5)) for _ in range(12)]
    lex_b = ["".join(rng.choice(list("stuvwxyz"), size=5)) for _ in range(12)]
    sents = []
    for _ in range(50):
        sents.append(list(rng.choice(lex_a, size=6)))
        sents.append(list(rng.choice(lex_b, size=6)))
    cfg = SgnsConfig(dim=16, epochs=10, min_count=1, buckets=64, seed=0)
    wv = train_subword_skipgram(sents, cfg)

    def unit(t):
        v = lookup(wv, t)
        return v / np.linalg.norm(v)

    ua = [unit(t) for t in lex_a if t in wv.vocab]
    ub = [unit(t) for t in lex_b if t in wv.vocab]
    intra = np.mean([u @ v for i, u in enumerate(ua) for v in ua[i + 1:]] +
                    [u @ v for i, u in enumerate(ub) for v in ub[i + 1:]])
    inter = np.mean([u @ v for u in ua for v in ub])
    assert intra > inter


def test_no_subwords_reduces_to_plain_skipgram():
    # independent plain-SGNS reference consuming the identical sampling stream
    from omner import embed as em

    sents = [["aa", "bb", "cc", "dd", "ee"], ["cc", "dd", "ee", "aa", "bb"]] * 8
    cfg = SgnsConfig(dim=6, window=2, negatives=2, epochs=1, min_count=1,
                     buckets=4, seed=9, use_subwords=False)
    log: list[float] = []
    wv = train_subword_skipgram(sents, cfg, loss_log=log)
    assert wv.subword is None

    vocab = em._build_vocab(sents, cfg.min_count)
    rng = np.random.default_rng(cfg.seed)
    bound = 0.5 / cfg.dim
    in_w = rng.uniform(-bound, bound, (len(vocab.tokens), cfg.dim))
    out_w = np.zeros_like(in_w)
    table = em._negative_table(vocab.counts)
    total = vocab.counts.sum()
    keep = np.minimum(1.0, np.sqrt(cfg.subsample * total / vocab.counts)
                      + cfg.subsample * total / vocab.counts)
    enc = [[vocab.index[t] for t in s] for s in sents]
    n_visits = sum(len(s) for s in enc) * cfg.epochs
    visit = 0
    ref_loss = 0.0
    for sent in enc:
        kept = [w for w in sent if keep[w] >= 1.0 or rng.random() < keep[w]]
        for pos, center in enumerate(kept):
            lr = cfg.learning_rate * max(1e-4, 1.0 - visit / n_visits)
            visit += 1
            span = int(rng.integers(1, cfg.window + 1))
            for cpos in range(max(0, pos - span), min(len(kept), pos + span + 1)):
                if cpos == pos:
                    continue
                ctx = kept[cpos]
                negs = []
                while len(negs) < cfg.negatives:
                    cand = int(table[rng.integers(0, len(table))])
                    if cand != ctx:
                        negs.append(cand)
                v = in_w[center]
                dv = np.zeros(cfg.dim)
                s = 1.0 / (1.0 + np.exp(-(out_w[ctx] @ v)))
                ref_loss += -np.log(max(s, 1e-300))
                out_grad = {ctx: (s - 1.0) * v}
                dv += (s - 1.0) * out_w[ctx]
                for k in negs:
                    s = 1.0 / (1.0 + np.exp(-(out_w[k] @ v)))
                    ref_loss += -np.log(max(1.0 - s, 1e-300))
                    out_grad[k] = out_grad.get(k, 0.0) + s * v
                    dv += s * out_w[k]
                for k, g in out_grad.items():
                    out_w[k] -= lr * g
                in_w[center] -= lr * dv
    assert log[0] == pytest.approx(ref_loss, rel=1e-12)
    assert np.allclose(wv.matrix, in_w)
