"""Acceptance gate: every test here checks one headline guarantee at its
stated tolerance and prints a single pass line with the measured numbers."""

import math
import time

import numpy as np
import pytest

from omner import crf as crf_mod
from omner.crf import CrfParams, DecodeOptions
from omner.embed import (SgnsConfig, SgnsParams, WordVectors, sgns_step,
                         train_subword_skipgram)
from omner.metrics import entity_f1
from omner.net import CharVocab
from omner.pipeline import (TrainConfig, batch_loss, init_model, load_checkpoint,
                            predict_sentence, save_checkpoint, sentence_emissions,
                            split_dataset, train_ner, zero_grads)
from omner.schema import (EntityType, Span, TaggedSentence, iob_to_spans,
                          is_well_formed, spans_to_iob, TAGS)

from oracles import (brute_log_partition, brute_marginals, brute_viterbi,
                     finite_difference, max_relative_error)
from synth import char_cue_corpus, lexicon_corpus
from test_cli import run_e2e


def ok(name, detail):
    print(f"[PASS] {name}: {detail}")


def test_acceptance_crf_oracle():
    rng = np.random.default_rng(0)
    t0 = time.monotonic()
    count = 0
    worst = 0.0
    for K in (2, 3, 4):
        for L in range(1, 7):
            for _ in range(60):
                em = rng.normal(size=(L, K)) * 2.0
                params = CrfParams(rng.normal(size=(K, K)), rng.normal(size=K),
                                   rng.normal(size=K))
                T, s, e = params.transitions, params.start, params.stop

                lz = crf_mod.log_partition(em, params)
                lz_ref = brute_log_partition(em, T, s, e)
                rel = abs(lz - lz_ref) / max(abs(lz_ref), 1e-300)
                worst = max(worst, rel)
                assert rel < 1e-10

                marg = crf_mod.marginals(em, params)
                assert np.max(np.abs(marg - brute_marginals(em, T, s, e))) < 1e-10

                path, score = crf_mod.viterbi_decode(em, params,
                                                     DecodeOptions(constrained=False))
                ref_path, ref_score = brute_viterbi(em, T, s, e)
                assert path == ref_path
                assert score == pytest.approx(ref_score, rel=1e-10)
                count += 1
    elapsed = time.monotonic() - t0
    assert count >= 1000
    assert elapsed < 30.0
    ok("crf-oracle", f"{count} instances, worst logZ rel err {worst:.2e}, {elapsed:.1f}s")


def test_acceptance_crf_viterbi_ties():
    # degenerate scores force ties; the decode must still match the oracle
    rng = np.random.default_rng(1)
    for _ in range(200):
        K, L = int(rng.integers(2, 5)), int(rng.integers(1, 5))
        em = rng.integers(0, 2, size=(L, K)).astype(float)
        params = CrfParams(np.zeros((K, K)), np.zeros(K), np.zeros(K))
        path, score = crf_mod.viterbi_decode(em, params, DecodeOptions(constrained=False))
        ref_path, ref_score = brute_viterbi(em, params.transitions, params.start,
                                            params.stop)
        assert path == ref_path
        assert score == ref_score
    ok("crf-oracle-ties", "200 degenerate instances, tie-break exact")


def _random_instance(rng, use_char):
    words = ["aa", "bb", "cc", "dd", "ee"]
    cfg = TrainConfig(char_dim=3, conv_window=2, conv_filters=3, hidden_dim=4,
                      char_cnn=use_char, seed=int(rng.integers(0, 1 << 30)))
    wv = WordVectors({w: i for i, w in enumerate(words)},
                     rng.normal(size=(len(words), 5)) * 0.4)
    model = init_model(cfg, wv, CharVocab.build(words + ["zz"]), rng)
    model.crf.transitions[:] = rng.normal(size=(9, 9)) * 0.2
    model.crf.start[:] = rng.normal(size=9) * 0.2
    model.crf.stop[:] = rng.normal(size=9) * 0.2
    L = int(rng.integers(1, 6))
    norms = [words[int(rng.integers(0, len(words)))] for _ in range(L)]
    if L > 1 and rng.random() < 0.5:
        norms[-1] = "zz"  # out-of-vocabulary token
    tags = [int(rng.integers(0, 9)) for _ in range(L)]
    sent = TaggedSentence(norms, [TAGS[t] for t in tags], "g")
    return model, sent


def test_acceptance_gradient_suite():
    from omner.pipeline import sentence_loss_and_grads
    from omner.schema import tags_to_indices
    rng = np.random.default_rng(7)
    t0 = time.monotonic()
    worst = 0.0
    for i in range(20):
        model, sent = _random_instance(rng, use_char=(i % 2 == 0))
        params = model.trainable()
        grads = zero_grads(model)
        idx = tags_to_indices(sent.tags)
        sentence_loss_and_grads(model, sent.norms, idx, grads)

        def loss_fn():
            g = zero_grads(model)
            return sentence_loss_and_grads(model, sent.norms, idx, g)

        numeric = finite_difference(loss_fn, params, step=1e-6, sample=40, seed=i)
        for name in params:
            # denominator floored at 1e-4: below that the central difference
            # (noise ~ eps * |loss| / 2h ~ 1e-9) drowns the gradient, so tiny
            # coordinates are effectively compared absolutely at 1e-8
            err = max_relative_error(grads[name], numeric[name], floor=1e-4)
            worst = max(worst, err)
            assert err < 1e-4, f"{name}: rel err {err}"
    elapsed = time.monotonic() - t0
    assert elapsed < 120.0
    ok("gradient-suite", f"20 instances, worst rel err {worst:.2e}, {elapsed:.1f}s")


def test_acceptance_iob_codec():
    rng = np.random.default_rng(3)
    types = list(EntityType)
    for _ in range(10_000):
        n = int(rng.integers(1, 13))
        spans = []
        pos = 0
        while pos < n:
            if rng.random() < 0.4:
                end = min(n, pos + int(rng.integers(1, 4)))
                spans.append(Span(pos, end, types[int(rng.integers(0, 4))]))
                pos = end
            else:
                pos += 1
        assert iob_to_spans(spans_to_iob(n, spans)) == sorted(spans)
    for _ in range(10_000):
        n = int(rng.integers(1, 13))
        raw = [TAGS[int(rng.integers(0, 9))] for _ in range(n)]
        spans = iob_to_spans(raw)  # total: must accept any raw sequence
        assert is_well_formed(spans_to_iob(n, spans))
    ok("iob-codec", "10000 round-trips exact, 10000 repairs well-formed")


def test_acceptance_learnability():
    t0 = time.monotonic()
    data = lexicon_corpus(600, seed=7)
    cfg = TrainConfig(max_epochs=30)
    train, dev, test = split_dataset(data, cfg)
    wv = train_subword_skipgram([s.norms for s in train],
                                SgnsConfig(dim=50, epochs=3, min_count=1,
                                           buckets=4096, seed=0))
    model, report = train_ner(train, dev, cfg, wv)
    from omner.pipeline import evaluate_model
    micro = evaluate_model(model, test).micro.f1
    elapsed = time.monotonic() - t0
    assert micro >= 0.95, f"test micro-F1 {micro}"
    assert report.best_epoch <= 30
    assert elapsed < 600.0
    ok("learnability", f"test micro-F1 {micro:.3f} at epoch {report.best_epoch}, "
                       f"{elapsed:.0f}s")


def test_acceptance_char_cue_direction():
    t0 = time.monotonic()
    data = char_cue_corpus(400, seed=11)
    base = TrainConfig(hidden_dim=50, max_epochs=12, patience=12, seed=0)
    train, dev, test = split_dataset(data, base)
    # word-only vectors: the suffix cue is reachable only through characters
    wv = train_subword_skipgram([s.norms for s in train],
                                SgnsConfig(dim=30, epochs=2, min_count=1,
                                           use_subwords=False, seed=0))
    from dataclasses import replace
    from omner.pipeline import evaluate_model
    scores = {}
    for use_char in (True, False):
        model, _ = train_ner(train, dev, replace(base, char_cnn=use_char), wv)
        scores[use_char] = evaluate_model(model, test).micro.f1
    elapsed = time.monotonic() - t0
    assert scores[True] > scores[False], scores
    ok("char-cue-direction", f"CNN-Char {scores[True]:.3f} > "
                             f"No-Char {scores[False]:.3f}, {elapsed:.0f}s")


def test_acceptance_masking_equivalence():
    rng = np.random.default_rng(5)
    words = ["aa", "bb", "cc", "dd"]
    cfg = TrainConfig(char_dim=3, conv_window=2, conv_filters=3, hidden_dim=5, seed=1)
    wv = WordVectors({w: i for i, w in enumerate(words)}, rng.normal(size=(4, 5)))
    model = init_model(cfg, wv, CharVocab.build(words), rng)
    batch = [TaggedSentence(["aa"], ["O"], "a"),
             TaggedSentence(["bb", "cc", "dd", "aa", "bb", "cc"],
                            ["B-MOL", "I-MOL", "O", "B-PRO", "O", "O"], "b"),
             TaggedSentence(["cc", "dd"], ["O", "B-CMT"], "c")]
    padded = batch_loss(model, batch, zero_grads(model))
    single = sum(batch_loss(model, [s], zero_grads(model)) for s in batch)
    assert padded == pytest.approx(single, abs=1e-10)
    ok("masking-equivalence", f"padded {padded:.12f} vs unpadded {single:.12f}")


def test_acceptance_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    model, _ = _random_instance(rng, use_char=True)
    cfg = TrainConfig(char_dim=3, conv_window=2, conv_filters=3, hidden_dim=4)
    words = list(model.word_vectors.vocab) + ["zz", "qq"]
    sentences = [[words[int(rng.integers(0, len(words)))]
                  for _ in range(int(rng.integers(1, 8)))] for _ in range(100)]
    save_checkpoint(tmp_path / "m.ckpt", model, cfg)
    loaded, _ = load_checkpoint(tmp_path / "m.ckpt")
    worst = 0.0
    for norms in sentences:
        before = predict_sentence(model, norms)
        after = predict_sentence(loaded, norms)
        assert [s for s, _ in before] == [s for s, _ in after]
        for (_, cb), (_, ca) in zip(before, after):
            worst = max(worst, abs(cb - ca))
        em_b, _ = sentence_emissions(model, norms)
        em_a, _ = sentence_emissions(loaded, norms)
        sb = crf_mod.viterbi_decode(em_b, model.crf)[1]
        sa = crf_mod.viterbi_decode(em_a, loaded.crf)[1]
        worst = max(worst, abs(sb - sa))
        assert abs(sb - sa) < 1e-12
    assert worst < 1e-12
    ok("checkpoint-roundtrip", f"100 sentences, worst abs diff {worst:.2e}")


def test_acceptance_metric_correctness():
    gold = {"s": [Span(0, 2, EntityType.PRO), Span(3, 4, EntityType.CMT)]}
    pred = {"s": [Span(0, 2, EntityType.PRO), Span(3, 4, EntityType.MOL)]}
    m = entity_f1(gold, pred)
    assert (m.micro.precision, m.micro.recall, m.micro.f1) == (0.5, 0.5, 0.5)
    perfect = entity_f1(gold, {"s": list(gold["s"])})
    assert perfect.micro.f1 == 1.0
    empty = entity_f1(gold, {"s": []})
    assert empty.micro.f1 == 0.0
    ok("metric-correctness", "hand-counted 0.5 fixture exact; edge cases 1.0/0.0")


def test_acceptance_sgns():
    n = 5
    params = SgnsParams(np.zeros((8, 4)), np.zeros((8, 4)))
    loss, _ = sgns_step(0, 1, [2, 3, 4, 5, 6], params)
    assert loss == pytest.approx((1 + n) * math.log(2), rel=1e-15)

    rng = np.random.default_rng(2)
    params = SgnsParams(rng.normal(size=(8, 4)) * 0.3, rng.normal(size=(8, 4)) * 0.3,
                        rng.normal(size=(6, 4)) * 0.3)
    subword_rows = [1, 4]
    _, analytic = sgns_step(0, 1, [2, 3], params, subword_rows)
    arrays = {"in_word": params.in_word, "out": params.out,
              "in_subword": params.in_subword}

    def loss_fn():
        return sgns_step(0, 1, [2, 3], params, subword_rows)[0]

    numeric = finite_difference(loss_fn, arrays, step=1e-6)
    worst = 0.0
    for name, arr in arrays.items():
        dense = np.zeros_like(arr)
        for (pname, row), g in analytic.items():
            if pname == name:
                dense[row] += g
        worst = max(worst, max_relative_error(dense, numeric[name]))
    assert worst < 1e-5

    # two topics with disjoint vocab; shared per-topic anchor words give
    # same-topic words near-identical context distributions
    rng = np.random.default_rng(4)
    topic_a = [f"alpha{i}" for i in range(8)]
    topic_b = [f"beta{i}" for i in range(8)]
    anchors = {0: ["acida", "acidb"], 1: ["basea", "baseb"]}
    sentences = []
    for _ in range(400):
        t = int(rng.random() < 0.5)
        topic = (topic_a, topic_b)[t]
        sent = []
        for _ in range(3):
            sent.append(topic[int(rng.integers(0, 8))])
            sent.append(anchors[t][int(rng.integers(0, 2))])
        sentences.append(sent)
    wv = train_subword_skipgram(sentences, SgnsConfig(dim=16, epochs=10, min_count=1,
                                                      window=2, use_subwords=False,
                                                      seed=0))

    def vec(w):
        v = wv.matrix[wv.vocab[w]]
        return v / np.linalg.norm(v)

    intra, inter = [], []
    for i, a in enumerate(topic_a):
        for b in topic_a[i + 1:]:
            intra.append(float(vec(a) @ vec(b)))
        for b in topic_b:
            inter.append(float(vec(a) @ vec(b)))
    for i, a in enumerate(topic_b):
        for b in topic_b[i + 1:]:
            intra.append(float(vec(a) @ vec(b)))
    assert np.mean(intra) > np.mean(inter)
    ok("sgns", f"zero-loss exact, FD rel err {worst:.2e}, "
               f"intra {np.mean(intra):.3f} > inter {np.mean(inter):.3f}")


def test_acceptance_end_to_end_cli(tmp_path):
    t0 = time.monotonic()
    a = run_e2e(tmp_path, "a")
    b = run_e2e(tmp_path, "b")
    assert a["kb"].read_bytes() == b["kb"].read_bytes()
    assert a["ckpt"].read_bytes() == b["ckpt"].read_bytes()
    assert a["metrics"].read_bytes() == b["metrics"].read_bytes()
    ok("end-to-end-cli", f"two seeded runs byte-identical, "
                         f"{time.monotonic() - t0:.0f}s")
