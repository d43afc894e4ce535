"""Model assembly and training: char-CNN + BiLSTM + CRF over word vectors,
Adam with gradient clipping, early stopping on dev micro-F1, binary
checkpoints, prediction, and the four-way embedding/char ablation grid.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import crf as crf_mod
from .crf import CrfParams, DecodeOptions, nll_and_gradient
from .embed import SubwordTable, WordVectors, lookup
from .metrics import Metrics, entity_f1
from .net import (CharVocab, NetGrads, NetParams, bilstm_backward, bilstm_forward,
                  char_cnn_backward, char_cnn_encode, dropout_mask,
                  project_backward, project_emissions)
from .schema import (NUM_TAGS, Span, TaggedSentence, TAGS, iob_to_spans,
                     indices_to_tags, tags_to_indices)


class PipelineError(ValueError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 16
    max_epochs: int = 50
    patience: int = 5
    clip_norm: float = 5.0
    dropout: float = 0.5
    seed: int = 0
    train_fraction: float = 0.8
    dev_fraction: float = 0.1
    embedding_source: str = "trained-subword"  # or "loaded-pretrained"
    char_cnn: bool = True
    fine_tune_words: bool = False
    char_dim: int = 30
    conv_window: int = 3
    conv_filters: int = 30
    hidden_dim: int = 100

    def __post_init__(self):
        if not (0 < self.train_fraction < 1 and 0 < self.dev_fraction < 1):
            raise PipelineError("split fractions must be in (0,1)")
        if self.train_fraction + self.dev_fraction > 1:
            raise PipelineError("split fractions sum to more than 1")
        if self.patience < 1:
            raise PipelineError("patience must be >= 1")
        if self.clip_norm <= 0:
            raise PipelineError("clip norm must be > 0")
        if self.embedding_source not in ("trained-subword", "loaded-pretrained"):
            raise PipelineError(f"unknown embedding source {self.embedding_source!r}")


def split_dataset(dataset: list[TaggedSentence], cfg: TrainConfig, seed: int | None = None
                  ) -> tuple[list[TaggedSentence], list[TaggedSentence], list[TaggedSentence]]:
    """Seeded shuffle, then contiguous train/dev/test slices by fraction."""
    if not dataset:
        raise PipelineError("empty dataset")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    order = rng.permutation(len(dataset))
    shuffled = [dataset[i] for i in order]
    n = len(dataset)
    n_train = int(n * cfg.train_fraction)
    n_dev = int(n * cfg.dev_fraction)
    train = shuffled[:n_train]
    dev = shuffled[n_train:n_train + n_dev]
    test = shuffled[n_train + n_dev:]
    if not train or not dev or not test:
        raise PipelineError(f"split of {n} sentences leaves an empty part")
    return train, dev, test


@dataclass
class NerModel:
    word_vectors: WordVectors
    unk_row: np.ndarray          # fallback row for OOV without subwords
    char_vocab: CharVocab
    net: NetParams
    crf: CrfParams
    use_char_cnn: bool
    fine_tune_words: bool
    dropout: float

    def word_vector(self, norm: str) -> tuple[np.ndarray, int | None]:
        """Vector for one token plus the trainable row (None = not a plain row)."""
        row = self.word_vectors.vocab.get(norm)
        if self.fine_tune_words:
            if row is not None:
                return self.word_vectors.matrix[row], row
            return self.unk_row, -1
        if row is None and self.word_vectors.subword is None:
            return self.unk_row, None
        return lookup(self.word_vectors, norm), None

    def trainable(self) -> dict[str, np.ndarray]:
        params = {
            "lstm_fwd.Wx": self.net.lstm_fwd.Wx, "lstm_fwd.Wh": self.net.lstm_fwd.Wh,
            "lstm_fwd.b": self.net.lstm_fwd.b,
            "lstm_bwd.Wx": self.net.lstm_bwd.Wx, "lstm_bwd.Wh": self.net.lstm_bwd.Wh,
            "lstm_bwd.b": self.net.lstm_bwd.b,
            "W_out": self.net.W_out, "b_out": self.net.b_out,
            "crf.T": self.crf.transitions, "crf.s": self.crf.start, "crf.e": self.crf.stop,
        }
        if self.use_char_cnn:
            params.update({"char_emb": self.net.char_emb, "conv_w": self.net.conv_w,
                           "conv_b": self.net.conv_b})
        if self.fine_tune_words:
            params.update({"word.matrix": self.word_vectors.matrix, "word.unk": self.unk_row})
        return params


def init_model(cfg: TrainConfig, word_vectors: WordVectors, char_vocab: CharVocab,
               rng: np.random.Generator) -> NerModel:
    net = NetParams.init(
        rng, char_count=len(char_vocab), word_dim=word_vectors.dim,
        char_dim=cfg.char_dim, conv_window=cfg.conv_window,
        conv_filters=cfg.conv_filters if cfg.char_cnn else 0,
        hidden_dim=cfg.hidden_dim,
    )
    return NerModel(
        word_vectors=word_vectors,
        unk_row=np.zeros(word_vectors.dim),
        char_vocab=char_vocab,
        net=net,
        crf=CrfParams.zeros(NUM_TAGS),
        use_char_cnn=cfg.char_cnn,
        fine_tune_words=cfg.fine_tune_words,
        dropout=cfg.dropout,
    )


def sentence_emissions(model: NerModel, norms: list[str],
                       rng: np.random.Generator | None = None):
    """Forward pass to emission scores. With rng, dropout is active (training);
    without, the pass is deterministic. Returns (emissions, cache)."""
    L = len(norms)
    word_rows = []
    word_parts = []
    for norm in norms:
        vec, row = model.word_vector(norm)
        word_parts.append(vec)
        word_rows.append(row)
    x_word = np.stack(word_parts)

    char_caches = None
    if model.use_char_cnn:
        feats = []
        char_caches = []
        for norm in norms:
            out, cache = char_cnn_encode(model.char_vocab.encode(norm or " "), model.net)
            feats.append(out)
            char_caches.append(cache)
        xs = np.concatenate([x_word, np.stack(feats)], axis=1)
    else:
        xs = x_word

    rate = model.dropout if rng is not None else 0.0
    m_in = dropout_mask(rng, xs.shape, rate) if rng is not None else np.ones(xs.shape)
    xs_d = xs * m_in
    hidden, lstm_cache = bilstm_forward(xs_d, model.net)
    m_hid = dropout_mask(rng, hidden.shape, rate) if rng is not None else np.ones(hidden.shape)
    hidden_d = hidden * m_hid
    emissions = project_emissions(hidden_d, model.net)
    cache = (word_rows, char_caches, xs_d, m_in, hidden_d, m_hid, lstm_cache)
    return emissions, cache


def sentence_loss_and_grads(model: NerModel, norms: list[str], tag_indices: list[int],
                            grads: dict[str, np.ndarray],
                            rng: np.random.Generator | None = None) -> float:
    """CRF NLL of one sentence; accumulates gradients into `grads` in place."""
    emissions, cache = sentence_emissions(model, norms, rng)
    word_rows, char_caches, xs_d, m_in, hidden_d, m_hid, lstm_cache = cache
    nll, cg = nll_and_gradient(emissions, tag_indices, model.crf)

    grads["crf.T"] += cg.transitions
    grads["crf.s"] += cg.start
    grads["crf.e"] += cg.stop

    ng = _net_grads_view(model, grads)
    d_hidden_d = project_backward(cg.emissions, hidden_d, model.net, ng)
    d_hidden = d_hidden_d * m_hid
    d_xs_d = bilstm_backward(d_hidden, xs_d, lstm_cache, model.net, ng)
    d_xs = d_xs_d * m_in

    word_dim = model.word_vectors.dim
    if model.use_char_cnn:
        for t, cache_t in enumerate(char_caches):
            char_cnn_backward(d_xs[t, word_dim:], cache_t, model.net, ng)
    if model.fine_tune_words:
        for t, row in enumerate(word_rows):
            if row == -1:
                grads["word.unk"] += d_xs[t, :word_dim]
            else:
                grads["word.matrix"][row] += d_xs[t, :word_dim]
    return nll


def _net_grads_view(model: NerModel, grads: dict[str, np.ndarray]) -> NetGrads:
    return NetGrads(
        char_emb=grads.get("char_emb", np.zeros_like(model.net.char_emb)),
        conv_w=grads.get("conv_w", np.zeros_like(model.net.conv_w)),
        conv_b=grads.get("conv_b", np.zeros_like(model.net.conv_b)),
        lstm_fwd=(grads["lstm_fwd.Wx"], grads["lstm_fwd.Wh"], grads["lstm_fwd.b"]),
        lstm_bwd=(grads["lstm_bwd.Wx"], grads["lstm_bwd.Wh"], grads["lstm_bwd.b"]),
        W_out=grads["W_out"], b_out=grads["b_out"],
    )


def zero_grads(model: NerModel) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in model.trainable().items()}


def batch_loss(model: NerModel, batch: list[TaggedSentence],
               grads: dict[str, np.ndarray] | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Total NLL over a batch. Sentences are padded to the batch maximum for
    storage, but padded positions carry zero mask weight: they contribute to
    neither the loss nor any gradient."""
    lengths = [len(s.norms) for s in batch]
    max_len = max(lengths)
    padded = [s.norms + [""] * (max_len - n) for s, n in zip(batch, lengths)]
    if grads is None:
        grads = zero_grads(model)
    total = 0.0
    for sent, norms, n in zip(batch, padded, lengths):
        total += sentence_loss_and_grads(model, norms[:n], tags_to_indices(sent.tags),
                                         grads, rng)
    return total


def clip_gradients(grads: dict[str, np.ndarray], clip_norm: float) -> float:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > clip_norm:
        scale = clip_norm / total
        for g in grads.values():
            g *= scale
    return total


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1: float,
                 beta2: float, epsilon: float):
        self.params = params
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, epsilon
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.b1 ** self.t
        b2t = 1.0 - self.b2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            p -= self.lr * (self.m[k] / b1t) / (np.sqrt(self.v[k] / b2t) + self.eps)


@dataclass
class EpochStats:
    epoch: int
    train_nll: float
    dev_micro_f1: float
    dev_per_type_f1: dict[str, float]


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    wall_seconds: float = 0.0


def _dataset_spans(dataset: list[TaggedSentence]) -> dict[str, list[Span]]:
    return {s.sent_id or str(i): iob_to_spans(s.tags) for i, s in enumerate(dataset)}


def evaluate_model(model: NerModel, dataset: list[TaggedSentence],
                   token_level: bool = False) -> Metrics:
    gold = _dataset_spans(dataset)
    pred = {}
    for i, sent in enumerate(dataset):
        spans = predict_sentence(model, sent.norms)
        pred[sent.sent_id or str(i)] = [s for s, _ in spans]
    return entity_f1(gold, pred, token_level=token_level)


def predict_sentence(model: NerModel, norms: list[str]) -> list[tuple[Span, float]]:
    """Constrained Viterbi decode; span confidence is the geometric mean of the
    decoded tags' marginal probabilities."""
    if not norms:
        return []
    emissions, _ = sentence_emissions(model, norms)
    path, _ = crf_mod.viterbi_decode(emissions, model.crf, DecodeOptions(constrained=True))
    marg = crf_mod.marginals(emissions, model.crf)
    spans = iob_to_spans(indices_to_tags(path))
    out = []
    for span in spans:
        probs = [max(marg[t, path[t]], 1e-300) for t in range(span.start, span.end)]
        conf = float(np.exp(np.mean(np.log(probs))))
        out.append((span, min(conf, 1.0)))
    return out


def train_ner(train: list[TaggedSentence], dev: list[TaggedSentence], cfg: TrainConfig,
              word_vectors: WordVectors) -> tuple[NerModel, TrainReport]:
    if not train or not dev:
        raise PipelineError("train and dev sets must be non-empty")
    t0 = time.monotonic()
    rng = np.random.default_rng(cfg.seed)
    char_vocab = CharVocab.build(n for s in train for n in s.norms)
    model = init_model(cfg, word_vectors, char_vocab, rng)
    params = model.trainable()
    opt = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)

    report = TrainReport()
    best_f1 = -1.0
    best_state: dict[str, np.ndarray] = {k: v.copy() for k, v in params.items()}
    bad_epochs = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(train))
        total_nll = 0.0
        for lo in range(0, len(train), cfg.batch_size):
            batch = [train[i] for i in order[lo:lo + cfg.batch_size]]
            grads = zero_grads(model)
            total_nll += batch_loss(model, batch, grads, rng)
            clip_gradients(grads, cfg.clip_norm)
            opt.step(grads)
        dev_metrics = evaluate_model(model, dev)
        report.epochs.append(EpochStats(
            epoch, total_nll / len(train), dev_metrics.micro.f1,
            {t.value: s.f1 for t, s in dev_metrics.per_type.items()}))
        if dev_metrics.micro.f1 > best_f1:
            best_f1 = dev_metrics.micro.f1
            best_state = {k: v.copy() for k, v in params.items()}
            report.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break

    for k, v in params.items():
        v[...] = best_state[k]
    report.wall_seconds = time.monotonic() - t0
    return model, report


# ---------------------------------------------------------------------------
# Checkpoint container: magic, uint64 header length, JSON header with tensor
# manifest, then raw little-endian float64 tensor data.

MAGIC = b"OMNER1\0"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _model_tensors(model: NerModel) -> dict[str, np.ndarray]:
    tensors = {
        "word.matrix": model.word_vectors.matrix,
        "word.unk": model.unk_row,
        "char_emb": model.net.char_emb,
        "conv_w": model.net.conv_w, "conv_b": model.net.conv_b,
        "lstm_fwd.Wx": model.net.lstm_fwd.Wx, "lstm_fwd.Wh": model.net.lstm_fwd.Wh,
        "lstm_fwd.b": model.net.lstm_fwd.b,
        "lstm_bwd.Wx": model.net.lstm_bwd.Wx, "lstm_bwd.Wh": model.net.lstm_bwd.Wh,
        "lstm_bwd.b": model.net.lstm_bwd.b,
        "W_out": model.net.W_out, "b_out": model.net.b_out,
        "crf.T": model.crf.transitions, "crf.s": model.crf.start, "crf.e": model.crf.stop,
    }
    if model.word_vectors.subword is not None:
        tensors["word.subword"] = model.word_vectors.subword.matrix
    return tensors


def save_checkpoint(path, model: NerModel, cfg: TrainConfig) -> None:
    tensors = _model_tensors(model)
    manifest = []
    offset = 0
    for name in sorted(tensors):
        arr = tensors[name]
        nbytes = arr.size * 8
        manifest.append({"name": name, "shape": list(arr.shape),
                         "offset": offset, "nbytes": nbytes})
        offset += nbytes
    sw = model.word_vectors.subword
    header = {
        "format_version": FORMAT_VERSION,
        "config": asdict(cfg),
        "char_vocab": model.char_vocab.to_dict(),
        "tag_order": list(TAGS),
        "word_vocab": sorted(model.word_vectors.vocab, key=model.word_vectors.vocab.get),
        "subword": {"n_min": sw.n_min, "n_max": sw.n_max} if sw is not None else None,
        "use_char_cnn": model.use_char_cnn,
        "fine_tune_words": model.fine_tune_words,
        "manifest": manifest,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in sorted(tensors):
            fh.write(np.ascontiguousarray(tensors[name], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[NerModel, TrainConfig]:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: bad magic bytes")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version")
        if header.get("tag_order") != list(TAGS):
            raise CheckpointError(f"{path}: tag order mismatch")
        data = fh.read()

    tensors: dict[str, np.ndarray] = {}
    for entry in header["manifest"]:
        name, shape = entry["name"], tuple(entry["shape"])
        off, nbytes = entry["offset"], entry["nbytes"]
        if nbytes != int(np.prod(shape, dtype=np.int64)) * 8:
            raise CheckpointError(f"{path}: manifest entry {name!r} has inconsistent size")
        if off + nbytes > len(data):
            raise CheckpointError(f"{path}: manifest entry {name!r} exceeds file size")
        arr = np.frombuffer(data[off:off + nbytes], dtype="<f8").astype(np.float64)
        tensors[name] = arr.reshape(shape)

    cfg = TrainConfig(**header["config"])
    required = set(_required_tensor_names(header))
    missing = required - set(tensors)
    if missing:
        raise CheckpointError(f"{path}: missing tensors {sorted(missing)}")

    vocab = {t: i for i, t in enumerate(header["word_vocab"])}
    wv = WordVectors(vocab, tensors["word.matrix"])
    if header["subword"] is not None:
        wv.subword = SubwordTable(tensors["word.subword"],
                                  header["subword"]["n_min"], header["subword"]["n_max"])
    char_vocab = CharVocab.from_dict(header["char_vocab"])
    net = NetParams(
        char_emb=tensors["char_emb"], conv_w=tensors["conv_w"], conv_b=tensors["conv_b"],
        lstm_fwd=_lstm_block(tensors, "lstm_fwd"), lstm_bwd=_lstm_block(tensors, "lstm_bwd"),
        W_out=tensors["W_out"], b_out=tensors["b_out"],
    )
    crf_params = CrfParams(tensors["crf.T"], tensors["crf.s"], tensors["crf.e"])
    model = NerModel(wv, tensors["word.unk"], char_vocab, net, crf_params,
                     header["use_char_cnn"], header["fine_tune_words"], cfg.dropout)
    return model, cfg


def _required_tensor_names(header) -> list[str]:
    names = ["word.matrix", "word.unk", "char_emb", "conv_w", "conv_b",
             "lstm_fwd.Wx", "lstm_fwd.Wh", "lstm_fwd.b",
             "lstm_bwd.Wx", "lstm_bwd.Wh", "lstm_bwd.b",
             "W_out", "b_out", "crf.T", "crf.s", "crf.e"]
    if header.get("subword") is not None:
        names.append("word.subword")
    return names


def _lstm_block(tensors, prefix):
    from .net import LstmBlock
    return LstmBlock(tensors[f"{prefix}.Wx"], tensors[f"{prefix}.Wh"], tensors[f"{prefix}.b"])


def predict(model: NerModel, sentences: list[list[str]]) -> list[list[tuple[Span, float]]]:
    return [predict_sentence(model, norms) for norms in sentences]


# ---------------------------------------------------------------------------
# Ablation grid: {trained-subword, loaded-pretrained} x {No Char, CNN Char}

ABLATION_ROWS = (
    ("trained-subword", False, "BiLSTM-CRF+Subword+No Char"),
    ("trained-subword", True, "BiLSTM-CRF+Subword+CNN Char"),
    ("loaded-pretrained", False, "BiLSTM-CRF+Pretrained+No Char"),
    ("loaded-pretrained", True, "BiLSTM-CRF+Pretrained+CNN Char"),
)


@dataclass
class AblationRow:
    label: str
    embedding_source: str
    char_cnn: bool
    per_type_f1: dict[str, float]
    micro_f1: float


def run_ablation(dataset: list[TaggedSentence], cfg: TrainConfig,
                 sources: dict[str, WordVectors]) -> list[AblationRow]:
    """Train the four configurations on one identical split and report test F1."""
    for key in ("trained-subword", "loaded-pretrained"):
        if key not in sources:
            raise PipelineError(f"missing embedding source {key!r}")
    train, dev, test = split_dataset(dataset, cfg)
    rows = []
    for source, char_cnn, label in ABLATION_ROWS:
        from dataclasses import replace
        run_cfg = replace(cfg, embedding_source=source, char_cnn=char_cnn)
        model, _ = train_ner(train, dev, run_cfg, sources[source])
        m = evaluate_model(model, test)
        rows.append(AblationRow(label, source, char_cnn,
                                {t.value: s.f1 for t, s in m.per_type.items()},
                                m.micro.f1))
    return rows


def ablation_to_tsv(rows: list[AblationRow]) -> str:
    lines = ["model\tMOL\tPOLY\tPRO\tCMT\tmicro"]
    for r in rows:
        cells = [f"{r.per_type_f1[t]:.4f}" for t in ("MOL", "POLY", "PRO", "CMT")]
        lines.append("\t".join([r.label, *cells, f"{r.micro_f1:.4f}"]))
    return "\n".join(lines) + "\n"
