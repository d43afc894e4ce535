"""Command-line interface covering the whole pipeline: ingestion, dataset
splitting, embedding training, model training/evaluation, the ablation grid,
prediction, knowledge-base export, and the annotation service."""

from __future__ import annotations

import dataclasses
import json
try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

import click
import numpy as np

from . import corpus as corpus_mod
from . import embed as embed_mod
from . import kb as kb_mod
from . import metrics as metrics_mod
from . import pipeline as pipe
from . import schema as schema_mod
from .server import StoreState, create_app


def _load_train_config(config_path, **overrides) -> pipe.TrainConfig:
    values = {}
    if config_path:
        with open(config_path, "rb") as fh:
            data = tomllib.load(fh)
        known = {f.name for f in dataclasses.fields(pipe.TrainConfig)}
        unknown = set(data) - known
        if unknown:
            raise click.ClickException(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return pipe.TrainConfig(**values)


def _sgns_config(dim, window, negatives, epochs, min_count, buckets, no_subwords, seed):
    return embed_mod.SgnsConfig(dim=dim, window=window, negatives=negatives,
                                epochs=epochs, min_count=min_count, buckets=buckets,
                                use_subwords=not no_subwords, seed=seed)


def _corpus_norms(path) -> list[list[str]]:
    docs, _ = corpus_mod.ingest_corpus(path)
    return [[t.norm for t in sent.tokens]
            for doc in docs for sent in corpus_mod.sentences_of(doc)]


def _resolve_embeddings(cfg: pipe.TrainConfig, vectors, corpus, train_set,
                        sgns_cfg) -> embed_mod.WordVectors:
    if cfg.embedding_source == "loaded-pretrained":
        if not vectors:
            raise click.ClickException("embedding_source=loaded-pretrained needs --vectors")
        return embed_mod.load_word_vectors(vectors)
    sentences = _corpus_norms(corpus) if corpus else [s.norms for s in train_set]
    return embed_mod.train_subword_skipgram(sentences, sgns_cfg)


def sgns_options(fn):
    fn = click.option("--embed-dim", default=100, show_default=True)(fn)
    fn = click.option("--window", default=5, show_default=True)(fn)
    fn = click.option("--negatives", default=5, show_default=True)(fn)
    fn = click.option("--embed-epochs", default=5, show_default=True)(fn)
    fn = click.option("--min-count", default=2, show_default=True)(fn)
    fn = click.option("--buckets", default=1 << 21, show_default=True)(fn)
    fn = click.option("--no-subwords", is_flag=True, default=False)(fn)
    return fn


def train_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True))(fn)
    fn = click.option("--learning-rate", type=float)(fn)
    fn = click.option("--batch-size", type=int)(fn)
    fn = click.option("--max-epochs", type=int)(fn)
    fn = click.option("--patience", type=int)(fn)
    fn = click.option("--clip-norm", type=float)(fn)
    fn = click.option("--dropout", type=float)(fn)
    fn = click.option("--hidden-dim", type=int)(fn)
    fn = click.option("--char-dim", type=int)(fn)
    fn = click.option("--conv-filters", type=int)(fn)
    fn = click.option("--embedding-source",
                      type=click.Choice(["trained-subword", "loaded-pretrained"]))(fn)
    fn = click.option("--char-cnn/--no-char-cnn", "char_cnn", default=None)(fn)
    fn = click.option("--fine-tune-words", is_flag=True, default=None)(fn)
    return fn


@click.group()
def main():
    """NER toolkit for organic-materials abstracts."""


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--format", "fmt", default="jsonl", show_default=True)
@click.option("--store", "store_path", type=click.Path(),
              help="Initialize an annotation store from the corpus.")
@click.option("--conll", "conll_path", type=click.Path(),
              help="Write the tokenized corpus as CoNLL with all-O tags.")
def ingest(input_path, fmt, store_path, conll_path):
    """Load a jsonl corpus export and print its statistics."""
    try:
        docs, stats = corpus_mod.ingest_corpus(input_path, fmt)
    except corpus_mod.CorpusError as exc:
        raise click.ClickException(str(exc))
    if store_path:
        StoreState.create(store_path, docs)
    if conll_path:
        dataset = [schema_mod.TaggedSentence(sent.norms, ["O"] * len(sent.tokens),
                                             sent.sent_id)
                   for doc in docs for sent in corpus_mod.sentences_of(doc)]
        schema_mod.save_conll(conll_path, dataset)
    click.echo(json.dumps({"documents": stats.documents, "sentences": stats.sentences,
                           "tokens": stats.tokens}))


@main.command()
@click.argument("text", required=False)
@click.option("--file", "file_path", type=click.Path(exists=True))
def tokenize(text, file_path):
    """Tokenize text (debug aid): one token per line with norm and byte span."""
    if file_path:
        with open(file_path, encoding="utf-8") as fh:
            text = fh.read()
    if text is None:
        raise click.ClickException("pass TEXT or --file")
    for sent_text in corpus_mod.split_sentences(text):
        for tok in corpus_mod.tokenize(sent_text):
            click.echo(f"{tok.surface}\t{tok.norm}\t{tok.char_span[0]}\t{tok.char_span[1]}")
        click.echo("")


@main.command()
@click.argument("dataset_path", type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--train-fraction", default=0.8, show_default=True)
@click.option("--dev-fraction", default=0.1, show_default=True)
@click.option("--seed", default=0, show_default=True)
def split(dataset_path, out_dir, train_fraction, dev_fraction, seed):
    """Split a CoNLL dataset into train/dev/test files."""
    import os
    dataset = schema_mod.load_conll(dataset_path)
    cfg = pipe.TrainConfig(train_fraction=train_fraction, dev_fraction=dev_fraction,
                           seed=seed)
    train, dev, test = pipe.split_dataset(dataset, cfg)
    os.makedirs(out_dir, exist_ok=True)
    for name, part in (("train", train), ("dev", dev), ("test", test)):
        schema_mod.save_conll(os.path.join(out_dir, f"{name}.conll"), part)
    click.echo(json.dumps({"train": len(train), "dev": len(dev), "test": len(test)}))


@main.command("train-embed")
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@sgns_options
@click.option("--seed", default=0, show_default=True)
def train_embed(corpus_path, out_path, embed_dim, window, negatives, embed_epochs,
                min_count, buckets, no_subwords, seed):
    """Train subword skip-gram vectors on a jsonl corpus; write text vectors."""
    cfg = _sgns_config(embed_dim, window, negatives, embed_epochs, min_count,
                       buckets, no_subwords, seed)
    try:
        wv = embed_mod.train_subword_skipgram(_corpus_norms(corpus_path), cfg)
    except embed_mod.EmbedError as exc:
        raise click.ClickException(str(exc))
    embed_mod.save_word_vectors(out_path, wv)
    click.echo(json.dumps({"vocab": len(wv.vocab), "dim": wv.dim}))


@main.command()
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--dev", "dev_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--report", "report_path", type=click.Path())
@click.option("--vectors", type=click.Path(exists=True),
              help="Pretrained text vectors (loaded-pretrained source).")
@click.option("--corpus", type=click.Path(exists=True),
              help="jsonl corpus for the trained-subword source.")
@train_options
@sgns_options
@click.option("--seed", type=int, default=None)
def train(train_path, dev_path, out_path, report_path, vectors, corpus, config_path,
          embed_dim, window, negatives, embed_epochs, min_count, buckets, no_subwords,
          seed, **overrides):
    """Train the NER model on CoNLL train/dev files; write a checkpoint."""
    cfg = _load_train_config(config_path, seed=seed, **overrides)
    train_set = schema_mod.load_conll(train_path)
    dev_set = schema_mod.load_conll(dev_path)
    sgns_cfg = _sgns_config(embed_dim, window, negatives, embed_epochs, min_count,
                            buckets, no_subwords, cfg.seed)
    wv = _resolve_embeddings(cfg, vectors, corpus, train_set, sgns_cfg)
    model, report = pipe.train_ner(train_set, dev_set, cfg, wv)
    pipe.save_checkpoint(out_path, model, cfg)
    payload = {
        "best_epoch": report.best_epoch,
        "wall_seconds": round(report.wall_seconds, 3),
        "epochs": [{"epoch": e.epoch, "train_nll": e.train_nll,
                    "dev_micro_f1": e.dev_micro_f1, "dev_per_type_f1": e.dev_per_type_f1}
                   for e in report.epochs],
    }
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    click.echo(json.dumps({"best_epoch": report.best_epoch,
                           "best_dev_micro_f1": max((e.dev_micro_f1 for e in report.epochs),
                                                    default=0.0)}))


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path())
@click.option("--token-level", is_flag=True, default=False)
def evaluate(model_path, data_path, out_path, token_level):
    """Score a checkpoint against a CoNLL file; write a metrics TSV."""
    model, _ = pipe.load_checkpoint(model_path)
    dataset = schema_mod.load_conll(data_path)
    m = pipe.evaluate_model(model, dataset, token_level=token_level)
    tsv = metrics_mod.metrics_to_tsv(m)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(tsv)
    click.echo(tsv, nl=False)


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--vectors", required=True, type=click.Path(exists=True),
              help="Pretrained text vectors for the loaded-pretrained rows.")
@click.option("--corpus", type=click.Path(exists=True),
              help="jsonl corpus for the trained-subword rows.")
@click.option("--out", "out_path", type=click.Path())
@train_options
@sgns_options
@click.option("--seed", type=int, default=None)
def ablate(data_path, vectors, corpus, out_path, config_path, embed_dim, window,
           negatives, embed_epochs, min_count, buckets, no_subwords, seed, **overrides):
    """Train the 2x2 embedding/char grid on one split; write a 4-row TSV."""
    overrides.pop("embedding_source", None)
    overrides.pop("char_cnn", None)
    cfg = _load_train_config(config_path, seed=seed, **overrides)
    dataset = schema_mod.load_conll(data_path)
    sgns_cfg = _sgns_config(embed_dim, window, negatives, embed_epochs, min_count,
                            buckets, no_subwords, cfg.seed)
    corpus_sents = _corpus_norms(corpus) if corpus else [s.norms for s in dataset]
    sources = {
        "trained-subword": embed_mod.train_subword_skipgram(corpus_sents, sgns_cfg),
        "loaded-pretrained": embed_mod.load_word_vectors(vectors),
    }
    rows = pipe.run_ablation(dataset, cfg, sources)
    tsv = pipe.ablation_to_tsv(rows)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(tsv)
    click.echo(tsv, nl=False)


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--text")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True))
def predict(model_path, text, corpus_path):
    """Predict entity spans for ad-hoc text or a jsonl corpus (JSON per sentence)."""
    model, _ = pipe.load_checkpoint(model_path)
    if (text is None) == (corpus_path is None):
        raise click.ClickException("pass exactly one of --text or --corpus")
    if text is not None:
        docs = [corpus_mod.Document("stdin", text)]
    else:
        docs, _ = corpus_mod.ingest_corpus(corpus_path)
    for doc in docs:
        for sent in corpus_mod.sentences_of(doc):
            spans = pipe.predict_sentence(model, [t.norm for t in sent.tokens])
            click.echo(json.dumps({
                "sent_id": sent.sent_id,
                "tokens": [t.surface for t in sent.tokens],
                "spans": [{"start": s.start, "end": s.end, "type": s.etype.value,
                           "text": " ".join(t.surface for t in sent.tokens[s.start:s.end]),
                           "confidence": round(conf, 6)}
                          for s, conf in spans],
            }))


@main.command("export-kb")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def export_kb(model_path, corpus_path, out_path):
    """Run extraction over a corpus and write deduplicated KB records (jsonl)."""
    model, _ = pipe.load_checkpoint(model_path)
    docs, _ = corpus_mod.ingest_corpus(corpus_path)
    records = kb_mod.extract_kb(model, docs)
    kb_mod.write_kb(out_path, records)
    click.echo(json.dumps({"records": len(records)}))


@main.command()
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(store_path, model_path, host, port):
    """Run the annotation HTTP service (backend for the browser UI)."""
    import uvicorn
    store = StoreState.load(store_path)
    model = pipe.load_checkpoint(model_path)[0] if model_path else None
    uvicorn.run(create_app(store, model), host=host, port=port)


if __name__ == "__main__":
    main()
