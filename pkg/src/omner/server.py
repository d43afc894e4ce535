"""Annotation store and HTTP service backing the browser UI.

The store is one JSONL file, rewritten through a temp file plus atomic rename
on every acknowledged write, so a killed process never leaves a torn state.
The running service is the sole writer; reads are served from memory.
"""

from __future__ import annotations

import datetime
import json
import os
import tempfile
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from .corpus import Document, Sentence, Token, sentences_of
from .pipeline import NerModel, predict_sentence
from .schema import (ANNOTATION_STATUSES, AnnotationRecord, EntityType,
                     SchemaError, Span, TaggedSentence, agreement,
                     spans_to_iob, validate_spans)


class StoreError(ValueError):
    pass


@dataclass
class StoreState:
    path: str
    sentences: dict[str, Sentence] = field(default_factory=dict)
    order: list[str] = field(default_factory=list)
    annotations: dict[tuple[str, str], AnnotationRecord] = field(default_factory=dict)

    @classmethod
    def create(cls, path, docs: list[Document]) -> "StoreState":
        store = cls(str(path))
        for doc in docs:
            for sent in sentences_of(doc):
                store.sentences[sent.sent_id] = sent
                store.order.append(sent.sent_id)
        store.flush()
        return store

    @classmethod
    def load(cls, path) -> "StoreState":
        store = cls(str(path))
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                kind = rec.get("kind")
                if kind == "sentence":
                    tokens = tuple(Token(t["surface"], t["norm"], tuple(t["span"]))
                                   for t in rec["tokens"])
                    sent = Sentence(rec["sent_id"], rec["doc_id"], tokens)
                    store.sentences[sent.sent_id] = sent
                    store.order.append(sent.sent_id)
                elif kind == "annotation":
                    ann = AnnotationRecord(
                        rec["sent_id"], rec["annotator"],
                        [Span(s["start"], s["end"], EntityType(s["type"]))
                         for s in rec["spans"]],
                        rec["status"], rec["updated_at"])
                    store.annotations[(ann.sent_id, ann.annotator_id)] = ann
                else:
                    raise StoreError(f"{path}:{lineno}: unknown record kind {kind!r}")
        return store

    def flush(self) -> None:
        directory = os.path.dirname(os.path.abspath(self.path)) or "."
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".store-", suffix=".jsonl")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                for sid in self.order:
                    sent = self.sentences[sid]
                    fh.write(json.dumps({
                        "kind": "sentence", "sent_id": sent.sent_id, "doc_id": sent.doc_id,
                        "tokens": [{"surface": t.surface, "norm": t.norm,
                                    "span": list(t.char_span)} for t in sent.tokens],
                    }) + "\n")
                for key in sorted(self.annotations):
                    ann = self.annotations[key]
                    fh.write(json.dumps({
                        "kind": "annotation", "sent_id": ann.sent_id,
                        "annotator": ann.annotator_id,
                        "spans": [{"start": s.start, "end": s.end, "type": s.etype.value}
                                  for s in ann.spans],
                        "status": ann.status, "updated_at": ann.updated_at,
                    }) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    def sentence_status(self, sent_id: str) -> str:
        recs = [a for (sid, _), a in self.annotations.items() if sid == sent_id]
        if not recs:
            return "unannotated"
        return max(recs, key=lambda a: ANNOTATION_STATUSES.index(a.status)).status

    def put_annotation(self, sent_id: str, annotator: str, spans: list[Span],
                       status: str) -> AnnotationRecord:
        sent = self.sentences.get(sent_id)
        if sent is None:
            raise KeyError(sent_id)
        if status not in ANNOTATION_STATUSES:
            raise SchemaError(f"unknown status {status!r}")
        validate_spans(len(sent.tokens), spans)
        ann = AnnotationRecord(sent_id, annotator, sorted(spans), status,
                               datetime.datetime.now(datetime.timezone.utc).isoformat())
        existing = self.annotations.get((sent_id, annotator))
        if existing is not None:
            existing.advance_to(status)  # raises on backward transition
        self.annotations[(sent_id, annotator)] = ann
        self.flush()
        return ann

    def export_conll(self, annotator: str | None = None) -> list[TaggedSentence]:
        out = []
        for sid in self.order:
            sent = self.sentences[sid]
            recs = [a for (s, ann), a in self.annotations.items()
                    if s == sid and (annotator is None or ann == annotator)]
            if not recs:
                continue
            best = max(recs, key=lambda a: (ANNOTATION_STATUSES.index(a.status),
                                            a.updated_at))
            tags = spans_to_iob(len(sent.tokens), best.spans)
            out.append(TaggedSentence([t.norm for t in sent.tokens], tags, sid))
        return out


class SpanIn(BaseModel):
    start: int
    end: int
    type: str


class AnnotationIn(BaseModel):
    spans: list[SpanIn]
    status: str = "draft"


def create_app(store: StoreState, model: NerModel | None = None) -> FastAPI:
    app = FastAPI(title="omner annotation service")
    from fastapi.middleware.cors import CORSMiddleware
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    write_lock = threading.Lock()

    def parse_spans(payload: list[SpanIn], token_count: int) -> list[Span]:
        spans = []
        for s in payload:
            try:
                etype = EntityType(s.type)
            except ValueError:
                raise HTTPException(400, f"unknown entity type {s.type!r}")
            if not (0 <= s.start < s.end <= token_count):
                raise HTTPException(400, f"span [{s.start},{s.end}) out of range "
                                         f"for {token_count} tokens")
            spans.append(Span(s.start, s.end, etype))
        try:
            validate_spans(token_count, spans)
        except SchemaError as exc:
            raise HTTPException(400, str(exc))
        return spans

    def sentence_payload(sent: Sentence) -> dict:
        anns = {}
        for (sid, annotator), ann in store.annotations.items():
            if sid == sent.sent_id:
                anns[annotator] = {
                    "spans": [{"start": s.start, "end": s.end, "type": s.etype.value}
                              for s in ann.spans],
                    "status": ann.status,
                    "updated_at": ann.updated_at,
                }
        return {
            "sent_id": sent.sent_id,
            "doc_id": sent.doc_id,
            "tokens": [t.surface for t in sent.tokens],
            "annotations": anns,
            "status": store.sentence_status(sent.sent_id),
        }

    @app.get("/api/sentences")
    def list_sentences(status: str | None = None, page: int = Query(1, ge=1),
                       page_size: int = Query(50, ge=1, le=500)):
        ids = [sid for sid in store.order
               if status in (None, "") or store.sentence_status(sid) == status]
        lo = (page - 1) * page_size
        return {
            "total": len(ids),
            "page": page,
            "page_size": page_size,
            "sentences": [sentence_payload(store.sentences[sid])
                          for sid in ids[lo:lo + page_size]],
        }

    @app.get("/api/sentences/{sent_id}")
    def get_sentence(sent_id: str):
        sent = store.sentences.get(sent_id)
        if sent is None:
            raise HTTPException(404, f"unknown sentence {sent_id!r}")
        return sentence_payload(sent)

    @app.put("/api/sentences/{sent_id}/annotations/{annotator}")
    def put_annotation(sent_id: str, annotator: str, body: AnnotationIn):
        sent = store.sentences.get(sent_id)
        if sent is None:
            raise HTTPException(404, f"unknown sentence {sent_id!r}")
        spans = parse_spans(body.spans, len(sent.tokens))
        with write_lock:
            try:
                ann = store.put_annotation(sent_id, annotator, spans, body.status)
            except SchemaError as exc:
                raise HTTPException(400, str(exc))
        return {
            "sent_id": sent_id,
            "annotator": annotator,
            "status": ann.status,
            "updated_at": ann.updated_at,
            "spans": [{"start": s.start, "end": s.end, "type": s.etype.value}
                      for s in ann.spans],
        }

    @app.post("/api/sentences/{sent_id}/suggest")
    def suggest(sent_id: str):
        sent = store.sentences.get(sent_id)
        if sent is None:
            raise HTTPException(404, f"unknown sentence {sent_id!r}")
        if model is None:
            raise HTTPException(409, "no model loaded")
        spans = predict_sentence(model, [t.norm for t in sent.tokens])
        return {"spans": [{"start": s.start, "end": s.end, "type": s.etype.value,
                           "confidence": conf} for s, conf in spans]}

    @app.get("/api/export")
    def export(format: str = "conll", annotator: str | None = None):
        if format != "conll":
            raise HTTPException(400, f"unsupported export format {format!r}")
        lines = []
        for sent in store.export_conll(annotator or None):
            lines.append(f"# sent_id = {sent.sent_id}")
            lines.extend(f"{n}\t{t}" for n, t in zip(sent.norms, sent.tags))
            lines.append("")
        from fastapi.responses import PlainTextResponse
        return PlainTextResponse("\n".join(lines) + ("\n" if lines else ""))

    @app.get("/api/stats")
    def stats():
        type_counts = {t.value: 0 for t in EntityType}
        status_counts = {s: 0 for s in ANNOTATION_STATUSES}
        for ann in store.annotations.values():
            status_counts[ann.status] += 1
            for s in ann.spans:
                type_counts[s.etype.value] += 1
        pairs = []
        by_sentence: dict[str, list[AnnotationRecord]] = {}
        for (sid, _), ann in store.annotations.items():
            by_sentence.setdefault(sid, []).append(ann)
        for sid, anns in by_sentence.items():
            n_tok = len(store.sentences[sid].tokens)
            anns = sorted(anns, key=lambda a: a.annotator_id)
            for i in range(len(anns)):
                for j in range(i + 1, len(anns)):
                    a = spans_to_iob(n_tok, anns[i].spans)
                    b = spans_to_iob(n_tok, anns[j].spans)
                    pairs.append(agreement(a, b))
        return {
            "sentences": len(store.sentences),
            "annotations": len(store.annotations),
            "per_type": type_counts,
            "per_status": status_counts,
            "pairwise_agreement": (sum(pairs) / len(pairs)) if pairs else None,
        }

    return app
