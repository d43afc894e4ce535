"""Knowledge-base export: turn model predictions over a corpus into
deduplicated structured entity records, one JSON object per line."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .corpus import Document, sentences_of
from .pipeline import NerModel, predict_sentence
from .schema import EntityType


@dataclass
class ExtractionRecord:
    doc_id: str
    sent_id: str
    text: str  # original-casing surface, tokens joined by single spaces
    etype: EntityType
    start: int
    end: int
    confidence: float

    def to_json(self) -> str:
        return json.dumps({
            "doc_id": self.doc_id, "sent_id": self.sent_id, "text": self.text,
            "type": self.etype.value, "start": self.start, "end": self.end,
            "confidence": round(self.confidence, 6),
        }, sort_keys=True)


def extract_kb(model: NerModel, docs: list[Document]) -> list[ExtractionRecord]:
    """Predict over every sentence; within one document, exact duplicates of
    (surface text, type) collapse to the highest-confidence record."""
    records: list[ExtractionRecord] = []
    for doc in docs:
        by_key: dict[tuple[str, str], int] = {}
        doc_records: list[ExtractionRecord] = []
        for sent in sentences_of(doc):
            norms = [t.norm for t in sent.tokens]
            for span, conf in predict_sentence(model, norms):
                surface = " ".join(t.surface for t in sent.tokens[span.start:span.end])
                rec = ExtractionRecord(doc.doc_id, sent.sent_id, surface,
                                       span.etype, span.start, span.end, conf)
                key = (surface, span.etype.value)
                if key in by_key:
                    prev = doc_records[by_key[key]]
                    if rec.confidence > prev.confidence:
                        doc_records[by_key[key]] = rec
                else:
                    by_key[key] = len(doc_records)
                    doc_records.append(rec)
        records.extend(doc_records)
    return records


def write_kb(path, records: list[ExtractionRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
