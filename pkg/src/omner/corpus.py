"""Corpus ingestion: sentence splitting, normalization, chemistry-aware tokenization.

Tokenization keeps digit-bearing chunks intact so chemical names such as
"1,2-dichlorobenzene" and formulas such as "H2SO4" survive as single tokens,
while detaching surrounding punctuation and the percent sign.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    char_span: tuple[int, int]  # byte offsets into the sentence, end exclusive


@dataclass(frozen=True)
class Sentence:
    sent_id: str
    doc_id: str
    tokens: tuple[Token, ...]

    @property
    def norms(self) -> list[str]:
        return [t.norm for t in self.tokens]

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]


@dataclass(frozen=True)
class Document:
    doc_id: str
    abstract: str
    title: str | None = None


DEFAULT_ABBREVIATIONS = ("fig.", "figs.", "et al.", "e.g.", "i.e.", "vs.", "ca.", "etc.", "ref.")

_EDGE_PUNCT = set(".,;:!?()[]{}\"'")


def load_abbreviations(path) -> tuple[str, ...]:
    """One abbreviation per line; blank lines and # comments ignored."""
    guards = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                guards.append(line.lower())
    return tuple(guards)


def split_sentences(abstract: str, abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS) -> list[str]:
    """Split text at ./!/? followed by whitespace and an uppercase letter or digit.

    A candidate boundary is suppressed when the text up to the punctuation ends
    with an entry of the abbreviation guard list (case-insensitive).
    """
    text = abstract
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in ".!?" and i + 1 < n and text[i + 1].isspace():
            j = i + 1
            while j < n and text[j].isspace():
                j += 1
            if j < n and (text[j].isupper() or text[j].isdigit()):
                prefix = text[start:i + 1].lower()
                if not (ch == "." and any(prefix.endswith(g) for g in abbreviations)):
                    piece = text[start:i + 1].strip()
                    if piece:
                        sentences.append(piece)
                    start = j
                    i = j
                    continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _split_chunk(chunk: str) -> list[tuple[int, str]]:
    """Split one whitespace-delimited chunk into (offset, piece) tokens."""
    pieces: list[tuple[int, str]] = []
    lo, hi = 0, len(chunk)
    leading: list[tuple[int, str]] = []
    trailing: list[tuple[int, str]] = []
    while lo < hi and chunk[lo] in _EDGE_PUNCT:
        leading.append((lo, chunk[lo]))
        lo += 1
    while hi > lo and chunk[hi - 1] in _EDGE_PUNCT:
        trailing.append((hi - 1, chunk[hi - 1]))
        hi -= 1
    pieces.extend(leading)
    # middle: detach '%' signs, keep everything else (internal hyphens,
    # commas, periods) bonded, which preserves chemical names and formulas
    pos = lo
    for k in range(lo, hi):
        if chunk[k] == "%":
            if k > pos:
                pieces.append((pos, chunk[pos:k]))
            pieces.append((k, "%"))
            pos = k + 1
    if hi > pos:
        pieces.append((pos, chunk[pos:hi]))
    pieces.extend(reversed(trailing))
    return pieces


def tokenize(sentence_text: str) -> list[Token]:
    tokens: list[Token] = []
    # byte offset of each character, for UTF-8 char spans
    byte_at = [0] * (len(sentence_text) + 1)
    for i, ch in enumerate(sentence_text):
        byte_at[i + 1] = byte_at[i] + len(ch.encode("utf-8"))
    i = 0
    n = len(sentence_text)
    while i < n:
        if sentence_text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not sentence_text[j].isspace():
            j += 1
        for off, piece in _split_chunk(sentence_text[i:j]):
            start = i + off
            end = start + len(piece)
            tokens.append(Token(piece, piece.lower(), (byte_at[start], byte_at[end])))
        i = j
    return tokens


def sentences_of(doc: Document, abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS) -> list[Sentence]:
    """Split and tokenize a document; degenerate (token-free) sentences are dropped."""
    out = []
    for k, text in enumerate(split_sentences(doc.abstract, abbreviations)):
        toks = tokenize(text)
        if toks:
            out.append(Sentence(f"{doc.doc_id}:s{k}", doc.doc_id, tuple(toks)))
    return out


@dataclass
class CorpusStats:
    documents: int = 0
    sentences: int = 0
    tokens: int = 0


def ingest_corpus(path, format: str = "jsonl",
                  abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS,
                  ) -> tuple[list[Document], CorpusStats]:
    """Load a corpus export; see the jsonl contract (keys id, abstract, title?)."""
    if format != "jsonl":
        raise CorpusError(f"unsupported corpus format {format!r}")
    docs: list[Document] = []
    seen: set[str] = set()
    stats = CorpusStats()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise CorpusError(f"{path}:{lineno}: record is not an object")
            doc_id = rec.get("id")
            if not isinstance(doc_id, str) or not doc_id:
                raise CorpusError(f"{path}:{lineno}: missing or empty field 'id'")
            if doc_id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
            abstract = rec.get("abstract")
            if not isinstance(abstract, str) or not abstract.strip():
                raise CorpusError(f"{path}:{lineno}: missing or empty field 'abstract'")
            title = rec.get("title")
            if title is not None and not isinstance(title, str):
                raise CorpusError(f"{path}:{lineno}: field 'title' must be a string")
            doc = Document(doc_id, abstract, title)
            seen.add(doc_id)
            docs.append(doc)
            stats.documents += 1
            for sent in sentences_of(doc, abbreviations):
                stats.sentences += 1
                stats.tokens += len(sent.tokens)
    return docs, stats
