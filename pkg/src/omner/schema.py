"""Entity schema, IOB tag codec, and CoNLL-style dataset I/O.

The tag index order defined here is frozen: it fixes the layout of the CRF
transition matrix, so changing it silently invalidates every checkpoint.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace


class EntityType(enum.Enum):
    MOL = "MOL"
    POLY = "POLY"
    PRO = "PRO"
    CMT = "CMT"

    @property
    def display_name(self) -> str:
        return _DISPLAY[self]

    @property
    def definition(self) -> str:
        return _DEFINITION[self]


_DISPLAY = {
    EntityType.MOL: "Molecule",
    EntityType.POLY: "Polymer",
    EntityType.PRO: "Property",
    EntityType.CMT: "Characterization Method",
}

_DEFINITION = {
    EntityType.MOL: "A fundamental unit of a chemical compound",
    EntityType.POLY: "A molecule majorly composed of multiple similar units",
    EntityType.PRO: "Fundamental physical or chemical characteristics of a compound",
    EntityType.CMT: "A method to measure physical or chemical properties",
}

ENTITY_TYPES = (EntityType.MOL, EntityType.POLY, EntityType.PRO, EntityType.CMT)

# Frozen tag order: O first, then B-/I- pairs in EntityType order.
TAGS: tuple[str, ...] = ("O",) + tuple(
    f"{p}-{t.value}" for t in ENTITY_TYPES for p in ("B", "I")
)
TAG_TO_INDEX: dict[str, int] = {tag: i for i, tag in enumerate(TAGS)}
NUM_TAGS = len(TAGS)  # 9

O_INDEX = 0


class SchemaError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Span:
    """Entity annotation as a half-open token range."""

    start: int
    end: int
    etype: EntityType

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise SchemaError(f"invalid span range [{self.start}, {self.end})")


def validate_spans(token_count: int, spans: list[Span]) -> list[Span]:
    """Sort spans and reject overlap or out-of-range endpoints."""
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    bad = [s for s in ordered if s.end > token_count]
    if bad:
        raise SchemaError(f"spans out of range for {token_count} tokens: {bad}")
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise SchemaError(f"overlapping spans: {prev} and {cur}")
    return ordered


def spans_to_iob(token_count: int, spans: list[Span]) -> list[str]:
    ordered = validate_spans(token_count, spans)
    tags = ["O"] * token_count
    for span in ordered:
        tags[span.start] = f"B-{span.etype.value}"
        for i in range(span.start + 1, span.end):
            tags[i] = f"I-{span.etype.value}"
    return tags


def iob_to_spans(tags: list[str]) -> list[Span]:
    """Decode IOB tags to spans; orphan I- tags are repaired to B-."""
    spans: list[Span] = []
    start = None
    etype = None
    for i, tag in enumerate(tags):
        if tag not in TAG_TO_INDEX:
            raise SchemaError(f"unknown tag {tag!r} at position {i}")
        if tag == "O":
            if start is not None:
                spans.append(Span(start, i, etype))
                start = None
            continue
        prefix, _, name = tag.partition("-")
        t = EntityType(name)
        if prefix == "B" or start is None or t is not etype:
            if start is not None:
                spans.append(Span(start, i, etype))
            start, etype = i, t
    if start is not None:
        spans.append(Span(start, len(tags), etype))
    return spans


def is_well_formed(tags: list[str]) -> bool:
    prev = "O"
    for tag in tags:
        if tag.startswith("I-"):
            if prev == "O" or prev[2:] != tag[2:]:
                return False
        prev = tag
    return True


def tags_to_indices(tags: list[str]) -> list[int]:
    try:
        return [TAG_TO_INDEX[t] for t in tags]
    except KeyError as exc:
        raise SchemaError(f"unknown tag {exc.args[0]!r}") from None


def indices_to_tags(indices: list[int]) -> list[str]:
    return [TAGS[i] for i in indices]


def agreement(a: list[str], b: list[str]) -> float:
    """Token-level agreement ratio between two tag sequences."""
    if len(a) != len(b):
        raise SchemaError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise SchemaError("empty tag sequences")
    return sum(x == y for x, y in zip(a, b)) / len(a)


ANNOTATION_STATUSES = ("draft", "submitted", "reviewed")


@dataclass
class AnnotationRecord:
    sent_id: str
    annotator_id: str
    spans: list[Span] = field(default_factory=list)
    status: str = "draft"
    updated_at: str = ""

    def advance_to(self, status: str) -> "AnnotationRecord":
        if status not in ANNOTATION_STATUSES:
            raise SchemaError(f"unknown status {status!r}")
        if ANNOTATION_STATUSES.index(status) < ANNOTATION_STATUSES.index(self.status):
            raise SchemaError(f"status cannot move back: {self.status} -> {status}")
        return replace(self, status=status)


@dataclass
class TaggedSentence:
    """One sentence of a labeled dataset: token norms plus IOB tags."""

    norms: list[str]
    tags: list[str]
    sent_id: str = ""

    def __post_init__(self):
        if len(self.norms) != len(self.tags):
            raise SchemaError(
                f"{len(self.norms)} tokens but {len(self.tags)} tags"
                + (f" in sentence {self.sent_id}" if self.sent_id else "")
            )


def save_conll(path, dataset: list[TaggedSentence]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in dataset:
            if sent.sent_id:
                fh.write(f"# sent_id = {sent.sent_id}\n")
            for norm, tag in zip(sent.norms, sent.tags):
                fh.write(f"{norm}\t{tag}\n")
            fh.write("\n")


def load_conll(path) -> list[TaggedSentence]:
    dataset: list[TaggedSentence] = []
    norms: list[str] = []
    tags: list[str] = []
    sent_id = ""

    def flush():
        nonlocal norms, tags, sent_id
        if norms:
            dataset.append(TaggedSentence(norms, tags, sent_id))
        norms, tags, sent_id = [], [], ""

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("#"):
                if line.startswith("# sent_id = "):
                    sent_id = line[len("# sent_id = "):].strip()
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise SchemaError(f"{path}:{lineno}: expected 2 columns, got {len(cols)}")
            norm, tag = cols
            if tag not in TAG_TO_INDEX:
                raise SchemaError(f"{path}:{lineno}: unknown tag {tag!r}")
            norms.append(norm)
            tags.append(tag)
    flush()
    if not dataset:
        raise SchemaError(f"{path}: empty dataset")
    return dataset
