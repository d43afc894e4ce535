"""Synthetic template-grammar corpora for learnability benchmarks.

Two flavors:
- lexicon corpus: four disjoint 30-item entity lexicons, so word identity
  alone determines the label;
- char-cue corpus: entity identity lives only in token-internal suffixes of
  nonce stems, and the test split uses unseen stems, so only character
  features can disambiguate.
"""

from __future__ import annotations

import json

import numpy as np

from omner.schema import Span, TaggedSentence, EntityType, spans_to_iob

CONSONANTS = "bcdfgklmnprstvz"
VOWELS = "aeiou"

TEMPLATES = [
    (["we", "synthesized", "{MOL}", "using", "{CMT}", "."], ["MOL", "CMT"]),
    (["the", "{PRO}", "of", "{POLY}", "was", "measured", "."], ["PRO", "POLY"]),
    (["{POLY}", "films", "show", "high", "{PRO}", "."], ["POLY", "PRO"]),
    (["{CMT}", "confirms", "the", "structure", "of", "{MOL}", "."], ["CMT", "MOL"]),
    (["samples", "of", "{MOL}", "and", "{POLY}", "were", "prepared", "."], ["MOL", "POLY"]),
    (["we", "report", "the", "{PRO}", "of", "{MOL}", "via", "{CMT}", "."],
     ["PRO", "MOL", "CMT"]),
]


def _nonce(rng: np.random.Generator, syllables: int = 2) -> str:
    return "".join(rng.choice(list(CONSONANTS)) + rng.choice(list(VOWELS))
                   for _ in range(syllables))


def make_lexicons(rng: np.random.Generator, items: int = 30) -> dict[str, list[list[str]]]:
    """Disjoint lexicons; roughly a third of the entries are two tokens long."""
    suffix = {"MOL": "ane", "POLY": "ene", "PRO": "ity", "CMT": "scopy"}
    lex: dict[str, list[list[str]]] = {}
    used: set[str] = set()
    for etype in ("MOL", "POLY", "PRO", "CMT"):
        entries = []
        while len(entries) < items:
            word = _nonce(rng, 3) + suffix[etype]
            if word in used:
                continue
            used.add(word)
            if len(entries) % 3 == 2:
                entries.append([_nonce(rng, 2), word])
            else:
                entries.append([word])
        lex[etype] = entries
    return lex


def _fill_template(rng, template, slots, lexicons) -> TaggedSentence:
    tokens: list[str] = []
    spans: list[Span] = []
    slot_iter = iter(slots)
    for item in template:
        if item.startswith("{"):
            etype = next(slot_iter)
            entry = lexicons[etype][rng.integers(0, len(lexicons[etype]))]
            spans.append(Span(len(tokens), len(tokens) + len(entry), EntityType(etype)))
            tokens.extend(entry)
        else:
            tokens.append(item)
    return TaggedSentence(tokens, spans_to_iob(len(tokens), spans))


def lexicon_corpus(n_sentences: int = 600, seed: int = 7) -> list[TaggedSentence]:
    rng = np.random.default_rng(seed)
    lexicons = make_lexicons(rng)
    out = []
    for i in range(n_sentences):
        template, slots = TEMPLATES[rng.integers(0, len(TEMPLATES))]
        sent = _fill_template(rng, template, slots, lexicons)
        sent.sent_id = f"synth:{i}"
        out.append(sent)
    return out


def char_cue_corpus(n_sentences: int = 600, seed: int = 11,
                    stems_per_type: int = 400) -> list[TaggedSentence]:
    """Entity type is recoverable only from the suffix of a nonce stem.

    Every slot draws a fresh stem most of the time, so the test split is
    dominated by words never seen in training; each template offers every
    entity type in the same positions, so context alone cannot decide.
    """
    rng = np.random.default_rng(seed)
    suffix = {"MOL": "ide", "POLY": "mer", "PRO": "ivity", "CMT": "oscopy"}
    templates = [
        ["we", "studied", "{X}", "in", "detail", "."],
        ["the", "sample", "contains", "{X}", "and", "{X}", "."],
        ["results", "for", "{X}", "are", "reported", "."],
        ["{X}", "was", "observed", "in", "all", "cases", "."],
    ]
    types = list(suffix)
    out = []
    for i in range(n_sentences):
        template = templates[rng.integers(0, len(templates))]
        tokens: list[str] = []
        spans: list[Span] = []
        for item in template:
            if item == "{X}":
                etype = types[rng.integers(0, len(types))]
                word = _nonce(rng, 3) + suffix[etype]
                spans.append(Span(len(tokens), len(tokens) + 1, EntityType(etype)))
                tokens.append(word)
            else:
                tokens.append(item)
        out.append(TaggedSentence(tokens, spans_to_iob(len(tokens), spans),
                                  f"charcue:{i}"))
    return out


def corpus_to_jsonl(path, dataset: list[TaggedSentence]) -> None:
    """Write one pseudo-abstract per sentence, reconstructable by tokenize()."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, sent in enumerate(dataset):
            fh.write(json.dumps({"id": f"doc{i}", "abstract": " ".join(sent.norms)}) + "\n")
