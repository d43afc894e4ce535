"""Entity-level exact-match precision/recall/F1, per type and micro-averaged."""

from __future__ import annotations

from dataclasses import dataclass

from .schema import ENTITY_TYPES, EntityType, Span


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class TypeScore:
    precision: float
    recall: float
    f1: float
    support: int        # gold spans of this type
    predicted: int      # predicted spans of this type


@dataclass(frozen=True)
class Metrics:
    per_type: dict[EntityType, TypeScore]
    micro: TypeScore

    @property
    def micro_f1(self) -> float:
        return self.micro.f1


def _prf(tp: int, pred: int, gold: int) -> tuple[float, float, float]:
    p = tp / pred if pred else 0.0
    r = tp / gold if gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def entity_f1(gold: dict[str, list[Span]], pred: dict[str, list[Span]],
              token_level: bool = False) -> Metrics:
    """Score predictions against gold spans, keyed by sentence id.

    Exact match: a prediction is a true positive iff sentence id, boundaries,
    and type all agree with a gold span, each gold span matched at most once.
    With token_level, counts are per labeled token instead of per span.
    """
    if set(gold) != set(pred):
        missing = set(gold) ^ set(pred)
        raise MetricsError(f"gold/pred sentence id mismatch: {sorted(missing)[:5]}")

    tp: dict[EntityType, int] = {t: 0 for t in ENTITY_TYPES}
    n_gold: dict[EntityType, int] = {t: 0 for t in ENTITY_TYPES}
    n_pred: dict[EntityType, int] = {t: 0 for t in ENTITY_TYPES}

    for sid in gold:
        if token_level:
            g = {(i, s.etype) for s in gold[sid] for i in range(s.start, s.end)}
            p = {(i, s.etype) for s in pred[sid] for i in range(s.start, s.end)}
            for _, t in g:
                n_gold[t] += 1
            for _, t in p:
                n_pred[t] += 1
            for _, t in g & p:
                tp[t] += 1
        else:
            g = set(gold[sid])
            for s in gold[sid]:
                n_gold[s.etype] += 1
            for s in pred[sid]:
                n_pred[s.etype] += 1
                if s in g:
                    tp[s.etype] += 1
                    g.discard(s)

    per_type = {}
    for t in ENTITY_TYPES:
        p, r, f1 = _prf(tp[t], n_pred[t], n_gold[t])
        per_type[t] = TypeScore(p, r, f1, n_gold[t], n_pred[t])
    p, r, f1 = _prf(sum(tp.values()), sum(n_pred.values()), sum(n_gold.values()))
    micro = TypeScore(p, r, f1, sum(n_gold.values()), sum(n_pred.values()))
    return Metrics(per_type, micro)


def metrics_to_tsv(m: Metrics) -> str:
    lines = ["type\tprecision\trecall\tf1\tsupport"]
    for t in ENTITY_TYPES:
        s = m.per_type[t]
        lines.append(f"{t.value}\t{s.precision:.4f}\t{s.recall:.4f}\t{s.f1:.4f}\t{s.support}")
    s = m.micro
    lines.append(f"micro\t{s.precision:.4f}\t{s.recall:.4f}\t{s.f1:.4f}\t{s.support}")
    return "\n".join(lines) + "\n"
