import type { EntityType, Span, SuggestedSpan } from "./types.js";

export function spansOverlap(a: Span, b: Span): boolean {
  return a.start < b.end && b.start < a.end;
}

export function findOverlap(spans: readonly Span[], candidate: Span): Span | null {
  for (const s of spans) {
    if (spansOverlap(s, candidate)) return s;
  }
  return null;
}

export type AddResult =
  | { ok: true; spans: Span[] }
  | { ok: false; reason: string };

/** Add a span to a layer; rejects anything the server would reject. */
export function addSpan(
  spans: readonly Span[],
  start: number,
  end: number,
  type: EntityType,
  tokenCount: number,
): AddResult {
  if (!(Number.isInteger(start) && Number.isInteger(end))) {
    return { ok: false, reason: "span bounds must be whole token indices" };
  }
  if (!(0 <= start && start < end && end <= tokenCount)) {
    return { ok: false, reason: `span [${start},${end}) out of range for ${tokenCount} tokens` };
  }
  const candidate: Span = { start, end, type };
  const clash = findOverlap(spans, candidate);
  if (clash) {
    return {
      ok: false,
      reason: `overlaps existing ${clash.type} span [${clash.start},${clash.end})`,
    };
  }
  const next = [...spans, candidate];
  next.sort((a, b) => a.start - b.start || a.end - b.end);
  return { ok: true, spans: next };
}

export function removeSpanAt(spans: readonly Span[], tokenIndex: number): Span[] {
  return spans.filter((s) => !(s.start <= tokenIndex && tokenIndex < s.end));
}

/** Copy semantics for accepting a suggestion: span and confidence unchanged. */
export function acceptSuggestion(
  spans: readonly Span[],
  suggestion: SuggestedSpan,
  tokenCount: number,
): AddResult & { accepted?: SuggestedSpan } {
  const result = addSpan(spans, suggestion.start, suggestion.end, suggestion.type, tokenCount);
  if (!result.ok) return result;
  return { ...result, accepted: { ...suggestion } };
}

export function visibleSuggestions(
  suggestions: readonly SuggestedSpan[],
  threshold: number,
): SuggestedSpan[] {
  return suggestions.filter((s) => s.confidence >= threshold);
}

/** Per-token IOB-style tags for a layer, used by the review diff. */
export function spansToTags(tokenCount: number, spans: readonly Span[]): string[] {
  const tags = new Array<string>(tokenCount).fill("O");
  for (const s of spans) {
    for (let i = s.start; i < s.end && i < tokenCount; i++) {
      tags[i] = (i === s.start ? "B-" : "I-") + s.type;
    }
  }
  return tags;
}

/** Token indices where two layers disagree; identical layers yield []. */
export function diffTokens(
  tokenCount: number,
  a: readonly Span[],
  b: readonly Span[],
): number[] {
  const ta = spansToTags(tokenCount, a);
  const tb = spansToTags(tokenCount, b);
  const out: number[] = [];
  for (let i = 0; i < tokenCount; i++) {
    if (ta[i] !== tb[i]) out.push(i);
  }
  return out;
}

/** Confidence shading: interpolate toward white as confidence drops. */
export function shade(baseHex: string, confidence: number): string {
  const c = Math.min(1, Math.max(0, confidence));
  const r = parseInt(baseHex.slice(1, 3), 16);
  const g = parseInt(baseHex.slice(3, 5), 16);
  const b = parseInt(baseHex.slice(5, 7), 16);
  const mix = (v: number) => Math.round(255 - (255 - v) * c);
  const hex = (v: number) => v.toString(16).padStart(2, "0");
  return `#${hex(mix(r))}${hex(mix(g))}${hex(mix(b))}`;
}
