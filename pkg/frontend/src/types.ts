import { z } from "zod";

export const ENTITY_TYPES = ["MOL", "POLY", "PRO", "CMT"] as const;
export type EntityType = (typeof ENTITY_TYPES)[number];

export const TYPE_LABELS: Record<EntityType, string> = {
  MOL: "small molecule",
  POLY: "polymer",
  PRO: "property",
  CMT: "characterization method",
};

export const TYPE_COLORS: Record<EntityType, string> = {
  MOL: "#2a7ae2",
  POLY: "#2e9e44",
  PRO: "#c77c00",
  CMT: "#a44bc9",
};

export const STATUSES = ["draft", "submitted", "reviewed"] as const;
export type Status = (typeof STATUSES)[number];

export const SpanSchema = z.object({
  start: z.number().int().nonnegative(),
  end: z.number().int().positive(),
  type: z.enum(ENTITY_TYPES),
});
export type Span = z.infer<typeof SpanSchema>;

export const SuggestedSpanSchema = SpanSchema.extend({
  confidence: z.number().min(0).max(1),
});
export type SuggestedSpan = z.infer<typeof SuggestedSpanSchema>;

export const LayerSchema = z.object({
  spans: z.array(SpanSchema),
  status: z.enum(STATUSES),
  updated_at: z.string(),
});
export type Layer = z.infer<typeof LayerSchema>;

export const SentenceSchema = z.object({
  sent_id: z.string(),
  doc_id: z.string(),
  tokens: z.array(z.string()),
  annotations: z.record(z.string(), LayerSchema),
  status: z.enum(["unannotated", ...STATUSES]),
});
export type Sentence = z.infer<typeof SentenceSchema>;

export const SentencePageSchema = z.object({
  total: z.number().int().nonnegative(),
  page: z.number().int().positive(),
  page_size: z.number().int().positive(),
  sentences: z.array(SentenceSchema),
});
export type SentencePage = z.infer<typeof SentencePageSchema>;

export const SuggestionSchema = z.object({
  spans: z.array(SuggestedSpanSchema),
});
export type Suggestion = z.infer<typeof SuggestionSchema>;

export const StatsSchema = z.object({
  sentences: z.number(),
  annotations: z.number(),
  per_type: z.record(z.string(), z.number()),
  per_status: z.record(z.string(), z.number()),
  pairwise_agreement: z.number().nullable(),
});
export type Stats = z.infer<typeof StatsSchema>;
