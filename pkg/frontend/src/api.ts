import {
  SentencePageSchema,
  SentenceSchema,
  StatsSchema,
  SuggestionSchema,
  type Layer,
  type Sentence,
  type SentencePage,
  type Span,
  type Stats,
  type Status,
  type Suggestion,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request(url: string, init?: RequestInit): Promise<unknown> {
    const resp = await this.fetchFn(this.base + url, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    return resp.json();
  }

  async listSentences(opts: {
    status?: Status | "unannotated";
    page?: number;
    pageSize?: number;
  } = {}): Promise<SentencePage> {
    const params = new URLSearchParams();
    if (opts.status) params.set("status", opts.status);
    if (opts.page) params.set("page", String(opts.page));
    if (opts.pageSize) params.set("page_size", String(opts.pageSize));
    const qs = params.toString();
    const data = await this.request(`/api/sentences${qs ? "?" + qs : ""}`);
    return SentencePageSchema.parse(data);
  }

  async getSentence(sentId: string): Promise<Sentence> {
    const data = await this.request(`/api/sentences/${encodeURIComponent(sentId)}`);
    return SentenceSchema.parse(data);
  }

  async putAnnotation(
    sentId: string,
    annotator: string,
    spans: Span[],
    status: Status,
  ): Promise<Layer> {
    const data = await this.request(
      `/api/sentences/${encodeURIComponent(sentId)}/annotations/${encodeURIComponent(annotator)}`,
      {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ spans, status }),
      },
    );
    const parsed = data as { spans: Span[]; status: Status; updated_at: string };
    return { spans: parsed.spans, status: parsed.status, updated_at: parsed.updated_at };
  }

  async suggest(sentId: string): Promise<Suggestion> {
    const data = await this.request(
      `/api/sentences/${encodeURIComponent(sentId)}/suggest`,
      { method: "POST" },
    );
    return SuggestionSchema.parse(data);
  }

  exportUrl(annotator?: string): string {
    const params = new URLSearchParams({ format: "conll" });
    if (annotator) params.set("annotator", annotator);
    return `${this.base}/api/export?${params.toString()}`;
  }

  async stats(): Promise<Stats> {
    return StatsSchema.parse(await this.request("/api/stats"));
  }
}
