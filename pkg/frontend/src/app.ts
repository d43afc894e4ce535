/** DOM wiring for the annotation UI. All persistent state lives behind the
 * HTTP API; this module holds only the unsaved draft for one sentence. */

import { ApiClient, ApiError } from "./api.js";
import { typeForKey } from "./keys.js";
import {
  acceptSuggestion,
  addSpan,
  diffTokens,
  removeSpanAt,
  shade,
  visibleSuggestions,
} from "./spans.js";
import {
  STATUSES,
  TYPE_COLORS,
  TYPE_LABELS,
  type Sentence,
  type Span,
  type Status,
  type SuggestedSpan,
} from "./types.js";

interface UiState {
  annotator: string;
  statusFilter: string;
  page: number;
  sentences: Sentence[];
  total: number;
  current: Sentence | null;
  draft: Span[];
  draftStatus: Status;
  suggestions: SuggestedSpan[];
  confidenceThreshold: number;
  showOtherLayers: boolean;
  diffWith: string | null;
  anchor: number | null;
  focus: number | null;
  message: string;
  offline: boolean;
}

const PAGE_SIZE = 25;

export function startApp(root: HTMLElement, api: ApiClient, annotator: string): void {
  const state: UiState = {
    annotator,
    statusFilter: "",
    page: 1,
    sentences: [],
    total: 0,
    current: null,
    draft: [],
    draftStatus: "draft",
    suggestions: [],
    confidenceThreshold: 0.5,
    showOtherLayers: true,
    diffWith: null,
    anchor: null,
    focus: null,
    message: "",
    offline: false,
  };

  async function guard<T>(work: () => Promise<T>): Promise<T | null> {
    try {
      const value = await work();
      state.offline = false;
      return value;
    } catch (err) {
      if (err instanceof ApiError) {
        state.message = err.detail;
      } else {
        state.offline = true; // network failure: draft retained, retry offered
      }
      render();
      return null;
    }
  }

  async function refreshList(): Promise<void> {
    const page = await guard(() =>
      api.listSentences({
        status: (state.statusFilter || undefined) as never,
        page: state.page,
        pageSize: PAGE_SIZE,
      }),
    );
    if (page) {
      state.sentences = page.sentences;
      state.total = page.total;
      render();
    }
  }

  async function open(sentId: string): Promise<void> {
    const sent = await guard(() => api.getSentence(sentId));
    if (!sent) return;
    state.current = sent;
    const mine = sent.annotations[state.annotator];
    state.draft = mine ? [...mine.spans] : [];
    state.draftStatus = mine ? mine.status : "draft";
    state.suggestions = [];
    state.anchor = null;
    state.focus = null;
    state.message = "";
    render();
  }

  async function save(status: Status): Promise<void> {
    if (!state.current) return;
    const layer = await guard(() =>
      api.putAnnotation(state.current!.sent_id, state.annotator, state.draft, status),
    );
    if (layer) {
      state.draftStatus = layer.status;
      state.message = `saved at ${layer.updated_at}`;
      await open(state.current.sent_id);
      await refreshList();
    }
  }

  async function suggest(): Promise<void> {
    if (!state.current) return;
    const result = await guard(() => api.suggest(state.current!.sent_id));
    if (result) {
      state.suggestions = result.spans;
      render();
    }
  }

  function label(type: ReturnType<typeof typeForKey>): void {
    if (!state.current || type === null) return;
    if (state.anchor === null || state.focus === null) {
      state.message = "select tokens first";
      render();
      return;
    }
    const start = Math.min(state.anchor, state.focus);
    const end = Math.max(state.anchor, state.focus) + 1;
    const result = addSpan(state.draft, start, end, type, state.current.tokens.length);
    if (result.ok) {
      state.draft = result.spans;
      state.anchor = null;
      state.focus = null;
      state.message = "";
    } else {
      state.message = result.reason;
    }
    render();
  }

  function onKey(ev: KeyboardEvent): void {
    if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLSelectElement) {
      return;
    }
    const type = typeForKey(ev.key);
    if (type) {
      label(type);
      return;
    }
    if ((ev.key === "Backspace" || ev.key === "x") && state.focus !== null) {
      state.draft = removeSpanAt(state.draft, state.focus);
      render();
    }
  }

  function el(tag: string, attrs: Record<string, string> = {}, text = ""): HTMLElement {
    const node = document.createElement(tag);
    for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
    if (text) node.textContent = text;
    return node;
  }

  function renderTokens(container: HTMLElement): void {
    const sent = state.current!;
    const spanAt = (i: number) => state.draft.find((s) => s.start <= i && i < s.end);
    const diffSet = new Set<number>();
    if (state.diffWith) {
      const other = sent.annotations[state.diffWith];
      if (other) {
        for (const i of diffTokens(sent.tokens.length, state.draft, other.spans)) {
          diffSet.add(i);
        }
      }
    }
    sent.tokens.forEach((tok, i) => {
      const span = spanAt(i);
      const btn = el("button", { class: "token", "data-index": String(i) }, tok);
      if (span) {
        btn.style.background = TYPE_COLORS[span.type];
        btn.style.color = "#fff";
        btn.title = TYPE_LABELS[span.type];
      }
      if (state.anchor !== null && state.focus !== null) {
        const lo = Math.min(state.anchor, state.focus);
        const hi = Math.max(state.anchor, state.focus);
        if (lo <= i && i <= hi) btn.classList.add("selected");
      }
      if (diffSet.has(i)) btn.classList.add("diff");
      btn.addEventListener("click", (ev) => {
        if (ev.shiftKey && state.anchor !== null) {
          state.focus = i;
        } else {
          state.anchor = i;
          state.focus = i;
        }
        render();
      });
      container.appendChild(btn);
      container.appendChild(document.createTextNode(" "));
    });
  }

  function renderSuggestions(container: HTMLElement): void {
    const sent = state.current!;
    for (const sug of visibleSuggestions(state.suggestions, state.confidenceThreshold)) {
      const row = el("div", { class: "suggestion" });
      const text = sent.tokens.slice(sug.start, sug.end).join(" ");
      const chip = el("span", {}, `${text} [${sug.type}] ${(sug.confidence * 100).toFixed(1)}%`);
      chip.style.background = shade(TYPE_COLORS[sug.type], sug.confidence);
      const accept = el("button", {}, "accept");
      accept.addEventListener("click", () => {
        const result = acceptSuggestion(state.draft, sug, sent.tokens.length);
        if (result.ok) {
          state.draft = result.spans;
          state.message = "";
        } else {
          state.message = result.reason;
        }
        render();
      });
      row.append(chip, accept);
      container.appendChild(row);
    }
  }

  function render(): void {
    root.textContent = "";
    if (state.offline) {
      root.appendChild(el("div", { class: "banner offline" },
        "service unreachable; your draft is kept locally, retry when back online"));
    }
    if (state.message) {
      root.appendChild(el("div", { class: "banner" }, state.message));
    }

    const controls = el("div", { class: "controls" });
    const filter = el("select") as HTMLSelectElement;
    for (const opt of ["", "unannotated", ...STATUSES]) {
      filter.appendChild(el("option", { value: opt }, opt || "all statuses"));
    }
    filter.value = state.statusFilter;
    filter.addEventListener("change", () => {
      state.statusFilter = filter.value;
      state.page = 1;
      void refreshList();
    });
    const exportLink = el("a", { href: api.exportUrl(state.annotator) },
      "export my layer (CoNLL)");
    controls.append(filter, exportLink);
    root.appendChild(controls);

    const list = el("ul", { class: "sentences" });
    for (const sent of state.sentences) {
      const item = el("li");
      const link = el("button", {}, `${sent.sent_id} [${sent.status}] `
        + sent.tokens.slice(0, 8).join(" "));
      link.addEventListener("click", () => void open(sent.sent_id));
      item.appendChild(link);
      list.appendChild(item);
    }
    root.appendChild(list);

    const pages = Math.max(1, Math.ceil(state.total / PAGE_SIZE));
    const pager = el("div", { class: "pager" }, `page ${state.page} / ${pages}`);
    const prev = el("button", {}, "prev");
    const next = el("button", {}, "next");
    prev.addEventListener("click", () => {
      if (state.page > 1) { state.page--; void refreshList(); }
    });
    next.addEventListener("click", () => {
      if (state.page < pages) { state.page++; void refreshList(); }
    });
    pager.prepend(prev);
    pager.appendChild(next);
    root.appendChild(pager);

    if (!state.current) return;
    const sent = state.current;

    const editor = el("div", { class: "editor" });
    editor.appendChild(el("h2", {}, `${sent.sent_id} (${sent.doc_id}) — ${state.draftStatus}`));
    editor.appendChild(el("p", { class: "hint" },
      "click a token (shift-click to extend), then press M/P/R/C to label; x removes"));
    const tokens = el("div", { class: "tokens" });
    renderTokens(tokens);
    editor.appendChild(tokens);

    const actions = el("div", { class: "actions" });
    for (const [labelText, status] of [
      ["save draft", "draft"],
      ["submit", "submitted"],
      ["mark reviewed", "reviewed"],
    ] as const) {
      const btn = el("button", {}, labelText);
      btn.addEventListener("click", () => void save(status));
      actions.appendChild(btn);
    }
    const sugBtn = el("button", {}, "suggest");
    sugBtn.addEventListener("click", () => void suggest());
    actions.appendChild(sugBtn);
    editor.appendChild(actions);

    const threshold = el("input", {
      type: "range", min: "0", max: "1", step: "0.05",
      value: String(state.confidenceThreshold),
    }) as HTMLInputElement;
    threshold.addEventListener("input", () => {
      state.confidenceThreshold = Number(threshold.value);
      render();
    });
    const thresholdRow = el("label", {},
      `hide suggestions below ${state.confidenceThreshold.toFixed(2)} `);
    thresholdRow.appendChild(threshold);
    editor.appendChild(thresholdRow);

    const suggestions = el("div", { class: "suggestions" });
    renderSuggestions(suggestions);
    editor.appendChild(suggestions);

    if (state.showOtherLayers) {
      const layers = el("div", { class: "layers" });
      layers.appendChild(el("h3", {}, "other layers"));
      for (const [who, layer] of Object.entries(sent.annotations)) {
        if (who === state.annotator) continue;
        const row = el("div", {},
          `${who} [${layer.status}]: ${layer.spans.length} spans `);
        const diffBtn = el("button", {},
          state.diffWith === who ? "hide diff" : "diff with mine");
        diffBtn.addEventListener("click", () => {
          state.diffWith = state.diffWith === who ? null : who;
          render();
        });
        row.appendChild(diffBtn);
        layers.appendChild(row);
      }
      editor.appendChild(layers);
    }
    const toggle = el("button", {},
      state.showOtherLayers ? "hide other layers" : "show other layers");
    toggle.addEventListener("click", () => {
      state.showOtherLayers = !state.showOtherLayers;
      render();
    });
    editor.appendChild(toggle);
    root.appendChild(editor);
  }

  document.addEventListener("keydown", onKey);
  render();
  void refreshList();
}
