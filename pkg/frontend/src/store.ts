import { ApiClient, ApiRequestError } from "./api.js";
import type { Chain, DeviationResponse, Verdict } from "./types.js";

/** Screen state. Everything here is a pure function of server responses
 * and user events; replaying the same events reproduces the screen. */
export interface ViewState {
  form: {
    partRef: string;
    currentDefinition: string;
    requestedDeviation: string;
  };
  phase: "idle" | "loading" | "ready" | "error";
  errorMessage: string | null;
  suggestions: string[]; // clickable part candidates from a 404
  retryable: boolean; // 503 banner
  result: DeviationResponse | null;
  expanded: Set<number>; // failure ids with an open explanation panel
  explanations: Map<number, Chain>; // fetched once per failure, then cached
  explanationPending: Set<number>;
  verdicts: Map<number, Verdict>; // last-sent verdict per item node id
  itemErrors: Map<number, string>;
  riskEvaluation: string; // grows via insertions or manual edit only
  justificationDrafts: Map<number, string>;
}

function initialState(): ViewState {
  return {
    form: { partRef: "", currentDefinition: "", requestedDeviation: "" },
    phase: "idle",
    errorMessage: null,
    suggestions: [],
    retryable: false,
    result: null,
    expanded: new Set(),
    explanations: new Map(),
    explanationPending: new Set(),
    verdicts: new Map(),
    itemErrors: new Map(),
    riskEvaluation: "",
    justificationDrafts: new Map(),
  };
}

type Listener = (state: ViewState) => void;

export class AppStore {
  private state: ViewState = initialState();
  private listeners: Listener[] = [];
  private requestSeq = 0; // in-flight responses are matched by id to avoid stale rendering

  constructor(private readonly api: ApiClient) {}

  getState(): ViewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  /** Form edits don't re-render (the inputs already hold the value). */
  setField(field: keyof ViewState["form"], value: string): void {
    this.state.form[field] = value;
  }

  editRiskEvaluation(text: string): void {
    this.state.riskEvaluation = text;
  }

  async submit(): Promise<void> {
    const { partRef, requestedDeviation, currentDefinition } = this.state.form;
    if (!partRef.trim() || !requestedDeviation.trim()) {
      this.state.phase = "error";
      this.state.errorMessage = "Part and requested deviation are required.";
      this.state.suggestions = [];
      this.state.retryable = false;
      this.emit();
      return;
    }
    const requestId = ++this.requestSeq;
    this.state.phase = "loading";
    this.state.errorMessage = null;
    this.state.suggestions = [];
    this.state.retryable = false;
    this.emit();
    try {
      const result = await this.api.submitDeviation({
        part_ref: partRef,
        requested_deviation: requestedDeviation,
        current_definition: currentDefinition,
      });
      if (requestId !== this.requestSeq) return; // a newer submit superseded this one
      this.state.result = result;
      this.state.phase = "ready";
      this.state.expanded = new Set();
      this.state.explanations = new Map();
      this.state.explanationPending = new Set();
      this.state.verdicts = new Map();
      this.state.itemErrors = new Map();
      this.state.justificationDrafts = new Map();
    } catch (error) {
      if (requestId !== this.requestSeq) return;
      this.state.phase = "error";
      if (error instanceof ApiRequestError) {
        this.state.errorMessage = error.message;
        if (error.status === 404) {
          const suggestions = error.details["suggestions"];
          this.state.suggestions = Array.isArray(suggestions)
            ? suggestions.map(String)
            : [];
        } else if (error.status === 503) {
          this.state.retryable = true;
        }
      } else {
        this.state.errorMessage = String(error);
      }
    }
    this.emit();
  }

  /** Clicking a 404 suggestion adopts it as the part and resubmits. */
  async selectSuggestion(name: string): Promise<void> {
    this.state.form.partRef = name;
    await this.submit();
  }

  /** Explanations fetch lazily and exactly once per failure. */
  async toggleExplanation(failureId: number): Promise<void> {
    if (this.state.expanded.has(failureId)) {
      this.state.expanded.delete(failureId);
      this.emit();
      return;
    }
    this.state.expanded.add(failureId);
    const cached = this.state.explanations.has(failureId);
    const pending = this.state.explanationPending.has(failureId);
    this.emit();
    if (cached || pending || !this.state.result) return;
    const deviationId = this.state.result.deviation_id;
    this.state.explanationPending.add(failureId);
    try {
      const chain = await this.api.explanation(failureId, deviationId);
      if (this.state.result?.deviation_id !== deviationId) return; // stale
      this.state.explanations.set(failureId, chain);
    } catch (error) {
      this.state.itemErrors.set(failureId, String(error));
      this.state.expanded.delete(failureId);
    } finally {
      this.state.explanationPending.delete(failureId);
    }
    this.emit();
  }

  /** Optimistic verdict: paint immediately, roll back if the POST fails. */
  async sendFeedback(itemId: number, verdict: Verdict): Promise<void> {
    if (!this.state.result) return;
    const previous = this.state.verdicts.get(itemId);
    this.state.verdicts.set(itemId, verdict);
    this.state.itemErrors.delete(itemId);
    this.emit();
    try {
      await this.api.sendFeedback({
        deviation_id: this.state.result.deviation_id,
        item_ref: itemId,
        verdict,
      });
    } catch (error) {
      if (previous === undefined) {
        this.state.verdicts.delete(itemId);
      } else {
        this.state.verdicts.set(itemId, previous);
      }
      this.state.itemErrors.set(itemId, String(error));
      this.emit();
    }
  }

  setJustification(failureId: number, text: string): void {
    this.state.justificationDrafts.set(failureId, text);
  }

  /** The server-rendered block is appended verbatim; the server is the
   * source of truth for the text. */
  async insertRiskText(failureId: number): Promise<void> {
    if (!this.state.result) return;
    const justification = this.state.justificationDrafts.get(failureId) ?? "";
    try {
      const { text } = await this.api.riskText({
        deviation_id: this.state.result.deviation_id,
        failure_id: failureId,
        justification: justification.trim() ? justification : null,
      });
      this.state.riskEvaluation += text;
      this.state.verdicts.set(failureId, "useful");
      this.state.itemErrors.delete(failureId);
    } catch (error) {
      this.state.itemErrors.set(failureId, String(error));
    }
    this.emit();
  }
}
