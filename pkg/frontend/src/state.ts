/**
 * Session state assembly. The server is the source of truth: the state
 * here is a mirror of the latest server replies plus purely visual
 * derivations (max-normalized highlight intensities). Mutating calls are
 * serialized so one apply/undo is in flight per session at a time.
 */

import {
  ApiError,
  Candidate,
  SaliencyReply,
  ServiceUnreachable,
  SessionView,
  Snippet,
  StepView,
  WorkbenchClient,
} from "./api.js";

export interface TokenHighlight {
  word: string;
  /** per-document max-normalized, in [0, 1] */
  intensity: number;
  /** absolute server score, shown on hover */
  score: number;
}

export interface WorkbenchState {
  sessionId: string;
  model: string;
  text: string;
  originalText: string;
  target: string;
  mode: string;
  classes: string[];
  conf: number[];
  highlights: TokenHighlight[];
  suggestions: Candidate[];
  steps: StepView[];
  canUndo: boolean;
  /** transient user-facing message (stale suggestions, errors) */
  notice: string | null;
  /** service unreachable: block interaction behind a banner */
  offline: boolean;
}

/** Max-normalize server scores into [0, 1] highlight intensities. */
export function normalizeHighlights(tokens: string[], scores: number[]): TokenHighlight[] {
  const top = scores.reduce((m, s) => Math.max(m, s), 0);
  return tokens.map((word, i) => {
    const score = scores[i] ?? 0;
    const intensity = top > 0 ? Math.max(0, Math.min(1, score / top)) : 0;
    return { word, intensity, score };
  });
}

export class WorkbenchSession {
  state: WorkbenchState;
  /** pending mutation chain: apply/undo run strictly one after another */
  private queue: Promise<void> = Promise.resolve();

  private constructor(
    private readonly client: WorkbenchClient,
    view: SessionView,
    saliency: SaliencyReply,
  ) {
    this.state = {
      sessionId: view.session,
      model: view.model,
      text: view.text,
      originalText: view.original_text,
      target: view.target,
      mode: view.mode,
      classes: view.classes,
      conf: view.conf,
      highlights: normalizeHighlights(saliency.tokens, saliency.scores),
      suggestions: [],
      steps: view.steps,
      canUndo: view.can_undo,
      notice: null,
      offline: false,
    };
  }

  static async open(
    client: WorkbenchClient,
    model: string,
    text: string,
    target: string,
    mode = "white",
  ): Promise<WorkbenchSession> {
    const view = await client.createSession(model, text, target, mode);
    const saliency = await client.saliency(model, view.text, mode);
    return new WorkbenchSession(client, view, saliency);
  }

  static async resume(client: WorkbenchClient, sessionId: string): Promise<WorkbenchSession> {
    const view = await client.getSession(sessionId);
    const saliency = await client.saliency(view.model, view.text, view.mode);
    return new WorkbenchSession(client, view, saliency);
  }

  /** Re-mirror the server view and its saliency for the current text. */
  async refresh(): Promise<void> {
    await this.guard(async () => {
      const view = await this.client.getSession(this.state.sessionId);
      await this.adopt(view);
    });
  }

  async requestSuggestions(strategies: string[], target?: string, snippets?: Snippet[]): Promise<void> {
    await this.guard(async () => {
      const reply = await this.client.suggest(this.state.sessionId, strategies, target, snippets);
      this.state.target = reply.target;
      this.state.suggestions = reply.candidates;
      this.state.notice = reply.candidates.length === 0
        ? "no candidates for the chosen strategies"
        : null;
    });
  }

  async applyCandidate(id: string): Promise<void> {
    await this.mutate(async () => {
      try {
        const view = await this.client.apply(this.state.sessionId, id);
        await this.adopt(view);
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          // stale candidate: the text moved on; re-fetch suggestions
          const reply = await this.client.suggest(this.state.sessionId, ["insert", "modify", "remove"]);
          this.state.suggestions = reply.candidates;
          this.state.notice = "suggestions were stale and have been refreshed";
          return;
        }
        throw err;
      }
    });
  }

  async undo(): Promise<void> {
    await this.mutate(async () => {
      const view = await this.client.undo(this.state.sessionId);
      await this.adopt(view);
    });
  }

  /** User-supplied insertion text, scored server-side before display. */
  async submitSnippet(text: string, offset: number): Promise<void> {
    await this.requestSuggestions(["insert"], undefined, [{ text, offset }]);
  }

  /** Mirror a fresh server view; suggestions are invalidated by design. */
  private async adopt(view: SessionView): Promise<void> {
    const saliency = await this.client.saliency(view.model, view.text, view.mode);
    this.state.text = view.text;
    this.state.conf = view.conf;
    this.state.steps = view.steps;
    this.state.canUndo = view.can_undo;
    this.state.target = view.target;
    this.state.highlights = normalizeHighlights(saliency.tokens, saliency.scores);
    this.state.suggestions = [];
    this.state.notice = null;
  }

  private mutate(action: () => Promise<void>): Promise<void> {
    const next = this.queue.then(() => this.guard(action));
    // keep the chain alive even when a mutation rejects
    this.queue = next.catch(() => undefined);
    return next;
  }

  private async guard(action: () => Promise<void>): Promise<void> {
    try {
      await action();
      this.state.offline = false;
    } catch (err) {
      if (err instanceof ServiceUnreachable) {
        this.state.offline = true;
        return;
      }
      if (err instanceof ApiError) {
        this.state.notice = err.message;
        return;
      }
      throw err;
    }
  }
}
