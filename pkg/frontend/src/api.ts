/**
 * Typed client for the workbench service JSON API. Every method returns
 * the parsed server reply untouched: the UI never derives confidences or
 * saliency locally, it only relays what the server said.
 */

export interface PerturbationView {
  kind: "insert" | "modify" | "remove";
  start: number;
  end: number;
  original: string;
  payload: string;
  method: string;
  provenance: string;
}

export interface StepView {
  perturbation: PerturbationView;
  conf_before: number[];
  conf_after: number[];
}

export interface SessionView {
  session: string;
  model: string;
  text: string;
  original_text: string;
  target: string;
  mode: string;
  classes: string[];
  conf: number[];
  steps: StepView[];
  can_undo: boolean;
  version: number;
}

export interface Candidate {
  id: string;
  gain: number;
  conf_after: number[];
  changed_chars: number;
  perturbation: PerturbationView;
}

export interface SuggestReply {
  target: string;
  candidates: Candidate[];
}

export interface HotSpanView {
  start: number;
  end: number;
  surface: string;
  score: number;
  kind: string;
}

export interface SaliencyReply {
  tokens: string[];
  scores: number[];
  hsps: HotSpanView[];
}

export interface ClassifyReply {
  classes: string[];
  probs: number[];
}

export interface Snippet {
  text: string;
  offset: number;
}

export type Fetcher = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
  }
}

export class ServiceUnreachable extends Error {}

/** Raw reply record kept for traceability assertions in tests. */
export interface InterceptedReply {
  method: string;
  path: string;
  body: unknown;
}

export class WorkbenchClient {
  /** Every parsed reply, in arrival order. */
  readonly intercepted: InterceptedReply[] = [];

  constructor(
    private readonly baseUrl: string,
    private readonly fetcher: Fetcher = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetcher(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ServiceUnreachable(String(err));
    }
    let parsed: unknown;
    try {
      parsed = await response.json();
    } catch {
      throw new ApiError(response.status, "reply was not JSON");
    }
    if (!response.ok) {
      const message = (parsed as { error?: string }).error ?? `HTTP ${response.status}`;
      throw new ApiError(response.status, message);
    }
    this.intercepted.push({ method, path, body: parsed });
    return parsed as T;
  }

  classify(model: string, text: string): Promise<ClassifyReply> {
    return this.request("POST", `/models/${model}/classify`, { text });
  }

  saliency(model: string, text: string, mode: string): Promise<SaliencyReply> {
    return this.request("POST", `/models/${model}/saliency`, { text, mode });
  }

  createSession(model: string, text: string, target: string, mode: string): Promise<SessionView> {
    return this.request("POST", "/sessions", { model, text, target, mode });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${id}`);
  }

  suggest(
    id: string,
    strategies: string[],
    target?: string,
    snippets?: Snippet[],
  ): Promise<SuggestReply> {
    const body: Record<string, unknown> = { strategies };
    if (target !== undefined) body.target = target;
    if (snippets !== undefined && snippets.length > 0) body.snippets = snippets;
    return this.request("POST", `/sessions/${id}/suggest`, body);
  }

  apply(id: string, candidateId: string): Promise<SessionView> {
    return this.request("POST", `/sessions/${id}/apply`, { candidate_id: candidateId });
  }

  undo(id: string): Promise<SessionView> {
    return this.request("POST", `/sessions/${id}/undo`);
  }

  htpTable(model: string, cls: string): Promise<{ class: string; entries: unknown[] }> {
    return this.request("GET", `/htp/${model}/${encodeURIComponent(cls)}`);
  }
}
