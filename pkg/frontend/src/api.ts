// Typed client for the evaluation service JSON API. This is the only place
// the frontend talks to the network; everything else works on the returned
// view objects.

export interface TurnView {
  speaker: string;
  text: string;
}

export interface SessionView {
  session_id: string;
  state: "chatting" | "awaiting_scores" | "closed";
  min_turns: number;
  pairs_completed: number;
  your_persona: string[];
  turns: TurnView[];
}

export interface Questionnaire {
  overall: string;
  good: string;
  bad: string;
}

export interface AnnotationPayload {
  overall: number;
  good_pairs: boolean[];
  bad_pairs: boolean[];
}

// the full stored record is opaque to the UI; it only confirms storage
export type TranscriptRecord = Record<string, unknown>;

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`service error ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText || "request failed";
  }
}

export class EvalClient {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const options: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      options.headers = { "Content-Type": "application/json" };
      options.body = JSON.stringify(body);
    }
    const response = await fetch(`${this.baseUrl}${path}`, options);
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  questionnaire(): Promise<Questionnaire> {
    return this.request("GET", "/questionnaire");
  }

  createSession(annotatorId: string): Promise<SessionView> {
    return this.request("POST", "/sessions", { annotator_id: annotatorId });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  postMessage(sessionId: string, text: string): Promise<SessionView> {
    return this.request("POST", `/sessions/${sessionId}/messages`, { text });
  }

  finish(sessionId: string): Promise<SessionView> {
    return this.request("POST", `/sessions/${sessionId}/finish`);
  }

  submitAnnotation(sessionId: string, payload: AnnotationPayload): Promise<TranscriptRecord> {
    return this.request("POST", `/sessions/${sessionId}/annotation`, payload);
  }
}
