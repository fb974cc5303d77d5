/** Thin typed client over the convrec service endpoints. */

import type {
  DialogueStateJson,
  HealthJson,
  SessionCreatedJson,
  TurnResultJson,
} from "./types.js";

export class ApiError extends Error {
  /** HTTP status, or 0 when the request never reached the server. */
  readonly status: number;
  /** Error type from the server envelope, or "network". */
  readonly kind: string;

  constructor(status: number, kind: string, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.kind = kind;
  }
}

/** Structural subset of fetch/Response the client needs; lets tests inject
 * transports without a full DOM Response. */
export interface ResponseLike {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export interface RequestInitLike {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

export type FetchLike = (input: string, init?: RequestInitLike) => Promise<ResponseLike>;

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl: FetchLike = (...args) => fetch(...args)) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  async health(): Promise<HealthJson> {
    return this.request<HealthJson>("GET", "/api/health");
  }

  async createSession(): Promise<SessionCreatedJson> {
    return this.request<SessionCreatedJson>("POST", "/api/sessions");
  }

  async sendMessage(sessionId: string, text: string): Promise<TurnResultJson> {
    return this.request<TurnResultJson>(
      "POST",
      `/api/sessions/${encodeURIComponent(sessionId)}/messages`,
      { text },
    );
  }

  async getState(sessionId: string): Promise<DialogueStateJson> {
    return this.request<DialogueStateJson>(
      "GET",
      `/api/sessions/${encodeURIComponent(sessionId)}/state`,
    );
  }

  async deleteSession(sessionId: string): Promise<void> {
    await this.request<void>("DELETE", `/api/sessions/${encodeURIComponent(sessionId)}`);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: ResponseLike;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (exc) {
      throw new ApiError(0, "network", `cannot reach server: ${String(exc)}`);
    }
    if (response.status === 204) {
      return undefined as T;
    }
    if (!response.ok) {
      throw await this.envelopeError(response);
    }
    return (await response.json()) as T;
  }

  private async envelopeError(response: ResponseLike): Promise<ApiError> {
    let kind = `http_${response.status}`;
    let message = `request failed with status ${response.status}`;
    try {
      const payload = (await response.json()) as { error?: { type?: string; message?: string } };
      if (payload.error) {
        kind = payload.error.type ?? kind;
        message = payload.error.message ?? message;
      }
    } catch {
      // non-JSON error body; keep the status-derived message
    }
    return new ApiError(response.status, kind, message);
  }
}
