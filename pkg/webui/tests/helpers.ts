/** Shared test helpers: canned in-memory fetch and wire-payload builders. */

import type { FetchLike, RequestInitLike, ResponseLike } from "../src/api.js";
import type {
  DialogueStateJson,
  ScoredItemJson,
  TurnResultJson,
} from "../src/types.js";
import { emptyState } from "../src/types.js";

export function jsonResponse(status: number, body?: unknown): ResponseLike {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => {
      if (body === undefined) {
        throw new Error("no body");
      }
      return body;
    },
  };
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

/** Route requests to a handler; records every request it sees. */
export function routeFetch(
  handler: (url: string, init?: RequestInitLike) => ResponseLike | Promise<ResponseLike>,
): FetchLike & { requests: RecordedRequest[] } {
  const requests: RecordedRequest[] = [];
  const impl = async (url: string, init?: RequestInitLike): Promise<ResponseLike> => {
    requests.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body === undefined ? undefined : JSON.parse(init.body),
    });
    return handler(url, init);
  };
  return Object.assign(impl, { requests });
}

export function scoredItem(overrides: Partial<ScoredItemJson> = {}): ScoredItemJson {
  return {
    item_id: "washoku_bistro",
    name: "Washoku Bistro",
    fused_score: 0.42,
    evidence: [
      { doc_id: "review:r1", kind: "review", score: 0.5, text: "Great sushi downtown." },
      { doc_id: "meta:washoku_bistro", kind: "metadata", score: 0.45, text: "cuisine: Japanese" },
      { doc_id: "review:r2", kind: "review", score: 0.4, text: "Calm and stylish." },
    ],
    ...overrides,
  };
}

export function turnResult(overrides: Partial<TurnResultJson> = {}): TurnResultJson {
  return {
    response_text: "What kind of cuisine are you looking for?",
    action: { type: "request_information", subkey: "cuisine_type" },
    intents: ["provide_preference"],
    state_snapshot: emptyState(),
    diagnostics: null,
    ...overrides,
  };
}

export function stateWith(partial: Partial<DialogueStateJson>): DialogueStateJson {
  return { ...emptyState(), ...partial };
}

/** Deferred promise for holding a request in flight until the test releases it. */
export function deferred<T>(): { promise: Promise<T>; resolve: (value: T) => void } {
  let resolve!: (value: T) => void;
  const promise = new Promise<T>((r) => {
    resolve = r;
  });
  return { promise, resolve };
}

export async function flushMicrotasks(): Promise<void> {
  await new Promise((r) => setTimeout(r, 0));
}
