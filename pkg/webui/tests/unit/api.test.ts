import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../../src/api.js";
import { jsonResponse, routeFetch, turnResult } from "../helpers.js";

describe("ApiClient", () => {
  it("creates sessions with POST /api/sessions", async () => {
    const fetchImpl = routeFetch(() =>
      jsonResponse(200, { session_id: "abc", greeting: "Hello" }),
    );
    const client = new ApiClient("http://server", fetchImpl);
    const created = await client.createSession();
    expect(created).toEqual({ session_id: "abc", greeting: "Hello" });
    expect(fetchImpl.requests).toEqual([
      { url: "http://server/api/sessions", method: "POST", body: undefined },
    ]);
  });

  it("sends messages as JSON to the session's messages endpoint", async () => {
    const result = turnResult();
    const fetchImpl = routeFetch(() => jsonResponse(200, result));
    const client = new ApiClient("http://server/", fetchImpl);
    const got = await client.sendMessage("abc", "hi there");
    expect(got).toEqual(result);
    expect(fetchImpl.requests[0]).toEqual({
      url: "http://server/api/sessions/abc/messages",
      method: "POST",
      body: { text: "hi there" },
    });
  });

  it("percent-encodes session ids in paths", async () => {
    const fetchImpl = routeFetch(() => jsonResponse(200, {}));
    await new ApiClient("", fetchImpl).getState("a/b");
    expect(fetchImpl.requests[0]!.url).toBe("/api/sessions/a%2Fb/state");
  });

  it("unwraps the server error envelope into ApiError", async () => {
    const fetchImpl = routeFetch(() =>
      jsonResponse(404, { error: { type: "unknown_session", message: "no session 'x'" } }),
    );
    const error = await new ApiClient("", fetchImpl).getState("x").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(404);
    expect(error.kind).toBe("unknown_session");
    expect(error.message).toBe("no session 'x'");
  });

  it("falls back to a status-derived message for non-JSON error bodies", async () => {
    const fetchImpl = routeFetch(() => ({
      ok: false,
      status: 500,
      json: async () => {
        throw new Error("not json");
      },
    }));
    const error = await new ApiClient("", fetchImpl).health().catch((e) => e);
    expect(error.kind).toBe("http_500");
    expect(error.message).toContain("500");
  });

  it("maps transport failures to status 0 / kind network", async () => {
    const fetchImpl = routeFetch(() => {
      throw new Error("ECONNREFUSED");
    });
    const error = await new ApiClient("", fetchImpl).createSession().catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(0);
    expect(error.kind).toBe("network");
    expect(error.message).toContain("ECONNREFUSED");
  });

  it("treats 204 responses as empty successes", async () => {
    const fetchImpl = routeFetch(() => ({
      ok: true,
      status: 204,
      json: async () => {
        throw new Error("no body");
      },
    }));
    await expect(new ApiClient("", fetchImpl).deleteSession("abc")).resolves.toBeUndefined();
    expect(fetchImpl.requests[0]!.method).toBe("DELETE");
  });
});
