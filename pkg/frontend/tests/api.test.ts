import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, apiBaseFromDocument } from "../src/api.js";
import { FakeServer } from "./fake-server.js";

describe("ApiClient", () => {
  it("hits the documented paths with the documented bodies", async () => {
    const server = new FakeServer();
    const api = new ApiClient("", server.fetch);

    const doc = await api.createSession();
    await api.getQuestion(doc.session_id);
    await api.submitAnswer(doc.session_id, doc.question!.item, 4);

    expect(server.calls.map((c) => `${c.method} ${c.path}`)).toEqual([
      "POST /sessions",
      `GET /sessions/${doc.session_id}/question`,
      `POST /sessions/${doc.session_id}/answers`,
    ]);
    expect(server.calls[0]!.body).toEqual({});
    expect(server.calls[2]!.body).toEqual({ item: doc.question!.item, rating: 4 });
  });

  it("performs exactly one request per method call", async () => {
    const server = new FakeServer([2], [5]);
    const api = new ApiClient("", server.fetch);

    const doc = await api.createSession();
    await api.submitAnswer(doc.session_id, 2, 0);
    await api.getRecommendations(doc.session_id);
    await api.submitFeedback(doc.session_id, 5, "good");

    expect(server.calls).toHaveLength(4);
  });

  it("prefixes every path with the configured base", async () => {
    const seen: string[] = [];
    const api = new ApiClient("https://api.example:9000", async (url) => {
      seen.push(url);
      return new Response(JSON.stringify({ detail: "nope" }), { status: 404 });
    });
    await expect(api.getItem("42")).rejects.toThrow(ApiError);
    expect(seen).toEqual(["https://api.example:9000/items/42"]);
  });

  it("turns error bodies into ApiError with the server's detail", async () => {
    const server = new FakeServer();
    const api = new ApiClient("", server.fetch);
    const doc = await api.createSession();

    const err = await api.submitAnswer(doc.session_id, 999, 3).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(409);
    expect((err as ApiError).message).toContain("pending question");
  });

  it("falls back to the status code when the body has no detail", async () => {
    const api = new ApiClient("", async () => new Response("", { status: 500 }));
    const err = await api.createSession().catch((e: unknown) => e);
    expect((err as ApiError).message).toBe("HTTP 500");
  });
});

describe("apiBaseFromDocument", () => {
  it("reads the meta tag and strips trailing slashes", () => {
    document.head.innerHTML = '<meta name="slimboard-api-base" content="http://api.local:8000/" />';
    expect(apiBaseFromDocument(document)).toBe("http://api.local:8000");
  });

  it("defaults to same origin when nothing is configured", () => {
    document.head.innerHTML = "";
    expect(apiBaseFromDocument(document)).toBe("");
  });

  it("prefers the global override", () => {
    document.head.innerHTML = '<meta name="slimboard-api-base" content="http://meta.local" />';
    (globalThis as { SLIMBOARD_API_BASE?: string }).SLIMBOARD_API_BASE = "http://global.local";
    try {
      expect(apiBaseFromDocument(document)).toBe("http://global.local");
    } finally {
      delete (globalThis as { SLIMBOARD_API_BASE?: string }).SLIMBOARD_API_BASE;
    }
  });
});
