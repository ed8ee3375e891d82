/**
 * Typed client for the onboarding session API.
 *
 * Every method performs exactly one HTTP request and returns the parsed
 * body; all flow decisions belong to the caller.  The base URL comes from
 * the page at runtime, so the same static build can sit behind any origin
 * or path prefix.
 */

export interface ItemCard {
  item: number;
  external_id: string;
  title: string;
  year: number | null;
  genres: string[];
  poster_url: string | null;
  abstract: string | null;
}

export interface SessionDoc {
  session_id: string;
  phase: "questioning" | "recommending" | "done";
  answered: number;
  total: number;
  question: ItemCard | null;
}

export interface RecommendationDoc {
  session_id: string;
  phase: string;
  items: ItemCard[];
}

export type Verdict = "bad" | "good" | "very_good" | "dont_know";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.base + path, init);
    const text = await resp.text();
    const doc: unknown = text ? JSON.parse(text) : null;
    if (!resp.ok) {
      const detail =
        doc !== null && typeof doc === "object" && "detail" in doc && typeof doc.detail === "string"
          ? doc.detail
          : `HTTP ${resp.status}`;
      throw new ApiError(resp.status, detail);
    }
    return doc as T;
  }

  /** Open a session; the server decides everything about it. */
  createSession(): Promise<SessionDoc> {
    return this.request("POST", "/sessions", {});
  }

  getQuestion(sessionId: string): Promise<SessionDoc> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/question`);
  }

  /** Rating 1 to 5 from the stars; 0 means "don't know". */
  submitAnswer(sessionId: string, item: number, rating: number): Promise<SessionDoc> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/answers`, {
      item,
      rating,
    });
  }

  getRecommendations(sessionId: string): Promise<RecommendationDoc> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/recommendations`);
  }

  submitFeedback(sessionId: string, item: number, verdict: Verdict): Promise<{ ok: boolean }> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/feedback`, {
      item,
      verdict,
    });
  }

  getItem(externalId: string): Promise<ItemCard> {
    return this.request("GET", `/items/${encodeURIComponent(externalId)}`);
  }
}

/**
 * Resolve the API origin for this deployment.
 *
 * Checks a `SLIMBOARD_API_BASE` global (set by a deploy-time snippet),
 * then a `<meta name="slimboard-api-base">` tag.  Empty string means
 * same origin, which is the default when the service serves these assets
 * itself.
 */
export function apiBaseFromDocument(doc: Document): string {
  const override = (globalThis as { SLIMBOARD_API_BASE?: unknown }).SLIMBOARD_API_BASE;
  if (typeof override === "string") {
    return override.replace(/\/+$/, "");
  }
  const meta = doc.querySelector('meta[name="slimboard-api-base"]');
  return (meta?.getAttribute("content") ?? "").replace(/\/+$/, "");
}
