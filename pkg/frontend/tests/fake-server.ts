/**
 * In-memory stand-in for the session API, faithful to its JSON contract:
 * same paths, bodies, status codes and `detail` error shape.  Records
 * every request it actually saw so tests can assert the one-call-per-
 * gesture rule, and can inject failures or hold responses open.
 */

import type { FetchLike, ItemCard, Verdict } from "../src/api.js";

export interface SeenCall {
  method: string;
  path: string;
  body: unknown;
}

interface FakeSession {
  id: string;
  answered: Array<{ item: number; rating: number }>;
  recommendations: number[] | null;
  feedback: Map<number, Verdict>;
}

const VERDICTS: ReadonlySet<string> = new Set(["bad", "good", "very_good", "dont_know"]);

export class FakeServer {
  calls: SeenCall[] = [];
  /** Requests to reject before they reach the handler, like a dead network. */
  failNext = 0;

  private sessions = new Map<string, FakeSession>();
  private nextId = 1;
  private gate: Promise<void> | null = null;
  private release: (() => void) | null = null;

  constructor(
    readonly questionOrder: number[] = [7, 3, 11, 5],
    // deliberately not sorted: rendering must keep this exact order
    readonly recommendationList: number[] = [9, 2, 14],
  ) {}

  /** Hold every response until resume() is called. */
  pause(): void {
    this.gate = new Promise((resolve) => {
      this.release = resolve;
    });
  }

  resume(): void {
    this.release?.();
    this.gate = null;
    this.release = null;
  }

  card(item: number): ItemCard {
    return {
      item,
      external_id: String(item + 1),
      title: `Feature No. ${item + 1}`,
      year: 1990 + item,
      genres: ["Drama"],
      poster_url: null,
      abstract: null,
    };
  }

  callSignatures(): string[] {
    return this.calls.map((c) => `${c.method} ${c.path.replace(/s-\d+/, "{sid}")}`);
  }

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    if (this.failNext > 0) {
      this.failNext -= 1;
      throw new TypeError("fetch failed");
    }
    if (this.gate) {
      await this.gate;
    }
    const body: unknown = init?.body ? JSON.parse(init.body as string) : undefined;
    this.calls.push({ method, path, body });
    return this.route(method, path, body);
  };

  private json(status: number, doc: unknown): Response {
    return new Response(JSON.stringify(doc), {
      status,
      headers: { "content-type": "application/json" },
    });
  }

  private error(status: number, detail: string): Response {
    return this.json(status, { detail });
  }

  private questionDoc(session: FakeSession) {
    const answered = session.answered.length;
    const total = this.questionOrder.length;
    const pending = answered < total ? this.questionOrder[answered]! : null;
    return {
      session_id: session.id,
      phase: answered < total ? "questioning" : session.recommendations ? "done" : "recommending",
      answered,
      total,
      question: pending === null ? null : this.card(pending),
    };
  }

  private route(method: string, path: string, body: unknown): Response {
    if (method === "POST" && path === "/sessions") {
      const session: FakeSession = {
        id: `s-${this.nextId}`,
        answered: [],
        recommendations: null,
        feedback: new Map(),
      };
      this.nextId += 1;
      this.sessions.set(session.id, session);
      return this.json(201, this.questionDoc(session));
    }

    const match = /^\/sessions\/([^/]+)\/(question|answers|recommendations|feedback)$/.exec(path);
    if (!match) {
      return this.error(404, "no such route");
    }
    const session = this.sessions.get(match[1]!);
    if (!session) {
      return this.error(404, "unknown session");
    }

    switch (match[2]) {
      case "question":
        return this.json(200, this.questionDoc(session));

      case "answers": {
        const { item, rating } = body as { item: number; rating: number };
        const pending = this.questionOrder[session.answered.length];
        if (pending === undefined) {
          return this.error(409, "session is no longer accepting answers");
        }
        if (item !== pending) {
          return this.error(409, `item ${item} is not the pending question (${pending})`);
        }
        if (![0, 1, 2, 3, 4, 5].includes(rating)) {
          return this.error(400, "rating must be an integer from 0 to 5");
        }
        session.answered.push({ item, rating });
        return this.json(200, this.questionDoc(session));
      }

      case "recommendations": {
        if (session.answered.length < this.questionOrder.length) {
          return this.error(409, "session is still asking questions");
        }
        session.recommendations ??= [...this.recommendationList];
        return this.json(200, {
          session_id: session.id,
          phase: "done",
          items: session.recommendations.map((i) => this.card(i)),
        });
      }

      case "feedback": {
        const { item, verdict } = body as { item: number; verdict: string };
        if (!session.recommendations) {
          return this.error(409, "recommendations were not issued yet");
        }
        if (!VERDICTS.has(verdict)) {
          return this.error(400, "unknown verdict");
        }
        if (!session.recommendations.includes(item)) {
          return this.error(400, `item ${item} was not recommended in this session`);
        }
        session.feedback.set(item, verdict as Verdict);
        return this.json(200, { ok: true });
      }

      default:
        return this.error(404, "no such route");
    }
  }

  session(id: string): FakeSession {
    const session = this.sessions.get(id);
    if (!session) {
      throw new Error(`fake server has no session ${id}`);
    }
    return session;
  }

  firstSession(): FakeSession {
    return this.session("s-1");
  }
}

export class MemoryStorage {
  private map = new Map<string, string>();

  getItem(key: string): string | null {
    return this.map.get(key) ?? null;
  }

  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }

  removeItem(key: string): void {
    this.map.delete(key);
  }
}
