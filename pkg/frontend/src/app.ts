/**
 * Screen flow for one onboarding session.
 *
 * The app never decides anything the server can decide: each user gesture
 * issues exactly one API call and the next screen is rendered from the
 * response.  The session id lives in per-tab storage, so a refresh lands
 * back on the pending question; confirmed feedback verdicts are cached the
 * same way so a refresh cannot cause a double submit.
 *
 * Error handling follows two rules.  A conflict means another view of this
 * session moved first, so the pending card is re-fetched and the server
 * state wins.  Any other failure keeps the current screen's intent and
 * offers a retry of that single call.  Server error details are logged,
 * never rendered.
 */

import { ApiClient, ApiError } from "./api.js";
import type { ItemCard, SessionDoc, Verdict } from "./api.js";
import {
  renderDone,
  renderError,
  renderLoading,
  renderQuestion,
  renderRecommendations,
} from "./views.js";

const SESSION_KEY = "slimboard.session";
const FEEDBACK_KEY = "slimboard.feedback";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class App {
  private busy = false;
  private chain: Promise<void> = Promise.resolve();
  private sessionId: string | null = null;
  private current: SessionDoc | null = null;
  private items: ItemCard[] = [];
  private verdicts = new Map<number, Verdict>();

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly storage: StorageLike,
    private readonly onRender: () => void = () => {},
  ) {}

  /** Resume the tab's session if the server still knows it, else start fresh. */
  async start(): Promise<void> {
    renderLoading(this.root);
    this.onRender();
    try {
      const stored = this.storage.getItem(SESSION_KEY);
      if (stored !== null) {
        try {
          const doc = await this.api.getQuestion(stored);
          this.sessionId = stored;
          this.restoreVerdicts(stored);
          await this.route(doc);
          return;
        } catch (err) {
          if (!(err instanceof ApiError && err.status === 404)) {
            throw err;
          }
          // the server no longer knows this session (restart); start over
          this.storage.removeItem(SESSION_KEY);
        }
      }
      const doc = await this.api.createSession();
      this.sessionId = doc.session_id;
      this.storage.setItem(SESSION_KEY, doc.session_id);
      this.restoreVerdicts(doc.session_id);
      await this.route(doc);
    } catch (err) {
      this.fail(err, () => void this.start());
    }
  }

  /** Resolves once the in-flight gesture (if any) has finished rendering. */
  settled(): Promise<void> {
    return this.chain;
  }

  private route(doc: SessionDoc): Promise<void> {
    this.current = doc;
    if (doc.phase === "questioning" && doc.question !== null) {
      renderQuestion(this.root, doc, { onRate: (rating) => this.rate(rating) });
      this.onRender();
      return Promise.resolve();
    }
    return this.showRecommendations();
  }

  /**
   * Not a gesture: the transition out of questioning was already confirmed
   * by the server (phase in the last response), this fetches what to show.
   */
  private async showRecommendations(): Promise<void> {
    const doc = await this.api.getRecommendations(this.sessionId!);
    this.items = doc.items;
    this.renderFeedbackScreen();
  }

  private renderFeedbackScreen(): void {
    if (this.items.length > 0 && this.verdicts.size >= this.items.length) {
      renderDone(this.root, this.items.length);
    } else {
      renderRecommendations(this.root, this.items, this.verdicts, {
        onVerdict: (item, verdict) => this.giveVerdict(item, verdict),
      });
    }
    this.onRender();
  }

  private rate(rating: number): void {
    const doc = this.current;
    if (doc === null || doc.question === null) {
      return;
    }
    const item = doc.question.item;
    this.gesture(async () => {
      try {
        const next = await this.api.submitAnswer(doc.session_id, item, rating);
        await this.route(next);
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          // another tab moved this session along; show the server's card
          await this.route(await this.api.getQuestion(doc.session_id));
        } else {
          this.fail(err, () => this.rate(rating));
        }
      }
    });
  }

  private giveVerdict(item: number, verdict: Verdict): void {
    this.gesture(async () => {
      try {
        await this.api.submitFeedback(this.sessionId!, item, verdict);
        this.verdicts.set(item, verdict);
        this.persistVerdicts();
        this.renderFeedbackScreen();
      } catch (err) {
        this.fail(err, () => this.giveVerdict(item, verdict));
      }
    });
  }

  /** Run one gesture's single API call; ignore gestures while one is in flight. */
  private gesture(run: () => Promise<void>): void {
    if (this.busy) {
      return;
    }
    this.busy = true;
    for (const btn of this.root.querySelectorAll("button")) {
      btn.disabled = true;
    }
    this.chain = run().finally(() => {
      this.busy = false;
    });
  }

  private fail(err: unknown, retry: () => void): void {
    console.error(err);
    renderError(this.root, retry);
    this.onRender();
  }

  private feedbackKey(sessionId: string): string {
    return `${FEEDBACK_KEY}.${sessionId}`;
  }

  private persistVerdicts(): void {
    if (this.sessionId === null) {
      return;
    }
    const entries = Array.from(this.verdicts.entries());
    this.storage.setItem(this.feedbackKey(this.sessionId), JSON.stringify(entries));
  }

  private restoreVerdicts(sessionId: string): void {
    this.verdicts = new Map();
    const raw = this.storage.getItem(this.feedbackKey(sessionId));
    if (raw === null) {
      return;
    }
    try {
      for (const [item, verdict] of JSON.parse(raw) as Array<[number, Verdict]>) {
        this.verdicts.set(item, verdict);
      }
    } catch {
      // a corrupt cache only costs the highlight state
    }
  }
}
