/**
 * DOM builders for the onboarding screens.
 *
 * Pure functions from server data to elements: nothing here issues a
 * request, reorders a list, or knows how the session is being driven.
 * Cards render gracefully when poster or abstract are missing.
 */

import type { ItemCard, SessionDoc, Verdict } from "./api.js";

export const VERDICT_LABELS: ReadonlyArray<readonly [Verdict, string]> = [
  ["bad", "Bad"],
  ["good", "Good"],
  ["very_good", "Very good"],
  ["dont_know", "Don't know"],
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function cardBody(card: ItemCard): HTMLElement {
  const wrap = el("div", "card");
  if (card.poster_url) {
    const img = el("img", "poster");
    img.src = card.poster_url;
    img.alt = "";
    wrap.append(img);
  }
  const text = el("div", "card-text");
  const title = card.year === null ? card.title : `${card.title} (${card.year})`;
  text.append(el("h2", "title", title));
  if (card.genres.length > 0) {
    text.append(el("p", "genres", card.genres.join(", ")));
  }
  if (card.abstract) {
    text.append(el("p", "abstract", card.abstract));
  }
  wrap.append(text);
  return wrap;
}

export function renderLoading(root: HTMLElement): void {
  root.replaceChildren(el("p", "loading", "Loading…"));
}

export interface QuestionHandlers {
  /** 1 to 5 from the stars, 0 from "don't know". */
  onRate: (rating: number) => void;
}

export function renderQuestion(root: HTMLElement, doc: SessionDoc, handlers: QuestionHandlers): void {
  if (!doc.question) {
    throw new Error("renderQuestion needs a pending question");
  }
  const page = el("section", "question-page");

  const progress = el("p", "progress", `Question ${doc.answered + 1} of ${doc.total}`);
  page.append(progress);
  const bar = el("div", "progress-bar");
  const fill = el("div", "progress-fill");
  fill.style.width = `${Math.round((100 * doc.answered) / doc.total)}%`;
  bar.append(fill);
  page.append(bar);

  page.append(cardBody(doc.question));
  page.append(el("p", "prompt", "How would you rate it?"));

  const stars = el("div", "rating-row");
  for (let n = 1; n <= 5; n += 1) {
    const btn = el("button", "star", "★");
    btn.type = "button";
    btn.dataset.rating = String(n);
    btn.setAttribute("aria-label", `Rate ${n} of 5`);
    btn.addEventListener("click", () => handlers.onRate(n));
    stars.append(btn);
  }
  page.append(stars);

  const dontKnow = el("button", "dont-know", "Don't know");
  dontKnow.type = "button";
  dontKnow.addEventListener("click", () => handlers.onRate(0));
  page.append(dontKnow);

  root.replaceChildren(page);
}

export interface FeedbackHandlers {
  onVerdict: (item: number, verdict: Verdict) => void;
}

export function renderRecommendations(
  root: HTMLElement,
  items: ItemCard[],
  verdicts: ReadonlyMap<number, Verdict>,
  handlers: FeedbackHandlers,
): void {
  const page = el("section", "recs-page");
  page.append(el("h1", "recs-heading", "Picked for you"));
  page.append(el("p", "recs-intro", "Tell us about each title: does it look like a good pick?"));

  const list = el("ol", "rec-list");
  for (const card of items) {
    const row = el("li", "rec-item");
    row.dataset.item = String(card.item);
    row.append(cardBody(card));

    const chosen = verdicts.get(card.item);
    const buttons = el("div", "verdict-row");
    for (const [verdict, label] of VERDICT_LABELS) {
      const btn = el("button", "verdict", label);
      btn.type = "button";
      btn.dataset.verdict = verdict;
      btn.setAttribute("aria-pressed", chosen === verdict ? "true" : "false");
      btn.addEventListener("click", () => handlers.onVerdict(card.item, verdict));
      buttons.append(btn);
    }
    row.append(buttons);
    list.append(row);
  }
  page.append(list);

  page.append(el("p", "feedback-progress", `${verdicts.size} of ${items.length} rated`));
  root.replaceChildren(page);
}

export function renderDone(root: HTMLElement, count: number): void {
  const page = el("section", "done-page");
  page.append(el("h1", "done-heading", "All done"));
  page.append(el("p", "done-text", `Thanks! Your feedback on all ${count} titles was recorded.`));
  root.replaceChildren(page);
}

export function renderError(root: HTMLElement, onRetry: () => void): void {
  const page = el("section", "error-page");
  page.append(el("p", "error-text", "Something went wrong talking to the server."));
  page.append(el("p", "error-hint", "Your progress is saved; nothing was submitted twice."));
  const retry = el("button", "retry", "Try again");
  retry.type = "button";
  retry.addEventListener("click", onRetry);
  page.append(retry);
  root.replaceChildren(page);
}
