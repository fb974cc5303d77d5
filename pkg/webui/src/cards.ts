/** Recommendation cards: item name, the explanation sentence naming the item,
 * and its top supporting review excerpts. */

import type { DiagnosticsJson, ScoredItemJson } from "./types.js";

export const DEFAULT_CARD_REVIEWS = 3;

/** Sentence of `text` that mentions `name` (case-insensitive), if any. */
export function explanationFor(text: string, name: string): string | null {
  const needle = name.toLowerCase();
  for (const sentence of text.split(/(?<=[.!?])\s+/)) {
    if (sentence.toLowerCase().includes(needle)) {
      return sentence.trim();
    }
  }
  return null;
}

function buildCard(
  doc: Document,
  item: ScoredItemJson,
  responseText: string,
  maxReviews: number,
): HTMLElement {
  const card = doc.createElement("article");
  card.className = "card";
  card.dataset.itemId = item.item_id;

  const header = doc.createElement("header");
  const name = doc.createElement("h3");
  name.className = "card-name";
  name.textContent = item.name;
  header.appendChild(name);
  const badge = doc.createElement("span");
  badge.className = "badge";
  badge.hidden = true;
  header.appendChild(badge);
  card.appendChild(header);

  const explanation = explanationFor(responseText, item.name);
  if (explanation !== null) {
    const why = doc.createElement("p");
    why.className = "card-explanation";
    why.textContent = explanation;
    card.appendChild(why);
  }

  const reviews = doc.createElement("ul");
  reviews.className = "card-reviews";
  for (const evidence of item.evidence.filter((e) => e.kind === "review").slice(0, maxReviews)) {
    const row = doc.createElement("li");
    row.textContent = evidence.text;
    reviews.appendChild(row);
  }
  card.appendChild(reviews);
  return card;
}

/** Cards for a recommend-and-explain turn, in the server's ranked order. */
export function renderCards(
  doc: Document,
  diagnostics: DiagnosticsJson,
  responseText: string,
  maxReviews: number = DEFAULT_CARD_REVIEWS,
): HTMLElement {
  const wrap = doc.createElement("div");
  wrap.className = "cards";
  for (const item of diagnostics.scored_items ?? []) {
    wrap.appendChild(buildCard(doc, item, responseText, maxReviews));
  }
  return wrap;
}

/** Sync accepted/rejected badges on every card under `root` from item-id sets. */
export function updateBadges(root: HTMLElement, accepted: string[], rejected: string[]): void {
  for (const card of Array.from(root.querySelectorAll<HTMLElement>(".card"))) {
    const itemId = card.dataset.itemId ?? "";
    const badge = card.querySelector<HTMLElement>(".badge");
    if (badge === null) {
      continue;
    }
    if (accepted.includes(itemId)) {
      badge.textContent = "accepted";
      badge.hidden = false;
      card.classList.add("accepted");
      card.classList.remove("rejected");
    } else if (rejected.includes(itemId)) {
      badge.textContent = "rejected";
      badge.hidden = false;
      card.classList.add("rejected");
      card.classList.remove("accepted");
    } else {
      badge.hidden = true;
      card.classList.remove("accepted", "rejected");
    }
  }
}
