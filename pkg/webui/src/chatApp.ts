/** Chat view wired to one server session: composer, conversation bubbles,
 * recommendation cards, and the live state-inspector panel.
 *
 * All rendered state is derived from server responses; a failed turn adds an
 * error bubble and leaves the panel, transcript, and session untouched.
 */

import { ApiClient, ApiError, type FetchLike } from "./api.js";
import { DEFAULT_CARD_REVIEWS, renderCards, updateBadges } from "./cards.js";
import { renderStatePanel } from "./statePanel.js";
import type {
  ActionJson,
  DialogueStateJson,
  ScoredItemJson,
  TurnResultJson,
} from "./types.js";
import { emptyState } from "./types.js";

export interface ChatAppOptions {
  baseUrl?: string;
  fetchImpl?: FetchLike;
  maxCardReviews?: number;
}

export interface UiTurn {
  user_text: string;
  response_text: string;
  action: ActionJson;
  intents: string[];
  recommendations: ScoredItemJson[];
}

export class ChatApp {
  readonly api: ApiClient;
  sessionId: string | null = null;
  turns: UiTurn[] = [];
  currentState: DialogueStateJson | null = null;
  inFlight = false;

  private readonly maxCardReviews: number;
  private readonly doc: Document;
  private readonly banner: HTMLElement;
  private readonly bannerText: HTMLElement;
  private readonly conversation: HTMLElement;
  private readonly panel: HTMLElement;
  private readonly input: HTMLInputElement;
  private readonly sendButton: HTMLButtonElement;

  constructor(readonly root: HTMLElement, options: ChatAppOptions = {}) {
    this.api = new ApiClient(options.baseUrl ?? "", options.fetchImpl);
    this.maxCardReviews = options.maxCardReviews ?? DEFAULT_CARD_REVIEWS;
    this.doc = root.ownerDocument;

    root.innerHTML = `
      <div class="banner" role="alert" hidden>
        <span class="banner-text"></span>
        <button type="button" class="retry">Retry</button>
      </div>
      <main class="layout">
        <section class="conversation" aria-live="polite"></section>
        <aside class="state-panel" aria-label="dialogue state"></aside>
      </main>
      <form class="composer">
        <input class="composer-input" type="text" autocomplete="off"
               placeholder="Tell me what you're looking for" disabled>
        <button class="composer-send" type="submit" disabled>Send</button>
      </form>`;
    this.banner = this.query(".banner");
    this.bannerText = this.query(".banner-text");
    this.conversation = this.query(".conversation");
    this.panel = this.query(".state-panel");
    this.input = this.query(".composer-input");
    this.sendButton = this.query(".composer-send");

    this.query<HTMLFormElement>(".composer").addEventListener("submit", (event) => {
      event.preventDefault();
      const text = this.input.value.trim();
      if (text === "") {
        return;
      }
      this.input.value = "";
      void this.send(text);
    });
    this.query<HTMLButtonElement>(".retry").addEventListener("click", () => {
      void this.start();
    });
  }

  /** Create the server session and render the greeting and empty state. */
  async start(): Promise<void> {
    if (this.inFlight) {
      return;
    }
    this.beginRequest();
    try {
      const created = await this.api.createSession();
      this.sessionId = created.session_id;
      this.turns = [];
      this.conversation.textContent = "";
      this.currentState = emptyState();
      this.addBubble("system", created.greeting);
      renderStatePanel(this.panel, this.currentState, null);
      this.hideBanner();
    } catch (exc) {
      this.showBanner(exc);
      return;
    } finally {
      this.endRequest();
    }
  }

  /** Send one utterance; commits transcript, cards, and panel only on success. */
  async send(text: string): Promise<void> {
    if (this.inFlight || this.sessionId === null) {
      return;
    }
    this.addBubble("user", text);
    this.beginRequest();
    try {
      const result = await this.api.sendMessage(this.sessionId, text);
      this.commitTurn(text, result);
    } catch (exc) {
      this.addBubble("error", describeError(exc));
    } finally {
      this.endRequest();
    }
  }

  private commitTurn(text: string, result: TurnResultJson): void {
    const recommending = result.action.type === "recommend_and_explain";
    const recommendations = recommending ? (result.diagnostics?.scored_items ?? []) : [];
    this.turns.push({
      user_text: text,
      response_text: result.response_text,
      action: result.action,
      intents: result.intents,
      recommendations,
    });
    this.addBubble("system", result.response_text);
    if (recommending && result.diagnostics !== null) {
      this.conversation.appendChild(
        renderCards(this.doc, result.diagnostics, result.response_text, this.maxCardReviews),
      );
    }
    const previous = this.currentState;
    this.currentState = result.state_snapshot;
    renderStatePanel(this.panel, this.currentState, previous);
    updateBadges(
      this.conversation,
      this.currentState.accepted_items,
      this.currentState.rejected_items,
    );
  }

  private beginRequest(): void {
    this.inFlight = true;
    this.input.disabled = true;
    this.sendButton.disabled = true;
  }

  private endRequest(): void {
    this.inFlight = false;
    const ready = this.sessionId !== null;
    this.input.disabled = !ready;
    this.sendButton.disabled = !ready;
  }

  private addBubble(kind: "user" | "system" | "error", text: string): void {
    const bubble = this.doc.createElement("div");
    bubble.className = `bubble ${kind}`;
    bubble.textContent = text;
    this.conversation.appendChild(bubble);
  }

  private showBanner(exc: unknown): void {
    this.bannerText.textContent = describeError(exc);
    this.banner.hidden = false;
  }

  private hideBanner(): void {
    this.banner.hidden = true;
    this.bannerText.textContent = "";
  }

  private query<T extends HTMLElement>(selector: string): T {
    const node = this.root.querySelector<T>(selector);
    if (node === null) {
      throw new Error(`missing element ${selector}`);
    }
    return node;
  }
}

function describeError(exc: unknown): string {
  if (exc instanceof ApiError) {
    return exc.status === 0
      ? `Cannot reach the server — ${exc.message}`
      : `Turn failed (${exc.kind}): ${exc.message}`;
  }
  return `Unexpected error: ${String(exc)}`;
}
