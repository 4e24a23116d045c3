// Application wiring: submit queries, track turn state, focus evidence on
// citation clicks, and persist the conversation across reloads.

import { ApiClient, ServiceError } from './api.js';
import { renderTurn } from './render.js';
import { loadConversation, saveConversation, clearConversation } from './storage.js';
import type { ChatTurn } from './types.js';

export class ChatApp {
  turns: ChatTurn[] = [];
  private nextId = 1;
  private inflight = false;

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
    private storage: Storage | null = typeof localStorage !== 'undefined' ? localStorage : null,
  ) {}

  mount(): void {
    this.turns = loadConversation(this.storage);
    this.nextId = this.turns.length + 1;
    this.root.innerHTML = `
      <header class="app-header">
        <h1>scholarpipe</h1>
        <span id="health" class="health">connecting…</span>
        <button id="clear" type="button">clear history</button>
      </header>
      <main id="conversation" class="conversation"></main>
      <form id="ask-form" class="ask-form">
        <input id="ask-input" type="text" placeholder="Ask about the corpus, a paper, or an author…" autocomplete="off" />
        <button id="ask-submit" type="submit">ask</button>
      </form>`;
    this.redraw();
    this.bind();
    void this.refreshHealth();
  }

  private bind(): void {
    const form = this.root.querySelector<HTMLFormElement>('#ask-form')!;
    form.addEventListener('submit', (event) => {
      event.preventDefault();
      const input = this.root.querySelector<HTMLInputElement>('#ask-input')!;
      void this.submitQuery(input.value);
    });
    this.root.querySelector<HTMLButtonElement>('#clear')!.addEventListener('click', () => {
      this.turns = [];
      clearConversation(this.storage);
      this.redraw();
    });
    // Delegated citation-marker clicks focus the evidence panel.
    this.root.addEventListener('click', (event) => {
      const target = event.target as HTMLElement;
      if (target.classList.contains('citation-marker')) {
        event.preventDefault();
        const turnNode = target.closest('[data-turn-id]');
        const refNo = target.dataset.refNo;
        if (turnNode && refNo) this.inspectCitation(turnNode as HTMLElement, Number(refNo));
      }
    });
  }

  async refreshHealth(): Promise<void> {
    const node = this.root.querySelector<HTMLElement>('#health');
    if (!node) return;
    try {
      const health = await this.api.health();
      node.textContent = `ready · ${health.documents} papers · ${health.chunks} chunks · dim ${health.dim}`;
      node.classList.add('ok');
    } catch {
      node.textContent = `service unreachable at ${this.api.base}`;
      node.classList.remove('ok');
    }
  }

  async submitQuery(text: string): Promise<ChatTurn | null> {
    const query = text.trim();
    if (!query || this.inflight) return null;
    this.inflight = true;
    const input = this.root.querySelector<HTMLInputElement>('#ask-input');
    const submit = this.root.querySelector<HTMLButtonElement>('#ask-submit');
    if (input) input.value = '';
    if (submit) submit.disabled = true;

    const turn: ChatTurn = {
      id: `t${this.nextId++}`,
      query,
      status: 'pending',
      answer: null,
      error: null,
    };
    this.turns.push(turn);
    this.redraw();
    try {
      turn.answer = await this.api.ask(query);
      turn.status = 'done';
    } catch (err) {
      turn.status = 'error';
      turn.error =
        err instanceof ServiceError && err.stage
          ? `[${err.stage}] ${err.message}`
          : String(err instanceof Error ? err.message : err);
      if (input) input.value = query; // preserve the input for retry
    } finally {
      this.inflight = false;
      if (submit) submit.disabled = false;
    }
    saveConversation(this.turns, this.storage);
    this.redraw();
    return turn;
  }

  inspectCitation(turnNode: HTMLElement, refNo: number): void {
    for (const highlighted of turnNode.querySelectorAll('.evidence-item.focused')) {
      highlighted.classList.remove('focused');
    }
    const card = turnNode.querySelector<HTMLElement>(`#evidence-${refNo}`);
    if (card) {
      card.classList.add('focused');
      card.scrollIntoView?.({ behavior: 'smooth', block: 'nearest' });
    }
  }

  redraw(): void {
    const conversation = this.root.querySelector<HTMLElement>('#conversation');
    if (!conversation) return;
    conversation.innerHTML = '';
    for (const turn of this.turns) {
      conversation.appendChild(renderTurn(turn));
    }
  }
}
