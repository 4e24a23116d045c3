// Conversation persistence: completed turns survive a page reload via
// localStorage. Pending turns are never persisted.

import type { ChatTurn } from './types.js';

const STORAGE_KEY = 'scholarpipe.conversation.v1';

export function loadConversation(
  storage: Pick<Storage, 'getItem'> | null = typeof localStorage !== 'undefined'
    ? localStorage
    : null,
): ChatTurn[] {
  const raw = storage?.getItem(STORAGE_KEY);
  if (!raw) return [];
  try {
    const parsed = JSON.parse(raw);
    if (!Array.isArray(parsed)) return [];
    return parsed.filter(
      (turn): turn is ChatTurn =>
        turn && typeof turn.query === 'string' && turn.status !== 'pending',
    );
  } catch {
    return [];
  }
}

export function saveConversation(
  turns: ChatTurn[],
  storage: Pick<Storage, 'setItem'> | null = typeof localStorage !== 'undefined'
    ? localStorage
    : null,
): void {
  const completed = turns.filter((turn) => turn.status !== 'pending');
  storage?.setItem(STORAGE_KEY, JSON.stringify(completed));
}

export function clearConversation(
  storage: Pick<Storage, 'removeItem'> | null = typeof localStorage !== 'undefined'
    ? localStorage
    : null,
): void {
  storage?.removeItem(STORAGE_KEY);
}
