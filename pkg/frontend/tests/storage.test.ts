import { beforeEach, describe, expect, it } from 'vitest';

import { clearConversation, loadConversation, saveConversation } from '../src/storage.js';
import type { ChatTurn } from '../src/types.js';
import { qaAnswer } from './fixtures.js';

function turn(id: string, status: ChatTurn['status']): ChatTurn {
  return {
    id,
    query: `query ${id}`,
    status,
    answer: status === 'done' ? qaAnswer() : null,
    error: status === 'error' ? 'boom' : null,
  };
}

describe('conversation persistence', () => {
  beforeEach(() => localStorage.clear());

  it('round-trips completed turns', () => {
    const turns = [turn('t1', 'done'), turn('t2', 'error')];
    saveConversation(turns, localStorage);
    const restored = loadConversation(localStorage);
    expect(restored).toEqual(turns);
  });

  it('never persists pending turns', () => {
    saveConversation([turn('t1', 'done'), turn('t2', 'pending')], localStorage);
    const restored = loadConversation(localStorage);
    expect(restored.map((t) => t.id)).toEqual(['t1']);
  });

  it('returns empty on corrupt storage', () => {
    localStorage.setItem('scholarpipe.conversation.v1', '{not json');
    expect(loadConversation(localStorage)).toEqual([]);
  });

  it('returns empty when nothing stored', () => {
    expect(loadConversation(localStorage)).toEqual([]);
  });

  it('clears', () => {
    saveConversation([turn('t1', 'done')], localStorage);
    clearConversation(localStorage);
    expect(loadConversation(localStorage)).toEqual([]);
  });
});
