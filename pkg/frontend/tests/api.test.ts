import { describe, expect, it } from 'vitest';

import { ApiClient, DEFAULT_API_BASE, ServiceError, resolveApiBase } from '../src/api.js';
import { health, mockFetch, qaAnswer } from './fixtures.js';

function memoryStorage(): Storage {
  const data = new Map<string, string>();
  return {
    getItem: (k: string) => data.get(k) ?? null,
    setItem: (k: string, v: string) => void data.set(k, v),
    removeItem: (k: string) => void data.delete(k),
    clear: () => data.clear(),
    key: () => null,
    length: 0,
  } as Storage;
}

describe('resolveApiBase', () => {
  it('defaults when nothing is configured', () => {
    expect(resolveApiBase('', memoryStorage())).toBe(DEFAULT_API_BASE);
  });

  it('prefers the ?api= query parameter and remembers it', () => {
    const storage = memoryStorage();
    expect(resolveApiBase('?api=http://10.0.0.5:9000/', storage)).toBe('http://10.0.0.5:9000');
    expect(resolveApiBase('', storage)).toBe('http://10.0.0.5:9000');
  });
});

describe('ApiClient', () => {
  it('posts ask and returns the answer record', async () => {
    const client = new ApiClient('http://svc', mockFetch([['POST', '/v1/ask', 200, qaAnswer()]]));
    const answer = await client.ask('How does sparse attention reduce cost?');
    expect(answer.citations).toEqual([1, 2]);
    expect(answer.provenance.routing.label).toBe('general_qa');
  });

  it('fetches health', async () => {
    const client = new ApiClient('http://svc', mockFetch([['GET', '/v1/health', 200, health]]));
    expect((await client.health()).documents).toBe(5);
  });

  it('surfaces structured service errors with their stage', async () => {
    const client = new ApiClient(
      'http://svc',
      mockFetch([['POST', '/v1/ask', 502, { stage: 'retrieve', message: 'endpoint down', request_id: 'r1' }]]),
    );
    const err = await client.ask('q').catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.stage).toBe('retrieve');
    expect(err.message).toBe('endpoint down');
    expect(err.status).toBe(502);
  });

  it('wraps network failures', async () => {
    const failing = (async () => {
      throw new TypeError('connection refused');
    }) as unknown as typeof fetch;
    const client = new ApiClient('http://svc', failing);
    const err = await client.health().catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.stage).toBe('network');
  });
});
