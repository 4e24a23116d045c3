// Thin fetch client for the documented service endpoints. The base URL is
// configurable at build time (DEFAULT_API_BASE) and at runtime via
// ?api=<url> or localStorage.

import type { AnswerRecord, HealthRecord, RoutingDecision, TemplateRecord } from './types.js';

export const DEFAULT_API_BASE = 'http://127.0.0.1:8080';
const BASE_STORAGE_KEY = 'scholarpipe.apiBase';

export function resolveApiBase(
  search: string = typeof location !== 'undefined' ? location.search : '',
  storage: Pick<Storage, 'getItem' | 'setItem'> | null = typeof localStorage !== 'undefined'
    ? localStorage
    : null,
): string {
  const param = new URLSearchParams(search).get('api');
  if (param) {
    storage?.setItem(BASE_STORAGE_KEY, param);
    return param.replace(/\/+$/, '');
  }
  const stored = storage?.getItem(BASE_STORAGE_KEY);
  return (stored ?? DEFAULT_API_BASE).replace(/\/+$/, '');
}

export class ServiceError extends Error {
  constructor(
    message: string,
    public stage: string | null = null,
    public status: number | null = null,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ServiceError> {
  try {
    const body = await resp.json();
    return new ServiceError(body.message ?? resp.statusText, body.stage ?? null, resp.status);
  } catch {
    return new ServiceError(resp.statusText, null, resp.status);
  }
}

export class ApiClient {
  constructor(
    public base: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(`${this.base}${path}`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(body),
      });
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`, 'network');
    }
    if (!resp.ok) throw await parseError(resp);
    return resp.json() as Promise<T>;
  }

  private async get<T>(path: string): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(`${this.base}${path}`);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`, 'network');
    }
    if (!resp.ok) throw await parseError(resp);
    return resp.json() as Promise<T>;
  }

  ask(query: string): Promise<AnswerRecord> {
    return this.post<AnswerRecord>('/v1/ask', { query });
  }

  route(query: string): Promise<RoutingDecision> {
    return this.post<RoutingDecision>('/v1/route', { query });
  }

  health(): Promise<HealthRecord> {
    return this.get<HealthRecord>('/v1/health');
  }

  templates(): Promise<{ templates: TemplateRecord[] }> {
    return this.get<{ templates: TemplateRecord[] }>('/v1/templates');
  }
}
