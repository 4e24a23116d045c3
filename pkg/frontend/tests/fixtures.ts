// Mock service responses shaped exactly like the HTTP API's records.

import type { AnswerRecord } from '../src/types.js';

export function qaAnswer(): AnswerRecord {
  return {
    text: 'Sparse attention reduces cost [1]. Dense retrieval differs [2]. Bogus claim [9].',
    citations: [1, 2],
    dropped_markers: [9],
    bibliography: [
      {
        ref_nos: [1],
        paper_id: 'sparse-attn',
        title: 'Sparse Attention for Long Documents',
        authors: ['Ana Ruiz', 'Ben Okafor'],
        venue: 'TestConf',
        year: 2023,
        external_id: '10.5555/sparse',
        enrichment_status: 'enriched',
      },
      {
        ref_nos: [2],
        paper_id: 'dense-ret',
        title: 'Dense Retrieval at Scale',
        authors: ['Chen Wu'],
        venue: 'IRConf',
        year: 2022,
        external_id: null,
        enrichment_status: 'local',
      },
    ],
    evidence: {
      task: 'general_qa',
      header: null,
      items: [
        {
          ref_no: 1,
          kind: 'text_chunk',
          payload: 'Attention cost grows quadratically with sequence length.',
          source: {
            paper_id: 'sparse-attn',
            chunk_id: 'sparse-attn:000:000',
            title: 'Sparse Attention for Long Documents',
            section_path: 'Introduction',
            template_id: null,
            endpoint: null,
            row_index: null,
          },
        },
        {
          ref_no: 2,
          kind: 'text_chunk',
          payload: 'Dense retrieval encodes queries and passages into vectors.',
          source: {
            paper_id: 'dense-ret',
            chunk_id: 'dense-ret:000:000',
            title: 'Dense Retrieval at Scale',
            section_path: 'Introduction',
            template_id: null,
            endpoint: null,
            row_index: null,
          },
        },
      ],
    },
    provenance: {
      model_id: 'mock-model',
      k: 8,
      routing: {
        label: 'general_qa',
        confidence: 1.0,
        trigger: 'classifier',
        matched_rule: null,
        warning: null,
      },
      timings_ms: { route: 0, retrieve: 2, compose: 0, generate: 1 },
      attempts: 1,
      ungrounded: false,
      dropped_evidence_refs: [],
    },
  };
}

export function kgAnswer(): AnswerRecord {
  return {
    text: '    author | hIndex\n[1] https://semopenalex.org/author/A1 | 42',
    citations: [1],
    dropped_markers: [],
    bibliography: [],
    evidence: {
      task: 'kg_fact',
      header: 'author                               | hIndex',
      items: [
        {
          ref_no: 1,
          kind: 'kg_row',
          payload: 'https://semopenalex.org/author/A1 | 42',
          source: {
            paper_id: null,
            chunk_id: null,
            title: null,
            section_path: null,
            template_id: 'author_h_index',
            endpoint: 'http://kg.test/sparql',
            row_index: 0,
          },
        },
      ],
    },
    provenance: {
      model_id: 'mock-model',
      k: 8,
      routing: {
        label: 'kg_fact',
        confidence: 1.0,
        trigger: 'rule_precheck',
        matched_rule: 'h-index',
        warning: null,
      },
      timings_ms: { route: 0, retrieve: 3, compose: 0 },
      attempts: 0,
      ungrounded: false,
      dropped_evidence_refs: [],
    },
  };
}

export const health = { ready: true, documents: 5, chunks: 11, dim: 384 };

type Route = [method: string, path: string, status: number, body: unknown];

export function mockFetch(routes: Route[]): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? 'GET';
    for (const [m, path, status, body] of routes) {
      if (m === method && url.endsWith(path)) {
        return new Response(JSON.stringify(body), {
          status,
          headers: { 'Content-Type': 'application/json' },
        });
      }
    }
    throw new TypeError(`no mock route for ${method} ${url}`);
  }) as typeof fetch;
}
