// Wire types mirroring the service's answer records. The UI renders only
// what the server sends; it computes no metrics and invents no citations.

export interface RoutingDecision {
  label: string;
  confidence: number;
  trigger: string;
  matched_rule: string | null;
  warning: string | null;
}

export interface SourceRef {
  paper_id: string | null;
  chunk_id: string | null;
  title: string | null;
  section_path: string | null;
  template_id: string | null;
  endpoint: string | null;
  row_index: number | null;
}

export interface EvidenceItem {
  ref_no: number;
  kind: string; // text_chunk | paper_full_text | kg_row | inline_text
  payload: string;
  source: SourceRef;
}

export interface EvidenceSet {
  task: string;
  header: string | null;
  items: EvidenceItem[];
}

export interface BibEntry {
  ref_nos: number[];
  paper_id: string;
  title: string;
  authors: string[];
  venue: string | null;
  year: number | null;
  external_id: string | null;
  enrichment_status: string;
}

export interface Provenance {
  model_id: string;
  k: number;
  routing: RoutingDecision;
  timings_ms: Record<string, number>;
  attempts: number;
  ungrounded: boolean;
  dropped_evidence_refs: number[];
}

export interface AnswerRecord {
  text: string;
  citations: number[];
  dropped_markers: number[];
  bibliography: BibEntry[];
  evidence: EvidenceSet;
  provenance: Provenance;
}

export interface HealthRecord {
  ready: boolean;
  documents: number;
  chunks: number;
  dim: number;
}

export interface TemplateRecord {
  template_id: string;
  category: string;
  description: string;
  required_slots: string[];
  result_columns: [string, string][];
}

export type TurnStatus = 'pending' | 'done' | 'error';

export interface ChatTurn {
  id: string;
  query: string;
  status: TurnStatus;
  answer: AnswerRecord | null;
  error: string | null;
}
