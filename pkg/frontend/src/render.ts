// DOM builders for chat turns, the evidence panel, and KG tables. All
// content is server-provided data inserted via textContent (never innerHTML
// with user or model text).

import { segmentAnswerText } from './markers.js';
import type { AnswerRecord, ChatTurn, EvidenceItem, EvidenceSet } from './types.js';

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

export function taskBadge(answer: AnswerRecord): HTMLElement {
  const routing = answer.provenance.routing;
  const badge = el('span', `badge badge-${routing.label}`, routing.label.replace('_', ' '));
  badge.title = `trigger: ${routing.trigger}, confidence: ${routing.confidence.toFixed(2)}`;
  return badge;
}

export function renderAnswerText(answer: AnswerRecord): HTMLElement {
  const container = el('div', 'answer-text');
  const validRefs = new Set(answer.evidence.items.map((item) => item.ref_no));
  for (const segment of segmentAnswerText(answer.text, validRefs)) {
    if (segment.kind === 'marker') {
      const link = el('a', 'citation-marker', segment.text);
      link.href = '#';
      link.dataset.refNo = String(segment.refNo);
      container.appendChild(link);
    } else {
      container.appendChild(document.createTextNode(segment.text));
    }
  }
  return container;
}

export function renderKgTable(evidence: EvidenceSet): HTMLTableElement {
  const table = el('table', 'kg-table');
  const columns = (evidence.header ?? '').split('|').map((cell) => cell.trim());
  const head = table.createTHead().insertRow();
  head.appendChild(el('th', undefined, 'ref'));
  for (const column of columns) {
    head.appendChild(el('th', undefined, column));
  }
  const body = table.createTBody();
  for (const item of evidence.items) {
    const row = body.insertRow();
    row.dataset.refNo = String(item.ref_no);
    const refCell = row.insertCell();
    const link = el('a', 'citation-marker', `[${item.ref_no}]`);
    link.href = '#';
    link.dataset.refNo = String(item.ref_no);
    refCell.appendChild(link);
    for (const cell of item.payload.split('|')) {
      row.insertCell().textContent = cell.trim();
    }
  }
  return table;
}

function evidenceTitle(item: EvidenceItem): string {
  switch (item.kind) {
    case 'kg_row':
      return `${item.source.template_id ?? 'kg'} row ${(item.source.row_index ?? 0) + 1}`;
    case 'inline_text':
      return 'user-provided text';
    default:
      return item.source.title ?? item.source.paper_id ?? 'untitled source';
  }
}

export function renderEvidencePanel(answer: AnswerRecord): HTMLElement {
  const panel = el('section', 'evidence-panel');
  panel.appendChild(el('h3', undefined, `Evidence (${answer.evidence.items.length})`));
  for (const item of answer.evidence.items) {
    const card = el('article', 'evidence-item');
    card.id = `evidence-${item.ref_no}`;
    card.dataset.refNo = String(item.ref_no);
    const heading = el('header');
    heading.appendChild(el('span', 'evidence-ref', `[${item.ref_no}]`));
    heading.appendChild(el('span', 'evidence-title', evidenceTitle(item)));
    heading.appendChild(el('span', `evidence-kind kind-${item.kind}`, item.kind));
    card.appendChild(heading);
    card.appendChild(el('p', 'evidence-payload', item.payload));
    const bib = answer.bibliography.find((entry) => entry.ref_nos.includes(item.ref_no));
    if (bib) {
      const meta = [
        bib.authors.join('; '),
        bib.venue ?? '',
        bib.year ? String(bib.year) : '',
        bib.external_id ? `id: ${bib.external_id}` : '',
        `enrichment: ${bib.enrichment_status}`,
      ]
        .filter(Boolean)
        .join(' · ');
      card.appendChild(el('p', 'evidence-bib', meta));
    }
    if (item.kind === 'kg_row' && item.source.endpoint) {
      card.appendChild(
        el('p', 'evidence-endpoint', `${item.source.template_id} @ ${item.source.endpoint}`),
      );
    }
    panel.appendChild(card);
  }
  return panel;
}

export function renderProvenanceDrawer(answer: AnswerRecord): HTMLElement {
  const drawer = el('details', 'provenance-drawer');
  drawer.appendChild(el('summary', undefined, 'provenance'));
  const provenance = answer.provenance;
  const rows: [string, string][] = [
    ['model', provenance.model_id],
    ['k', String(provenance.k)],
    ['routing trigger', provenance.routing.trigger],
    ['confidence', provenance.routing.confidence.toFixed(2)],
    ['ungrounded', String(provenance.ungrounded)],
    ['dropped evidence refs', provenance.dropped_evidence_refs.join(', ') || 'none'],
    ['dropped markers', answer.dropped_markers.join(', ') || 'none'],
  ];
  const list = el('dl');
  for (const [key, value] of rows) {
    list.appendChild(el('dt', undefined, key));
    list.appendChild(el('dd', undefined, value));
  }
  drawer.appendChild(list);
  return drawer;
}

export function renderTurn(turn: ChatTurn): HTMLElement {
  const node = el('div', `turn turn-${turn.status}`);
  node.dataset.turnId = turn.id;
  const queryRow = el('div', 'turn-query');
  queryRow.appendChild(el('span', 'query-text', turn.query));
  node.appendChild(queryRow);

  if (turn.status === 'pending') {
    node.appendChild(el('div', 'turn-pending', 'thinking…'));
    return node;
  }
  if (turn.status === 'error' || turn.answer === null) {
    node.appendChild(el('div', 'turn-error', turn.error ?? 'request failed'));
    return node;
  }

  const answer = turn.answer;
  queryRow.appendChild(taskBadge(answer));
  const body = el('div', 'turn-answer');
  if (answer.evidence.task === 'kg_fact' && answer.evidence.items.length > 0) {
    body.appendChild(renderKgTable(answer.evidence));
  } else {
    body.appendChild(renderAnswerText(answer));
  }
  node.appendChild(body);
  if (answer.evidence.items.length > 0) {
    node.appendChild(renderEvidencePanel(answer));
  }
  node.appendChild(renderProvenanceDrawer(answer));
  return node;
}
