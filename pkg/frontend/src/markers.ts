// Citation-marker segmentation. Mirrors the service's marker grammar:
// bracketed integers with optional comma lists. Only refs present in the
// answer's evidence become links; anything else stays plain text.

export interface TextSegment {
  kind: 'text';
  text: string;
}

export interface MarkerSegment {
  kind: 'marker';
  refNo: number;
  text: string; // rendered form, e.g. "[2]"
}

export type Segment = TextSegment | MarkerSegment;

const MARKER_RE = /\[\s*(\d+(?:\s*,\s*\d+)*)\s*\]/g;

export function segmentAnswerText(text: string, validRefs: Set<number>): Segment[] {
  const segments: Segment[] = [];
  let cursor = 0;
  for (const match of text.matchAll(MARKER_RE)) {
    const start = match.index ?? 0;
    const refs = match[1].split(',').map((piece) => parseInt(piece.trim(), 10));
    const linkable = refs.filter((n) => validRefs.has(n));
    if (linkable.length === 0) {
      continue; // dropped markers render as plain text within surrounding flow
    }
    if (start > cursor) {
      segments.push({ kind: 'text', text: text.slice(cursor, start) });
    }
    refs.forEach((n, i) => {
      if (validRefs.has(n)) {
        segments.push({ kind: 'marker', refNo: n, text: `[${n}]` });
      } else {
        segments.push({ kind: 'text', text: `[${n}]` });
      }
      if (i < refs.length - 1) segments.push({ kind: 'text', text: ' ' });
    });
    cursor = start + match[0].length;
  }
  if (cursor < text.length) {
    segments.push({ kind: 'text', text: text.slice(cursor) });
  }
  if (segments.length === 0 && text.length > 0) {
    segments.push({ kind: 'text', text });
  }
  return segments;
}
