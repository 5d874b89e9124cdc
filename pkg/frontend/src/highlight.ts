import type { Violation } from "./types.js";

export interface Segment {
  text: string;
  violation?: Violation;
}

/** Split query text into plain and highlighted segments.
 *
 * Each violation highlights the span starting at its reported character
 * offset; zero-length tokens (e.g. `empty`) highlight a single caret
 * position. Overlapping violations keep the earliest one.
 */
export function highlightSegments(queryText: string, violations: Violation[]): Segment[] {
  const ordered = [...violations].sort((a, b) => a.position - b.position);
  const segments: Segment[] = [];
  let cursor = 0;
  for (const violation of ordered) {
    if (violation.position < cursor || violation.position > queryText.length) {
      continue;
    }
    if (violation.position > cursor) {
      segments.push({ text: queryText.slice(cursor, violation.position) });
    }
    const length = Math.max(violation.token.length, 1);
    const end = Math.min(violation.position + length, queryText.length);
    if (end > violation.position) {
      segments.push({ text: queryText.slice(violation.position, end), violation });
    }
    cursor = end;
  }
  if (cursor < queryText.length) {
    segments.push({ text: queryText.slice(cursor) });
  }
  return segments;
}

/** Character offset where the n-th highlighted segment starts. */
export function highlightStart(segments: Segment[], index: number): number {
  let offset = 0;
  let seen = 0;
  for (const segment of segments) {
    if (segment.violation) {
      if (seen === index) {
        return offset;
      }
      seen += 1;
    }
    offset += segment.text.length;
  }
  return -1;
}
