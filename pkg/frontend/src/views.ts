import { highlightSegments, type Segment } from "./highlight.js";
import {
  RESOLUTION_CODES,
  type EvalReport,
  type JudgeScore,
  type QueryRecord,
  type ResolutionRecord,
  type TriageQueue,
  type Verdict,
} from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface QueueRow {
  event_id: string;
  risk_score: number;
  vendor: string;
  category: string;
}

/** Queue rows in exactly the server's order, enriched with event metadata
 * where the event is known. */
export function buildQueueRows(
  queue: TriageQueue,
  events: Map<string, Record<string, unknown>>,
): QueueRow[] {
  return queue.entries.map((entry) => {
    const event = events.get(entry.event_id) ?? {};
    return {
      event_id: entry.event_id,
      risk_score: entry.risk_score,
      vendor: String(event["vendor"] ?? ""),
      category: String(event["category"] ?? ""),
    };
  });
}

export function filterQueueRows(
  rows: QueueRow[],
  filter: { vendor?: string; category?: string },
): QueueRow[] {
  return rows.filter(
    (row) =>
      (!filter.vendor || row.vendor === filter.vendor) &&
      (!filter.category || row.category === filter.category),
  );
}

export function renderQueueHtml(rows: QueueRow[]): string {
  const body = rows
    .map(
      (row) =>
        `<tr data-event="${escapeHtml(row.event_id)}"><td>${escapeHtml(row.event_id)}</td>` +
        `<td>${row.risk_score.toFixed(3)}</td><td>${escapeHtml(row.vendor)}</td>` +
        `<td>${escapeHtml(row.category)}</td></tr>`,
    )
    .join("");
  return (
    "<table><thead><tr><th>event</th><th>risk</th><th>vendor</th><th>category</th></tr></thead>" +
    `<tbody>${body}</tbody></table>`
  );
}

/** e.g. "2 critical / 1 non-critical" */
export function voteBreakdown(verdict: Verdict): string {
  const critical = verdict.votes.filter((vote) => vote.label).length;
  return `${critical} critical / ${verdict.votes.length - critical} non-critical`;
}

export interface QueryReviewView {
  queryId: string;
  question: string;
  queryText: string;
  passed: boolean;
  segments: Segment[];
  exemplarIds: string[];
  decision?: string;
}

export function buildQueryReview(record: QueryRecord): QueryReviewView {
  return {
    queryId: record.query_id,
    question: record.question,
    queryText: record.query_text,
    passed: record.validation.passed,
    segments: highlightSegments(record.query_text, record.validation.violations),
    exemplarIds: record.exemplar_ids,
    decision: record.decision,
  };
}

export function renderSegmentsHtml(segments: Segment[]): string {
  return segments
    .map((segment) =>
      segment.violation
        ? `<mark class="violation" title="${escapeHtml(segment.violation.kind)}">${escapeHtml(segment.text)}</mark>`
        : escapeHtml(segment.text),
    )
    .join("");
}

export interface ResolutionView {
  ticketId: string;
  code: string;
  overrideCode?: string;
  justification: string;
  actions: string[];
  evidenceRefs: string[];
  codeOptions: readonly string[];
  decision?: string;
}

export function buildResolutionView(record: ResolutionRecord): ResolutionView {
  return {
    ticketId: record.ticket_id,
    code: record.output.code,
    overrideCode: record.override_code,
    justification: record.output.justification,
    actions: record.output.actions,
    evidenceRefs: record.evidence_refs,
    codeOptions: RESOLUTION_CODES, // exactly the closed 7-value set
    decision: record.decision,
  };
}

export function renderResolutionHtml(view: ResolutionView): string {
  const options = view.codeOptions
    .map((code) => `<option value="${code}"${code === view.code ? " selected" : ""}>${code}</option>`)
    .join("");
  const actions = view.actions.map((action) => `<li>${escapeHtml(action)}</li>`).join("");
  const badge = view.overrideCode
    ? `<span class="badge override">overridden: ${escapeHtml(view.overrideCode)}</span>`
    : "";
  return (
    `<div class="resolution" data-ticket="${escapeHtml(view.ticketId)}">` +
    `<p>code: <strong>${escapeHtml(view.code)}</strong> ${badge}</p>` +
    `<p>${escapeHtml(view.justification)}</p><ul>${actions}</ul>` +
    `<select id="override-code">${options}</select></div>`
  );
}

export function renderMetricsHtml(report: EvalReport | null, judge: JudgeScore | null): string {
  if (!report && !judge) {
    return "<p>No reports stored yet.</p>";
  }
  const parts: string[] = [];
  if (report) {
    parts.push(
      "<table><tbody>" +
        `<tr><td>accuracy</td><td>${report.accuracy.toFixed(3)}</td></tr>` +
        `<tr><td>precision</td><td>${report.precision.toFixed(3)}</td></tr>` +
        `<tr><td>recall</td><td>${report.recall.toFixed(3)}</td></tr>` +
        `<tr><td>f1</td><td>${report.f1.toFixed(3)}</td></tr>` +
        `<tr><td>fpr</td><td>${report.fpr.toFixed(3)}</td></tr>` +
        "</tbody></table>",
    );
  }
  if (judge) {
    const dims = Object.entries(judge.dimension_means)
      .map(([name, value]) => `${escapeHtml(name)}=${value.toFixed(2)}`)
      .join(", ");
    parts.push(`<p>judge mean ${judge.mean.toFixed(2)} (${dims}; ${judge.unscored} unscored)</p>`);
  }
  return parts.join("\n");
}
