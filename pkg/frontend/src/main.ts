// Browser entry: wires the API client to the four console views. All state
// lives server-side; every render reads from a fresh response and every
// mutation goes through a decision endpoint (optimistic UI forbidden).

import { ApiClient, submitQueryEdit } from "./api.js";
import {
  buildQueryReview,
  buildQueueRows,
  buildResolutionView,
  escapeHtml,
  filterQueueRows,
  renderMetricsHtml,
  renderQueueHtml,
  renderResolutionHtml,
  renderSegmentsHtml,
  voteBreakdown,
} from "./views.js";
import type { QueryRecord, TicketView } from "./types.js";

const QUEUE_POLL_MS = 2000;

const client = new ApiClient("");
const eventCache = new Map<string, Record<string, unknown>>();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function banner(message: string, kind: "error" | "info" = "error"): void {
  const node = el<HTMLDivElement>("banner");
  node.textContent = message;
  node.className = message ? `banner ${kind}` : "banner hidden";
}

async function refreshQueue(): Promise<void> {
  try {
    const queue = await client.queue();
    for (const entry of queue.entries) {
      if (!eventCache.has(entry.event_id)) {
        try {
          eventCache.set(entry.event_id, await client.event(entry.event_id));
        } catch {
          eventCache.set(entry.event_id, {});
        }
      }
    }
    const rows = buildQueueRows(queue, eventCache);
    const vendor = el<HTMLInputElement>("filter-vendor").value.trim();
    const category = el<HTMLInputElement>("filter-category").value.trim();
    el<HTMLDivElement>("queue-table").innerHTML = renderQueueHtml(
      filterQueueRows(rows, { vendor: vendor || undefined, category: category || undefined }),
    );
    el<HTMLSpanElement>("queue-stamp").textContent = `as of ${queue.generated_at}`;
    banner("");
  } catch {
    banner("queue refresh failed; data may be stale");
  }
}

async function showVerdict(eventId: string): Promise<void> {
  const verdict = await client.verdict(eventId);
  el<HTMLDivElement>("verdict-panel").innerHTML =
    `<p>${escapeHtml(eventId)}: ${voteBreakdown(verdict)}, ` +
    `p=${verdict.criticality_prob.toFixed(2)}, risk=${verdict.risk_score.toFixed(3)}</p>`;
}

function renderQuery(record: QueryRecord): void {
  const view = buildQueryReview(record);
  el<HTMLDivElement>("query-panel").innerHTML =
    `<p>${escapeHtml(view.question)}</p>` +
    `<pre id="query-text">${renderSegmentsHtml(view.segments)}</pre>` +
    `<p>validation: ${view.passed ? "passed" : "failed"}; exemplars: ` +
    `${view.exemplarIds.map(escapeHtml).join(", ") || "none"}` +
    `${view.decision ? `; decision: ${escapeHtml(view.decision)}` : ""}</p>`;
  el<HTMLTextAreaElement>("query-editor").value = view.queryText;
  el<HTMLInputElement>("query-id").value = view.queryId;
}

async function generateQuery(): Promise<void> {
  const platform = el<HTMLSelectElement>("platform").value;
  const question = el<HTMLInputElement>("question").value;
  renderQuery(await client.generateQuery(platform, question));
}

async function sendEdit(): Promise<void> {
  const queryId = el<HTMLInputElement>("query-id").value;
  const text = el<HTMLTextAreaElement>("query-editor").value;
  const outcome = await submitQueryEdit(client, queryId, text);
  if (outcome.ok) {
    renderQuery(outcome.record);
    banner("edit persisted", "info");
  } else {
    // Not persisted: render the server's violations inline over the draft.
    const segments = renderSegmentsHtml(
      buildQueryReview({
        ...(await client.query(queryId)),
        query_text: text,
        validation: outcome.report,
      }).segments,
    );
    el<HTMLDivElement>("query-panel").innerHTML =
      `<pre id="query-text">${segments}</pre>` +
      `<p class="error">rejected: ${outcome.report.violations
        .map((violation) => `${violation.kind} ${escapeHtml(violation.token)}@${violation.position}`)
        .join(", ")}</p>`;
  }
}

async function renderTicket(ticketId: string): Promise<void> {
  const view: TicketView = await client.ticket(ticketId);
  const latest = view.resolutions.at(-1);
  el<HTMLDivElement>("resolution-panel").innerHTML = latest
    ? renderResolutionHtml(buildResolutionView(latest))
    : "<p>no resolution yet</p>";
}

async function resolveTicket(): Promise<void> {
  const ticketId = el<HTMLInputElement>("ticket-id").value;
  const setting = el<HTMLSelectElement>("setting").value;
  await client.resolveTicket(ticketId, setting);
  await renderTicket(ticketId);
}

async function overrideCode(): Promise<void> {
  const ticketId = el<HTMLInputElement>("ticket-id").value;
  const code = el<HTMLSelectElement>("override-code").value;
  await client.ticketDecision(ticketId, "override_code", { code });
  await renderTicket(ticketId);
}

async function acceptResolution(): Promise<void> {
  const ticketId = el<HTMLInputElement>("ticket-id").value;
  await client.ticketDecision(ticketId, "accept");
  await renderTicket(ticketId);
}

async function refreshMetrics(): Promise<void> {
  const { run_ids } = await client.reports();
  const latest = run_ids.at(-1);
  if (!latest) {
    el<HTMLDivElement>("metrics-panel").innerHTML = renderMetricsHtml(null, null);
    return;
  }
  const record = (await client.report(latest)) as any;
  el<HTMLDivElement>("metrics-panel").innerHTML = renderMetricsHtml(
    record.summary?.resolution?.report ?? record.summary?.detection?.report ?? null,
    record.summary?.judge ?? null,
  );
}

function wire(): void {
  el<HTMLButtonElement>("btn-generate").addEventListener("click", () => void generateQuery());
  el<HTMLButtonElement>("btn-edit").addEventListener("click", () => void sendEdit());
  el<HTMLButtonElement>("btn-approve").addEventListener("click", async () => {
    renderQuery(await client.queryDecision(el<HTMLInputElement>("query-id").value, "approve"));
  });
  el<HTMLButtonElement>("btn-reject").addEventListener("click", async () => {
    renderQuery(await client.queryDecision(el<HTMLInputElement>("query-id").value, "reject"));
  });
  el<HTMLButtonElement>("btn-resolve").addEventListener("click", () => void resolveTicket());
  el<HTMLButtonElement>("btn-override").addEventListener("click", () => void overrideCode());
  el<HTMLButtonElement>("btn-accept").addEventListener("click", () => void acceptResolution());
  el<HTMLButtonElement>("btn-metrics").addEventListener("click", () => void refreshMetrics());
  el<HTMLDivElement>("queue-table").addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest("tr[data-event]");
    if (row) void showVerdict(row.getAttribute("data-event")!);
  });
  void refreshQueue();
  setInterval(() => void refreshQueue(), QUEUE_POLL_MS);
}

document.addEventListener("DOMContentLoaded", wire);
