import type {
  Decision,
  QueryRecord,
  ResolutionRecord,
  TicketView,
  TriageQueue,
  ValidationReport,
  Verdict,
} from "./types.js";

/** Non-2xx response; carries the parsed body so 422 validation reports can
 * be rendered inline. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: unknown,
  ) {
    super(`API error ${status}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await response.json().catch(() => null);
  if (!response.ok) {
    throw new ApiError(response.status, body);
  }
  return body as T;
}

export class ApiClient {
  constructor(private readonly base: string) {}

  health(): Promise<{ status: string; version: string }> {
    return request(`${this.base}/health`);
  }

  postLogs(events: Record<string, unknown>[]): Promise<{ accepted: string[] }> {
    return request(`${this.base}/logs`, { method: "POST", body: JSON.stringify({ events }) });
  }

  queue(): Promise<TriageQueue> {
    return request(`${this.base}/queue`);
  }

  verdict(eventId: string): Promise<Verdict> {
    return request(`${this.base}/verdicts/${encodeURIComponent(eventId)}`);
  }

  event(eventId: string): Promise<Record<string, unknown>> {
    return request(`${this.base}/events/${encodeURIComponent(eventId)}`);
  }

  generateQuery(platform: string, question: string): Promise<QueryRecord> {
    return request(`${this.base}/queries/generate`, {
      method: "POST",
      body: JSON.stringify({ platform, question }),
    });
  }

  query(queryId: string): Promise<QueryRecord> {
    return request(`${this.base}/queries/${encodeURIComponent(queryId)}`);
  }

  queryDecision(
    queryId: string,
    action: "approve" | "edit" | "reject",
    payload: Record<string, unknown> = {},
  ): Promise<QueryRecord> {
    return request(`${this.base}/queries/${encodeURIComponent(queryId)}/decision`, {
      method: "POST",
      body: JSON.stringify({ action, payload }),
    });
  }

  importTickets(tickets: Record<string, unknown>[]): Promise<{ accepted: string[] }> {
    return request(`${this.base}/tickets`, { method: "POST", body: JSON.stringify({ tickets }) });
  }

  ticket(ticketId: string): Promise<TicketView> {
    return request(`${this.base}/tickets/${encodeURIComponent(ticketId)}`);
  }

  resolveTicket(ticketId: string, setting: string): Promise<ResolutionRecord> {
    return request(
      `${this.base}/tickets/${encodeURIComponent(ticketId)}/resolve?setting=${encodeURIComponent(setting)}`,
      { method: "POST", body: "{}" },
    );
  }

  ticketDecision(
    ticketId: string,
    action: "accept" | "override_code",
    payload: Record<string, unknown> = {},
  ): Promise<ResolutionRecord> {
    return request(`${this.base}/tickets/${encodeURIComponent(ticketId)}/decision`, {
      method: "POST",
      body: JSON.stringify({ action, payload }),
    });
  }

  decisions(): Promise<{ decisions: Decision[] }> {
    return request(`${this.base}/decisions`);
  }

  reports(): Promise<{ run_ids: string[] }> {
    return request(`${this.base}/reports`);
  }

  report(runId: string): Promise<Record<string, unknown>> {
    return request(`${this.base}/reports/${encodeURIComponent(runId)}`);
  }
}

/** Result shape for query edits: the server either persists the edit or
 * answers 422 with the validation report, which the editor renders inline. */
export type EditOutcome =
  | { ok: true; record: QueryRecord }
  | { ok: false; report: ValidationReport };

export async function submitQueryEdit(
  client: ApiClient,
  queryId: string,
  queryText: string,
): Promise<EditOutcome> {
  try {
    const record = await client.queryDecision(queryId, "edit", { query_text: queryText });
    return { ok: true, record };
  } catch (error) {
    if (error instanceof ApiError && error.status === 422) {
      return { ok: false, report: error.body as ValidationReport };
    }
    throw error;
  }
}
