// Wire formats of the triage service. These mirror the server JSON exactly;
// the console never reshapes server state, it only renders it.

export interface QueueEntry {
  event_id: string;
  risk_score: number;
  ensemble_label: boolean;
}

export interface TriageQueue {
  generated_at: string;
  entries: QueueEntry[];
}

export interface Vote {
  provider_id: string;
  label: boolean;
  confidence: number;
}

export interface Verdict {
  event_id: string;
  votes: Vote[];
  ensemble_label: boolean;
  criticality_prob: number;
  risk_score: number;
}

export interface Violation {
  kind: "unknown_token" | "clause_order" | "unbalanced_delimiter" | "empty";
  token: string;
  position: number;
}

export interface ValidationReport {
  passed: boolean;
  violations: Violation[];
}

export interface QueryRecord {
  query_id: string;
  platform: string;
  question: string;
  query_text: string;
  exemplar_ids: string[];
  validation: ValidationReport;
  provenance: { prompt_digest: string; provider_id: string };
  decision?: string;
}

export interface ResolutionOutput {
  code: string;
  justification: string;
  actions: string[];
}

export interface ResolutionRecord {
  ticket_id: string;
  setting: string;
  output: ResolutionOutput;
  evidence_refs: string[];
  model_id: string;
  override_code?: string;
  decision?: string;
}

export interface Decision {
  subject_kind: "query" | "ticket";
  subject_id: string;
  action: string;
  payload: Record<string, unknown>;
  actor: string;
  at: string;
}

export interface TicketView {
  ticket: Record<string, unknown>;
  resolutions: ResolutionRecord[];
  decisions: Decision[];
}

export interface PerClassReport {
  precision: number;
  recall: number;
  f1: number;
  fpr: number;
  support: number;
}

export interface EvalReport {
  accuracy: number;
  precision: number;
  recall: number;
  f1: number;
  fpr: number;
  sample_count: number;
  per_class: Record<string, PerClassReport>;
}

export interface JudgeScore {
  mean: number;
  dimension_means: Record<string, number>;
  unscored: number;
}

// The closed set. The override selector must offer exactly these.
export const RESOLUTION_CODES = [
  "BenignPositive",
  "ExternalAttackUnsuccessful",
  "ExternalAttackSuccessful",
  "InsiderThreatUnsuccessful",
  "InsiderThreatSuccessful",
  "EscalatedNoResponse",
  "FalsePositive",
] as const;

export type ResolutionCode = (typeof RESOLUTION_CODES)[number];
