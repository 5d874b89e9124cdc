import { describe, expect, it } from "vitest";

import { highlightSegments, highlightStart } from "../src/highlight.js";
import {
  buildQueueRows,
  buildResolutionView,
  filterQueueRows,
  renderQueueHtml,
  renderSegmentsHtml,
  voteBreakdown,
} from "../src/views.js";
import { RESOLUTION_CODES, type ResolutionRecord, type TriageQueue, type Verdict } from "../src/types.js";

describe("highlight", () => {
  it("starts the highlight span at the reported offset", () => {
    const text = "SELECT sourceip, DROPTABLE FROM events";
    const offset = text.indexOf("DROPTABLE"); // 17
    expect(offset).toBe(17);
    const segments = highlightSegments(text, [
      { kind: "unknown_token", token: "DROPTABLE", position: offset },
    ]);
    expect(highlightStart(segments, 0)).toBe(17);
    expect(segments.map((segment) => segment.text).join("")).toBe(text);
    const marked = segments.find((segment) => segment.violation);
    expect(marked?.text).toBe("DROPTABLE");
  });

  it("renders violations as mark elements", () => {
    const html = renderSegmentsHtml(
      highlightSegments("SELECT x FROM events", [
        { kind: "unknown_token", token: "x", position: 7 },
      ]),
    );
    expect(html).toContain('<mark class="violation" title="unknown_token">x</mark>');
  });

  it("handles zero-length empty violations", () => {
    const segments = highlightSegments("", [{ kind: "empty", token: "", position: 0 }]);
    expect(segments).toHaveLength(0);
  });
});

describe("queue view", () => {
  const queue: TriageQueue = {
    generated_at: "2024-03-01T00:00:00Z",
    entries: [
      { event_id: "b", risk_score: 0.9, ensemble_label: true },
      { event_id: "a", risk_score: 0.9, ensemble_label: true },
      { event_id: "c", risk_score: 0.2, ensemble_label: true },
    ],
  };

  it("keeps exactly the server order", () => {
    const rows = buildQueueRows(queue, new Map());
    expect(rows.map((row) => row.event_id)).toEqual(["b", "a", "c"]);
  });

  it("renders one table row per entry in order", () => {
    const html = renderQueueHtml(buildQueueRows(queue, new Map()));
    const ids = [...html.matchAll(/data-event="(\w+)"/g)].map((match) => match[1]);
    expect(ids).toEqual(["b", "a", "c"]);
  });

  it("filters by vendor and category without reordering", () => {
    const events = new Map<string, Record<string, unknown>>([
      ["b", { vendor: "acme", category: "auth" }],
      ["a", { vendor: "zen", category: "auth" }],
      ["c", { vendor: "acme", category: "net" }],
    ]);
    const rows = buildQueueRows(queue, events);
    expect(filterQueueRows(rows, { vendor: "acme" }).map((row) => row.event_id)).toEqual(["b", "c"]);
    expect(filterQueueRows(rows, { category: "auth" }).map((row) => row.event_id)).toEqual(["b", "a"]);
  });
});

describe("verdict view", () => {
  it("summarizes a 2/3 split", () => {
    const verdict: Verdict = {
      event_id: "e",
      ensemble_label: true,
      criticality_prob: 0.8,
      risk_score: 0.7,
      votes: [
        { provider_id: "p0", label: true, confidence: 0.9 },
        { provider_id: "p1", label: true, confidence: 0.7 },
        { provider_id: "p2", label: false, confidence: 0.6 },
      ],
    };
    expect(voteBreakdown(verdict)).toBe("2 critical / 1 non-critical");
  });
});

describe("resolution view", () => {
  it("offers exactly the seven closed-set codes", () => {
    const record: ResolutionRecord = {
      ticket_id: "t",
      setting: "no_sqm",
      output: { code: "FalsePositive", justification: "j", actions: ["close"] },
      evidence_refs: [],
      model_id: "m",
    };
    const view = buildResolutionView(record);
    expect(view.codeOptions).toHaveLength(7);
    expect([...view.codeOptions]).toEqual([...RESOLUTION_CODES]);
  });
});
