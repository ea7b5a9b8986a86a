import { describe, expect, it } from "vitest";

import { CaseView, InterventionResult } from "../src/api.js";
import {
  renderCaseView,
  renderIntervention,
  renderPendingBadge,
  renderProgress,
  renderQueue,
  renderScoreButtons,
} from "../src/render.js";
import { QueueEntry } from "../src/session.js";

function sampleView(overrides: Partial<CaseView> = {}): CaseView {
  return {
    case_id: "c00001",
    image_url: "/images/c00001",
    cohort: "cancerous",
    concept_scores: [
      { concept_id: "mass", display_name: "Mass", score: 0.91 },
      { concept_id: "unremarkable", display_name: "Unremarkable", score: 0.02 },
    ],
    explanation: [
      { concept_id: "mass", score: 0.91 },
      { concept_id: "irregular_hilum", score: 0.45 },
    ],
    scored_techniques: [],
    label_prediction: {
      label: "Lung Cancer",
      class_scores: { "Lung Cancer": 0.9 },
      head_kind: "DT",
      low_confidence: false,
    },
    ...overrides,
  };
}

describe("renderers", () => {
  it("blinded views never put a ground-truth label in the DOM", () => {
    const html = renderCaseView(sampleView());
    expect(html).not.toContain("ground-truth");
    expect(html).toContain("Lung Cancer"); // model label is shown
  });

  it("unblinded views show the server-exposed ground truth", () => {
    const html = renderCaseView(sampleView({ ground_truth_label: "Healthy" }));
    expect(html).toContain("ground-truth");
    expect(html).toContain("Healthy");
  });

  it("renders the explanation in order with scores", () => {
    const html = renderCaseView(sampleView());
    expect(html.indexOf("mass")).toBeLessThan(html.indexOf("irregular_hilum"));
    expect(html).toContain("0.910");
  });

  it("escapes injected markup", () => {
    const html = renderCaseView(
      sampleView({ case_id: '<img src=x onerror="alert(1)">' }),
    );
    expect(html).not.toContain("<img src=x");
  });

  it("renders four score buttons exactly", () => {
    const html = renderScoreButtons();
    expect(html.match(/score-btn/g)).toHaveLength(4);
    for (const s of [0, 1, 2, 3]) expect(html).toContain(`data-score="${s}"`);
  });

  it("progress counters show per-cohort scored/total", () => {
    const html = renderProgress({
      scored: 5,
      total: 60,
      perCohort: {
        cancerous: { scored: 5, total: 40 },
        healthy: { scored: 0, total: 20 },
      },
    });
    expect(html).toContain("cancerous 5/40");
    expect(html).toContain("healthy 0/20");
  });

  it("queue marks scored and current entries", () => {
    const queue: QueueEntry[] = [
      { caseId: "a", cohort: "healthy", scoredTechniques: new Set(["cbm"]) },
      { caseId: "b", cohort: "cancerous", scoredTechniques: new Set() },
    ];
    const html = renderQueue(queue, "cbm", 1);
    expect(html).toContain('class="queue-item scored"');
    expect(html).toContain('class="queue-item unscored current"');
  });

  it("intervention panel flags label changes and staleness", () => {
    const result: InterventionResult = {
      case_id: "c1",
      overrides: { mass: 0 },
      pre: { label: "Lung Cancer", class_scores: {} },
      post: { label: "Healthy", class_scores: {} },
      pre_explanation: [{ concept_id: "mass", score: 0.9 }],
      post_explanation: [{ concept_id: "unremarkable", score: 1.0 }],
    };
    const html = renderIntervention(result);
    expect(html).toContain("post-label changed");
    expect(renderIntervention(result, true)).toContain("stale");
  });

  it("pending badge appears only when something is queued", () => {
    expect(renderPendingBadge(0)).toBe("");
    expect(renderPendingBadge(2)).toContain("2 pending");
  });
});
