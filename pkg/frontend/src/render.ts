/** Pure HTML renderers. Everything shown is service-attributed data; the
 * ground-truth label is rendered only when the server chose to expose it
 * (unblinded mode), so blinded sessions never have it in the DOM. */

import { CaseView, InterventionResult } from "./api.js";
import { Progress, QueueEntry } from "./session.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderProgress(progress: Progress): string {
  const parts = Object.entries(progress.perCohort)
    .sort(([a], [b]) => a.localeCompare(b))
    .map(
      ([cohort, c]) =>
        `<span class="cohort" data-cohort="${esc(cohort)}">${esc(cohort)} ${c.scored}/${c.total}</span>`,
    );
  return `<div class="progress">scored ${progress.scored}/${progress.total} ${parts.join(" ")}</div>`;
}

export function renderQueue(queue: QueueEntry[], technique: string, currentIndex: number): string {
  const items = queue
    .map((entry, i) => {
      const scored = entry.scoredTechniques.has(technique);
      const classes = [
        "queue-item",
        scored ? "scored" : "unscored",
        i === currentIndex ? "current" : "",
      ]
        .filter(Boolean)
        .join(" ");
      return `<li class="${classes}" data-index="${i}" data-case="${esc(entry.caseId)}">${esc(entry.caseId)}<em>${scored ? "done" : ""}</em></li>`;
    })
    .join("");
  return `<ol class="queue">${items}</ol>`;
}

export function renderCaseView(view: CaseView): string {
  const explanation = view.explanation
    .map(
      (e) =>
        `<li class="explanation-entry"><strong>${esc(e.concept_id)}</strong> <span>${e.score.toFixed(3)}</span></li>`,
    )
    .join("");
  const scores = view.concept_scores
    .map(
      (c) => `
      <tr data-concept="${esc(c.concept_id)}">
        <td>${esc(c.display_name)}</td>
        <td class="score">${c.score.toFixed(3)}</td>
        <td>
          <button class="toggle" data-concept="${esc(c.concept_id)}" data-value="1">force 1</button>
          <button class="toggle" data-concept="${esc(c.concept_id)}" data-value="0">force 0</button>
        </td>
      </tr>`,
    )
    .join("");
  const prediction = view.label_prediction
    ? `<p class="prediction">model label: <strong>${esc(view.label_prediction.label)}</strong>
       <small>(${esc(view.label_prediction.head_kind)}${view.label_prediction.low_confidence ? ", low confidence" : ""})</small></p>`
    : "";
  const truth = view.ground_truth_label
    ? `<p class="ground-truth">ground truth: <strong>${esc(view.ground_truth_label)}</strong></p>`
    : "";
  return `
  <section class="case" data-case="${esc(view.case_id)}">
    <h2>${esc(view.case_id)}</h2>
    ${prediction}
    ${truth}
    <h3>explanation (top-2 concepts)</h3>
    <ol class="explanation">${explanation}</ol>
    <h3>concept scores</h3>
    <table class="concepts"><tbody>${scores}</tbody></table>
  </section>`;
}

export function renderIntervention(result: InterventionResult, stale = false): string {
  const fmt = (entries: { concept_id: string; score: number }[]) =>
    entries.map((e) => `${esc(e.concept_id)} (${e.score.toFixed(2)})`).join(", ");
  const changed = result.pre.label !== result.post.label;
  return `
  <div class="intervention ${stale ? "stale" : ""}">
    <p>pre: <strong class="pre-label">${esc(result.pre.label)}</strong>
       &rarr; post: <strong class="post-label ${changed ? "changed" : ""}">${esc(result.post.label)}</strong>
       ${stale ? '<em class="stale-flag">result stale, retrying...</em>' : ""}</p>
    <p class="pre-explanation">pre top-2: ${fmt(result.pre_explanation)}</p>
    <p class="post-explanation">post top-2: ${fmt(result.post_explanation)}</p>
    <button class="reset">reset overrides</button>
  </div>`;
}

export function renderScoreButtons(): string {
  const labels = [
    "0 fully irrelevant",
    "1 mostly irrelevant",
    "2 mostly relevant",
    "3 fully relevant",
  ];
  const buttons = labels
    .map(
      (label, score) =>
        `<button class="score-btn" data-score="${score}">${esc(label)}</button>`,
    )
    .join("");
  return `<div class="score-buttons">${buttons}</div>`;
}

export function renderPendingBadge(count: number): string {
  return count > 0
    ? `<span class="pending-badge">${count} pending submission${count === 1 ? "" : "s"}</span>`
    : "";
}
