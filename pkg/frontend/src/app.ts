/** DOM glue: wires the session to the page, adds the 0-3 keyboard
 * shortcuts, the score-0 confirmation, the pan/zoom/window-level image
 * viewer, and periodic retry of queued submissions. */

import { ReviewApi } from "./api.js";
import {
  renderCaseView,
  renderIntervention,
  renderPendingBadge,
  renderProgress,
  renderQueue,
  renderScoreButtons,
} from "./render.js";
import { ReviewSession } from "./session.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? window.location.origin;
const raterId = params.get("rater") ?? "rater-1";
const technique = params.get("technique") ?? "cbm";

const api = new ReviewApi(baseUrl);
const session = new ReviewSession(api, raterId, technique);

const el = (id: string) => document.getElementById(id)!;

function refreshQueue(): void {
  el("queue").innerHTML = renderQueue(session.queue, technique, session.currentIndex);
  el("progress").innerHTML = renderProgress(session.progress());
  el("pending").innerHTML = renderPendingBadge(session.pending.length);
}

function refreshCase(): void {
  if (!session.current) return;
  el("case").innerHTML = renderCaseView(session.current);
  el("buttons").innerHTML = renderScoreButtons();
  const img = el("xray") as HTMLImageElement;
  img.src = api.imageUrl(session.current.case_id);
  resetViewer();
}

async function openIndex(index: number): Promise<void> {
  await session.openCase(index);
  el("intervention").innerHTML = "";
  refreshQueue();
  refreshCase();
}

async function score(value: number): Promise<void> {
  const notes = (el("notes") as HTMLTextAreaElement).value;
  let outcome = await session.submitScore(value, notes);
  if (outcome.status === "needs-confirmation") {
    const reason = window.prompt(
      "Score 0 means fully clinically irrelevant. Add a short reason (or leave blank to submit anyway):",
    );
    if (reason === null) return; // cancelled
    outcome = await session.submitScore(value, reason, { force: true });
  }
  if (outcome.status === "rejected") {
    showBanner(`rejected: ${outcome.error.message}`);
    return;
  }
  if (outcome.status === "queued") {
    showBanner("offline: submission queued, will retry");
  }
  (el("notes") as HTMLTextAreaElement).value = "";
  refreshQueue();
  if (outcome.status === "stored" && session.currentIndex >= 0) {
    await openIndex(session.currentIndex);
  }
}

function showBanner(text: string): void {
  const banner = el("banner");
  banner.textContent = text;
  banner.classList.add("visible");
  setTimeout(() => banner.classList.remove("visible"), 4000);
}

// ---------------------------------------------------------------------------
// Image viewer: pan (drag), zoom (wheel), window-level (sliders)
// ---------------------------------------------------------------------------

const viewer = { scale: 1, x: 0, y: 0, dragging: false, lastX: 0, lastY: 0 };

function applyViewer(): void {
  const img = el("xray") as HTMLImageElement;
  img.style.transform = `translate(${viewer.x}px, ${viewer.y}px) scale(${viewer.scale})`;
  const brightness = (el("level") as HTMLInputElement).value;
  const contrast = (el("window") as HTMLInputElement).value;
  img.style.filter = `brightness(${brightness}%) contrast(${contrast}%)`;
}

function resetViewer(): void {
  viewer.scale = 1;
  viewer.x = 0;
  viewer.y = 0;
  (el("level") as HTMLInputElement).value = "100";
  (el("window") as HTMLInputElement).value = "100";
  applyViewer();
}

function wireViewer(): void {
  const frame = el("viewer");
  frame.addEventListener("wheel", (event) => {
    event.preventDefault();
    const factor = (event as WheelEvent).deltaY < 0 ? 1.1 : 1 / 1.1;
    viewer.scale = Math.min(8, Math.max(0.5, viewer.scale * factor));
    applyViewer();
  });
  frame.addEventListener("mousedown", (event) => {
    viewer.dragging = true;
    viewer.lastX = (event as MouseEvent).clientX;
    viewer.lastY = (event as MouseEvent).clientY;
  });
  window.addEventListener("mouseup", () => (viewer.dragging = false));
  window.addEventListener("mousemove", (event) => {
    if (!viewer.dragging) return;
    viewer.x += (event as MouseEvent).clientX - viewer.lastX;
    viewer.y += (event as MouseEvent).clientY - viewer.lastY;
    viewer.lastX = (event as MouseEvent).clientX;
    viewer.lastY = (event as MouseEvent).clientY;
    applyViewer();
  });
  el("level").addEventListener("input", applyViewer);
  el("window").addEventListener("input", applyViewer);
}

// ---------------------------------------------------------------------------
// Event wiring
// ---------------------------------------------------------------------------

document.addEventListener("click", async (event) => {
  const target = event.target as HTMLElement;
  const queueItem = target.closest<HTMLElement>(".queue-item");
  if (queueItem) {
    await openIndex(Number(queueItem.dataset.index));
    return;
  }
  if (target.matches(".score-btn")) {
    await score(Number(target.dataset.score));
    return;
  }
  if (target.matches(".toggle")) {
    const outcome = await session.toggleConcept(
      target.dataset.concept!,
      Number(target.dataset.value) as 0 | 1,
    );
    if (outcome.status === "ok") {
      el("intervention").innerHTML = renderIntervention(outcome.result);
    } else if (session.lastIntervention) {
      el("intervention").innerHTML = renderIntervention(session.lastIntervention, true);
    }
    return;
  }
  if (target.matches(".reset")) {
    await session.resetOverrides();
    el("intervention").innerHTML = "";
    refreshCase();
  }
});

document.addEventListener("keydown", async (event) => {
  if ((event.target as HTMLElement).tagName === "TEXTAREA") return;
  if (event.key >= "0" && event.key <= "3") {
    await score(Number(event.key));
  }
});

setInterval(async () => {
  if (session.pending.length > 0) {
    const flushed = await session.flushPending();
    if (flushed > 0) {
      showBanner(`${flushed} queued submission(s) delivered`);
      refreshQueue();
    }
  }
}, 5000);

async function start(): Promise<void> {
  wireViewer();
  try {
    await session.loadQueue();
  } catch (err) {
    showBanner(`cannot reach service: ${(err as Error).message}`);
    el("retry").classList.add("visible");
    return;
  }
  refreshQueue();
  const first = session.nextUnscored(0);
  if (first >= 0) await openIndex(first);
}

el("retry").addEventListener("click", start);
void start();
