/** Review session state: the case queue, scoring flow, and intervention
 * what-ifs. One active rater per session; scoring is optimistic with a FIFO
 * pending queue for submissions that hit a network failure, each retried
 * with its original idempotency token so a flaky connection can never store
 * a score twice. */

import {
  ApiError,
  CaseView,
  InterventionResult,
  ReviewApi,
  ScoreAck,
} from "./api.js";

export interface QueueEntry {
  caseId: string;
  cohort: string;
  /** Techniques this rater has scored for the case (visible state). */
  scoredTechniques: Set<string>;
}

export interface PendingSubmission {
  caseId: string;
  technique: string;
  score: number;
  notes: string;
  clientToken: string;
  attempts: number;
}

export type SubmitOutcome =
  | { status: "stored"; ack: ScoreAck }
  | { status: "queued"; pending: PendingSubmission }
  | { status: "needs-confirmation" }
  | { status: "already-scored" }
  | { status: "rejected"; error: ApiError };

export type InterventionOutcome =
  | { status: "ok"; result: InterventionResult }
  | { status: "stale"; error: Error };

export interface Progress {
  scored: number;
  total: number;
  perCohort: Record<string, { scored: number; total: number }>;
}

function makeToken(): string {
  const rand =
    globalThis.crypto && "randomUUID" in globalThis.crypto
      ? globalThis.crypto.randomUUID()
      : Math.random().toString(36).slice(2);
  return `rc-${Date.now().toString(36)}-${rand}`;
}

export class ReviewSession {
  queue: QueueEntry[] = [];
  currentIndex = -1;
  current: CaseView | null = null;
  /** Accumulated what-if overrides; never written into `current`. */
  overrides: Record<string, number> = {};
  pending: PendingSubmission[] = [];
  lastIntervention: InterventionResult | null = null;

  constructor(
    public api: ReviewApi,
    readonly raterId: string,
    readonly technique: string,
  ) {}

  /** Mirror GET /cases into the queue. On failure the existing queue is
   * kept untouched so a retry affordance loses nothing. */
  async loadQueue(filter: { cohort?: string; status?: string } = {}): Promise<void> {
    const summaries = await this.api.listAllCases({
      ...filter,
      technique: this.technique,
      rater_id: this.raterId,
    });
    this.queue = summaries.map((s) => ({
      caseId: s.case_id,
      cohort: s.cohort,
      scoredTechniques: new Set<string>(s.scored ? [this.technique] : []),
    }));
    if (this.currentIndex >= this.queue.length) this.currentIndex = -1;
  }

  progress(): Progress {
    const perCohort: Progress["perCohort"] = {};
    let scored = 0;
    for (const entry of this.queue) {
      const bucket = (perCohort[entry.cohort] ??= { scored: 0, total: 0 });
      bucket.total += 1;
      if (entry.scoredTechniques.has(this.technique)) {
        bucket.scored += 1;
        scored += 1;
      }
    }
    return { scored, total: this.queue.length, perCohort };
  }

  async openCase(index: number): Promise<CaseView> {
    const entry = this.queue[index];
    if (!entry) throw new Error(`no queue entry at index ${index}`);
    const view = await this.api.getCase(entry.caseId);
    this.currentIndex = index;
    this.current = view;
    this.overrides = {};
    this.lastIntervention = null;
    return view;
  }

  /** First unscored queue index at or after `from` (wraps to search all). */
  nextUnscored(from = this.currentIndex + 1): number {
    for (let step = 0; step < this.queue.length; step += 1) {
      const index = (from + step) % this.queue.length;
      const entry = this.queue[index];
      if (entry && !entry.scoredTechniques.has(this.technique)) return index;
    }
    return -1;
  }

  /** Submit a 0-3 relevance score for the current case.
   *
   * A score of 0 with empty notes asks for confirmation first (a "fully
   * clinically irrelevant" verdict deserves a reason); pass force=true once
   * confirmed. Network failures queue the submission locally with its
   * idempotency token; HTTP rejections are surfaced and nothing is queued. */
  async submitScore(
    score: number,
    notes = "",
    opts: { force?: boolean } = {},
  ): Promise<SubmitOutcome> {
    if (!Number.isInteger(score) || score < 0 || score > 3) {
      throw new RangeError(`score must be an integer in [0, 3], got ${score}`);
    }
    const entry = this.queue[this.currentIndex];
    if (!entry || !this.current) throw new Error("no case open");
    if (entry.scoredTechniques.has(this.technique)) {
      return { status: "already-scored" };
    }
    if (score === 0 && notes.trim() === "" && !opts.force) {
      return { status: "needs-confirmation" };
    }
    const pending: PendingSubmission = {
      caseId: entry.caseId,
      technique: this.technique,
      score,
      notes,
      clientToken: makeToken(),
      attempts: 0,
    };
    return this.send(entry, pending);
  }

  private async send(
    entry: QueueEntry,
    pending: PendingSubmission,
  ): Promise<SubmitOutcome> {
    pending.attempts += 1;
    try {
      const ack = await this.api.submitScore(pending.caseId, {
        technique: pending.technique,
        rater_id: this.raterId,
        score: pending.score,
        notes: pending.notes,
        client_token: pending.clientToken,
      });
      entry.scoredTechniques.add(pending.technique);
      const next = this.nextUnscored();
      if (next >= 0) this.currentIndex = next;
      return { status: "stored", ack };
    } catch (err) {
      if (err instanceof ApiError) {
        return { status: "rejected", error: err };
      }
      this.pending.push(pending); // network failure: keep for retry
      return { status: "queued", pending };
    }
  }

  /** Retry queued submissions in FIFO order; stops at the first one that
   * still cannot reach the service. */
  async flushPending(): Promise<number> {
    let flushed = 0;
    while (this.pending.length > 0) {
      const pending = this.pending[0]!;
      const entry = this.queue.find((e) => e.caseId === pending.caseId);
      this.pending.shift();
      const outcome = await this.send(entry ?? this.ghostEntry(pending.caseId), pending);
      if (outcome.status === "queued") break;
      if (outcome.status === "stored" || outcome.status === "rejected") flushed += 1;
    }
    return flushed;
  }

  private ghostEntry(caseId: string): QueueEntry {
    return { caseId, cohort: "other", scoredTechniques: new Set() };
  }

  /** Accumulate an override and re-predict through the service. The fetched
   * view is never mutated; on failure the overrides are retained and the
   * panel is marked stale. */
  async toggleConcept(conceptId: string, value: 0 | 1): Promise<InterventionOutcome> {
    if (!this.current) throw new Error("no case open");
    this.overrides = { ...this.overrides, [conceptId]: value };
    return this.reintervene();
  }

  async setOverrides(overrides: Record<string, number>): Promise<InterventionOutcome> {
    if (!this.current) throw new Error("no case open");
    this.overrides = { ...overrides };
    return this.reintervene();
  }

  private async reintervene(): Promise<InterventionOutcome> {
    try {
      const result = await this.api.intervene(this.current!.case_id, this.overrides);
      this.lastIntervention = result;
      return { status: "ok", result };
    } catch (err) {
      return { status: "stale", error: err as Error };
    }
  }

  /** Clear overrides and restore the original view from the service. */
  async resetOverrides(): Promise<CaseView> {
    if (!this.current) throw new Error("no case open");
    this.overrides = {};
    this.lastIntervention = null;
    this.current = await this.api.getCase(this.current.case_id);
    return this.current;
  }
}
