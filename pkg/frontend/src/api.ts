/** Typed client for the review service HTTP API. The console never computes
 * predictions itself: every label and explanation shown comes from these
 * endpoints. */

export interface ConceptScore {
  concept_id: string;
  display_name: string;
  score: number;
}

export interface ExplanationEntry {
  concept_id: string;
  score: number;
}

export interface LabelPrediction {
  label: string;
  class_scores: Record<string, number>;
  head_kind: string;
  low_confidence: boolean;
}

export interface CaseView {
  case_id: string;
  image_url: string;
  cohort: string;
  concept_scores: ConceptScore[];
  explanation: ExplanationEntry[];
  scored_techniques: string[];
  label_prediction?: LabelPrediction;
  ground_truth_label?: string;
}

export interface CaseSummary {
  case_id: string;
  cohort: string;
  scored: boolean;
  image_url: string;
}

export interface CasePage {
  cases: CaseSummary[];
  page: number;
  page_size: number;
  total: number;
}

export interface ScoreSubmission {
  technique: string;
  rater_id: string;
  score: number;
  notes?: string;
  client_token?: string;
}

export interface ScoreAck {
  record_id: string;
  duplicate: boolean;
}

export interface InterventionSide {
  label: string;
  class_scores: Record<string, number>;
}

export interface InterventionResult {
  case_id: string;
  overrides: Record<string, number>;
  pre: InterventionSide;
  post: InterventionSide;
  pre_explanation: ExplanationEntry[];
  post_explanation: ExplanationEntry[];
}

export interface ExpertAggregate {
  histograms: Record<string, Record<string, number[]>>;
  totals: Record<string, number>;
  n_effective: number;
  n_superseded: number;
  n_rejected: number;
}

export interface ListFilter {
  cohort?: string;
  status?: string;
  technique?: string;
  rater_id?: string;
}

/** An HTTP-level rejection from the service ({code, message, detail}). */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail: string = "",
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

async function asJson<T>(resp: Response): Promise<T> {
  const body = await resp.json();
  if (!resp.ok) {
    throw new ApiError(
      resp.status,
      body.code ?? "error",
      body.message ?? resp.statusText,
      body.detail ?? "",
    );
  }
  return body as T;
}

export class ReviewApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private url(path: string, params?: Record<string, string | number | undefined>): string {
    const u = new URL(path, this.baseUrl);
    for (const [key, value] of Object.entries(params ?? {})) {
      if (value !== undefined) u.searchParams.set(key, String(value));
    }
    return u.toString();
  }

  async listCases(filter: ListFilter = {}, page = 1, pageSize = 50): Promise<CasePage> {
    const resp = await this.fetchImpl(
      this.url("/cases", { ...filter, page, page_size: pageSize }),
    );
    return asJson<CasePage>(resp);
  }

  /** Every case matching the filter, walking all pages. */
  async listAllCases(filter: ListFilter = {}): Promise<CaseSummary[]> {
    const all: CaseSummary[] = [];
    let page = 1;
    for (;;) {
      const body = await this.listCases(filter, page, 100);
      all.push(...body.cases);
      if (all.length >= body.total || body.cases.length === 0) return all;
      page += 1;
    }
  }

  async getCase(caseId: string): Promise<CaseView> {
    const resp = await this.fetchImpl(this.url(`/cases/${caseId}`));
    return asJson<CaseView>(resp);
  }

  async submitScore(caseId: string, submission: ScoreSubmission): Promise<ScoreAck> {
    const resp = await this.fetchImpl(this.url(`/cases/${caseId}/score`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(submission),
    });
    return asJson<ScoreAck>(resp);
  }

  async intervene(
    caseId: string,
    overrides: Record<string, number>,
  ): Promise<InterventionResult> {
    const resp = await this.fetchImpl(this.url(`/cases/${caseId}/intervene`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ overrides }),
    });
    return asJson<InterventionResult>(resp);
  }

  async expertScores(): Promise<ExpertAggregate> {
    const resp = await this.fetchImpl(this.url("/metrics/expert-scores"));
    return asJson<ExpertAggregate>(resp);
  }

  imageUrl(caseId: string): string {
    return this.url(`/images/${caseId}`);
  }
}
