/** Typed client for the annotation service HTTP API.
 *
 * All server truth flows through these six endpoints; the UI keeps no state
 * beyond the worker token. The fetch implementation is injectable so tests
 * can simulate network failures.
 */

export interface Task {
  candidate_id: string;
  mode: "msd" | "dsd";
  sentences: string[];
  focus: number;
  phase: string;
}

export interface ScreeningState {
  total: number;
  answered: number;
  correct: number;
  passed: boolean | null;
}

export interface NextTaskResponse {
  task: Task | null;
  phase: string;
  screening: ScreeningState | null;
  done: boolean;
}

export interface SubmitAck {
  accepted: boolean;
  phase?: string;
  candidate_id?: string;
}

export interface Progress {
  candidates: number;
  screening_probes: number;
  workers: number;
  verification_judgments: number;
  fully_judged: number;
  closed: boolean;
  kept: number | null;
  baseline_judgments: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail: string,
  ) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private token = "";

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  private async request(
    path: string,
    init: RequestInit = {},
    headers: Record<string, string> = {},
  ): Promise<unknown> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      ...init,
      headers: {
        "Content-Type": "application/json",
        ...(this.token ? { Authorization: `Bearer ${this.token}` } : {}),
        ...headers,
      },
    });
    const body = await resp.text();
    let parsed: unknown = null;
    try {
      parsed = body ? JSON.parse(body) : null;
    } catch {
      parsed = null;
    }
    if (!resp.ok) {
      const err = (parsed ?? {}) as { error?: string; detail?: string };
      throw new ApiError(resp.status, err.error ?? "http_error", err.detail ?? body);
    }
    return parsed;
  }

  nextTask(): Promise<NextTaskResponse> {
    return this.request("/api/tasks/next") as Promise<NextTaskResponse>;
  }

  submitJudgment(
    candidateId: string,
    label: 0 | 1,
    idempotencyKey: string,
  ): Promise<SubmitAck> {
    return this.request("/api/judgments", {
      method: "POST",
      body: JSON.stringify({
        candidate_id: candidateId,
        label,
        idempotency_key: idempotencyKey,
      }),
    }) as Promise<SubmitAck>;
  }

  progress(adminToken?: string): Promise<Progress> {
    return this.request(
      "/api/progress",
      {},
      adminToken ? { "X-Admin-Token": adminToken } : {},
    ) as Promise<Progress>;
  }

  runFilter(adminToken: string): Promise<{ kept_count: number }> {
    return this.request(
      "/api/filter",
      { method: "POST", body: JSON.stringify({}) },
      { "X-Admin-Token": adminToken },
    ) as Promise<{ kept_count: number }>;
  }

  async exportKept(adminToken: string): Promise<string> {
    const resp = await this.fetchImpl(this.baseUrl + "/api/export", {
      headers: { "X-Admin-Token": adminToken },
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, "export_failed", await resp.text());
    }
    return resp.text();
  }
}
