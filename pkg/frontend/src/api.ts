import type { GenerateResult, MetricView, SessionView } from "./types.js";

export class ApiError extends Error {
  status: number;
  violations: string[];
  pending: string[];

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.status = status;
    this.violations = [];
    this.pending = [];
    if (detail && typeof detail === "object") {
      const d = detail as Record<string, unknown>;
      if (Array.isArray(d.violations)) this.violations = d.violations as string[];
      if (Array.isArray(d.pending)) this.pending = d.pending as string[];
      if (typeof d.message === "string") this.message = d.message;
    }
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(response.status, (body as { detail?: unknown }).detail ?? body);
  }
  return body as T;
}

export class ApiClient {
  constructor(private baseUrl: string, private fetchImpl: typeof fetch = fetch) {}

  private async get<T>(path: string): Promise<T> {
    return unwrap<T>(await this.fetchImpl(`${this.baseUrl}/v1${path}`));
  }

  private async post<T>(path: string, payload?: unknown): Promise<T> {
    return unwrap<T>(
      await this.fetchImpl(`${this.baseUrl}/v1${path}`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: payload === undefined ? "{}" : JSON.stringify(payload),
      }),
    );
  }

  createSession(): Promise<{ id: string }> {
    return this.post("/sessions");
  }

  getState(id: string): Promise<SessionView> {
    return this.get(`/sessions/${id}`);
  }

  postProduct(id: string, selected: string[]): Promise<SessionView> {
    return this.post(`/sessions/${id}/product`, { selected });
  }

  postDecision(id: string, decision: string, value: boolean | string): Promise<SessionView> {
    return this.post(`/sessions/${id}/process/decisions`, { decision, value });
  }

  postRollback(id: string, count: number): Promise<SessionView> {
    return this.post(`/sessions/${id}/process/rollback`, { count });
  }

  postFinish(id: string): Promise<SessionView> {
    return this.post(`/sessions/${id}/process/finish`);
  }

  postResource(id: string, selected: string[]): Promise<SessionView> {
    return this.post(`/sessions/${id}/resource`, { selected });
  }

  postGenerate(id: string, base = "base.fbn"): Promise<GenerateResult> {
    return this.post(`/sessions/${id}/generate`, { base });
  }

  getMetrics(id: string): Promise<MetricView> {
    return this.get(`/sessions/${id}/metrics`);
  }
}
