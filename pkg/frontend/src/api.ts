// Thin client over the annotation service; every call carries the annotator token.

import type { AnnotationBody, BatchesResponse, Rubric, StatsResponse, TaskView } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail?: string,
  ) {
    super(detail || code);
  }
}

export interface Credentials {
  annotatorId: string;
  token: string;
}

async function parseError(res: Response): Promise<ApiError> {
  let code = `HTTP ${res.status}`;
  let detail: string | undefined;
  try {
    const body = await res.json();
    if (body && typeof body === "object") {
      code = (body.error as string) ?? (body.detail?.error as string) ?? code;
      detail = typeof body.detail === "string" ? body.detail : undefined;
    }
  } catch {
    /* non-JSON error body */
  }
  return new ApiError(res.status, code, detail);
}

export class ApiClient {
  constructor(
    private creds: Credentials,
    private base = "",
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private headers(): Record<string, string> {
    return { "content-type": "application/json", "X-Annotator-Token": this.creds.token };
  }

  async batches(): Promise<BatchesResponse> {
    const res = await this.fetchFn(`${this.base}/api/batches/${encodeURIComponent(this.creds.annotatorId)}`, {
      headers: this.headers(),
    });
    if (!res.ok) throw await parseError(res);
    return res.json();
  }

  async task(qaId: string): Promise<TaskView> {
    const res = await this.fetchFn(`${this.base}/api/task/${encodeURIComponent(qaId)}`, { headers: this.headers() });
    if (!res.ok) throw await parseError(res);
    return res.json();
  }

  async submit(body: AnnotationBody): Promise<number> {
    const res = await this.fetchFn(`${this.base}/api/annotations`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(body),
    });
    if (!res.ok) throw await parseError(res);
    const payload = await res.json();
    return payload.revision as number;
  }

  async stats(): Promise<StatsResponse> {
    const res = await this.fetchFn(`${this.base}/api/stats`, { headers: this.headers() });
    if (!res.ok) throw await parseError(res);
    return res.json();
  }

  async rubric(): Promise<Rubric> {
    const res = await this.fetchFn(`${this.base}/api/rubric`, { headers: this.headers() });
    if (!res.ok) throw await parseError(res);
    return res.json();
  }
}
