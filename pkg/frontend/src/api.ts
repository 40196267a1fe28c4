import type { ClassesResponse, ExplainRequest, ExplanationBundle } from "./types.js";

export class ApiError extends Error {
  constructor(public code: string, detail: string, public status: number) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin client over the JSON API; the fetch implementation is injectable
 *  so tests can run against recorded fixtures. */
export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (...args) => globalThis.fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchImpl(this.base + path, init);
    } catch (err) {
      throw new ApiError("unreachable", `API unreachable: ${String(err)}`, 0);
    }
    const body = await res.json().catch(() => null);
    if (!res.ok) {
      const code = body?.error_code ?? "http_error";
      const detail = body?.detail ?? `HTTP ${res.status}`;
      throw new ApiError(code, detail, res.status);
    }
    return body as T;
  }

  classes(): Promise<ClassesResponse> {
    return this.request<ClassesResponse>("/classes");
  }

  explain(req: ExplainRequest): Promise<ExplanationBundle> {
    return this.request<ExplanationBundle>("/explain", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
  }
}
