/** Typed fetch client for the service's control API. */

import type {
  ExportPaths,
  IngestStats,
  LifecycleTable,
  SessionSummary,
  SessionView,
} from "./types.js";

export interface CreateSessionFields {
  subject_id: string;
  age_range: string;
  sex: string;
  dominant_leg: string;
}

export interface CreatedSession {
  session_id: string;
  state: string;
}

/** A service rejection, keeping the machine-readable code verbatim. */
export class ApiError extends Error {
  constructor(
    readonly code: string,
    readonly detail: string,
    readonly status: number,
  ) {
    super(`${code}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base = "",
    private readonly fetchFn: FetchLike = (url, init) =>
      globalThis.fetch(url, init),
  ) {}

  createSession(fields: CreateSessionFields): Promise<CreatedSession> {
    return this.request("POST", "/api/sessions", fields);
  }

  calibrate(sessionId: string): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${sessionId}/calibrate`);
  }

  record(sessionId: string): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${sessionId}/record`);
  }

  stop(sessionId: string): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${sessionId}/stop`);
  }

  sessionView(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/api/sessions/${sessionId}`);
  }

  summary(sessionId: string): Promise<SessionSummary> {
    return this.request("GET", `/api/sessions/${sessionId}/summary`);
  }

  exportSession(sessionId: string): Promise<ExportPaths> {
    return this.request("POST", `/api/sessions/${sessionId}/export`);
  }

  stats(): Promise<IngestStats> {
    return this.request("GET", "/api/stats");
  }

  lifecycle(): Promise<LifecycleTable> {
    return this.request("GET", "/api/lifecycle");
  }

  liveFeedUrl(): string {
    return `${this.base}/api/live`;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      throw await toApiError(response);
    }
    return (await response.json()) as T;
  }
}

/** The service reports {"error": message, "code": machine_code}; anything
 * else (proxies, crashes) degrades to the bare HTTP status. */
async function toApiError(response: Response): Promise<ApiError> {
  try {
    const body: unknown = await response.json();
    if (body && typeof body === "object" && "code" in body) {
      const rejection = body as { code: unknown; error?: unknown };
      if (typeof rejection.code === "string") {
        return new ApiError(
          rejection.code,
          String(rejection.error ?? ""),
          response.status,
        );
      }
    }
  } catch {
    // body was not JSON; fall through to the generic error
  }
  return new ApiError(
    `http_${response.status}`,
    response.statusText || "request failed",
    response.status,
  );
}
