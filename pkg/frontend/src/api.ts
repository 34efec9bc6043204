/** Typed client for the algsteps HTTP JSON API. */

/** One labeled score, as returned by both classify and feedback. */
export interface LabelScore {
  label: string;
  prob: number;
}

export interface ClassifyResponse {
  operations: LabelScore[];
  valid: boolean;
}

export interface FeedbackResponse {
  feedback: LabelScore[];
}

export interface HealthResponse {
  status: string;
  fingerprint: string;
}

/** Error body the server sends with 4xx/5xx responses. */
export interface ApiErrorBody {
  error: string;
  field?: string;
  offset?: number;
}

/** Non-2xx response; status 422 carries parse diagnostics in the body. */
export class ApiError extends Error {
  constructor(readonly status: number, readonly body: ApiErrorBody) {
    super(`${status}: ${body.error}`);
  }
}

/** Minimal surface the UI needs; mocked in tests with recorded fixtures. */
export interface ApiClient {
  classify(before: string, after: string): Promise<ClassifyResponse>;
  feedback(before: string, after: string): Promise<FeedbackResponse>;
  health(): Promise<HealthResponse>;
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  const text = await response.text();
  let parsed: unknown;
  try {
    parsed = text ? JSON.parse(text) : {};
  } catch {
    throw new ApiError(response.status, { error: `unparseable response body` });
  }
  if (!response.ok) {
    throw new ApiError(response.status, parsed as ApiErrorBody);
  }
  return parsed as T;
}

function post<T>(base: string, route: string, payload: object): Promise<T> {
  return request<T>(`${base}${route}`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
}

/** Client bound to a server base URL ("" = same origin). */
export function makeClient(base: string): ApiClient {
  return {
    classify: (before, after) =>
      post<ClassifyResponse>(base, "/api/classify", { before, after }),
    feedback: (before, after) =>
      post<FeedbackResponse>(base, "/api/feedback", { before, after }),
    health: () => request<HealthResponse>(`${base}/api/health`),
  };
}
