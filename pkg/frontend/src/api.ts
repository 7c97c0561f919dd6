import type {
  Chain,
  DeviationRequestBody,
  DeviationResponse,
  ErrorEnvelope,
  FeedbackBody,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Error carrying the server's envelope, so the UI can branch on code. */
export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly details: Record<string, unknown>,
  ) {
    super(message);
  }
}

async function raiseFor(response: Response): Promise<never> {
  let code = "http_error";
  let message = `HTTP ${response.status}`;
  let details: Record<string, unknown> = {};
  try {
    const body = (await response.json()) as ErrorEnvelope;
    code = body.error.code;
    message = body.error.message;
    details = body.error.details ?? {};
  } catch {
    // non-JSON error body; keep the generic message
  }
  throw new ApiRequestError(response.status, code, message, details);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as T;
  }

  async submitDeviation(body: DeviationRequestBody): Promise<DeviationResponse> {
    return this.post("/api/v1/deviations", body);
  }

  async explanation(failureId: number, deviationId: number): Promise<Chain> {
    const response = await this.fetchFn(
      `${this.baseUrl}/api/v1/failures/${failureId}/explanation?deviation=${deviationId}`,
    );
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as Chain;
  }

  async sendFeedback(body: FeedbackBody): Promise<{ feedback_id: string }> {
    return this.post("/api/v1/feedback", body);
  }

  async riskText(body: {
    deviation_id: number;
    failure_id: number;
    justification?: string | null;
  }): Promise<{ text: string }> {
    return this.post("/api/v1/risk-text", body);
  }
}
