// Thin HTTP client for the documented backend endpoints.

import {
  makeRequest,
  parseResponse,
  type MetricsSnapshot,
  type RequestKind,
  type ResponseEnvelope,
  type StateSnapshot,
} from "./protocol.js";

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    detail: string,
  ) {
    super(detail);
  }
}

export class BackendClient {
  constructor(
    private readonly baseUrl: string,
    private readonly session: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  async send(kind: RequestKind, text: string): Promise<ResponseEnvelope> {
    const response = await this.fetchImpl(`${this.baseUrl}/skill`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(makeRequest(this.session, kind, text)),
    });
    const body: unknown = await response.json();
    if (!response.ok) {
      const err = body as { error?: string; detail?: string };
      // protocol errors are surfaced verbatim
      throw new ApiError(err.error ?? "http_error", err.detail ?? `HTTP ${response.status}`);
    }
    return parseResponse(body);
  }

  async sendUtterance(text: string): Promise<ResponseEnvelope> {
    return this.send("utterance", text);
  }

  async openSession(): Promise<ResponseEnvelope> {
    return this.send("control", "open");
  }

  async state(): Promise<StateSnapshot> {
    const response = await this.fetchImpl(`${this.baseUrl}/state`);
    if (!response.ok) {
      throw new ApiError("http_error", `state request failed: ${response.status}`);
    }
    return (await response.json()) as StateSnapshot;
  }

  async metrics(): Promise<MetricsSnapshot> {
    const response = await this.fetchImpl(`${this.baseUrl}/metrics`);
    if (!response.ok) {
      throw new ApiError("http_error", `metrics request failed: ${response.status}`);
    }
    return (await response.json()) as MetricsSnapshot;
  }
}
