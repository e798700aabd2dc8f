/** Thin typed client over the session HTTP API. No inference happens here. */

import type {
  CandidateInput,
  PairProposal,
  SessionConfigInput,
  SessionReport,
  SessionState,
} from "./types";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SessionApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(
        response.status,
        typeof body.code === "string" ? body.code : "unknown",
        typeof body.message === "string" ? body.message : response.statusText,
      );
    }
    return body as T;
  }

  createSession(
    candidates: CandidateInput[],
    config?: SessionConfigInput,
  ): Promise<SessionState> {
    return this.request<SessionState>("/sessions", {
      method: "POST",
      body: JSON.stringify({ candidates, config }),
    });
  }

  getSession(id: string): Promise<SessionState> {
    return this.request<SessionState>(`/sessions/${id}`);
  }

  nextPair(id: string): Promise<PairProposal> {
    return this.request<PairProposal>(`/sessions/${id}/pair`);
  }

  submitFeedback(id: string, winner: number): Promise<SessionState> {
    return this.request<SessionState>(`/sessions/${id}/feedback`, {
      method: "POST",
      body: JSON.stringify({ winner }),
    });
  }

  getReport(id: string): Promise<SessionReport> {
    return this.request<SessionReport>(`/sessions/${id}/report`);
  }

  closeSession(id: string): Promise<SessionState> {
    return this.request<SessionState>(`/sessions/${id}`, { method: "DELETE" });
  }
}
