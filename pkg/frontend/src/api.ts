// Thin typed client over the service's HTTP+JSON API. The UI talks to the
// server exclusively through this module; it never invents content.

import type {
  ApiErrorBody,
  HistoryResponse,
  MessageResponse,
  PatientRow,
  PersonalityTraits,
  SessionDescriptor,
} from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorBody | null,
  ) {
    super(body ? `${body.code}: ${body.detail}` : `HTTP ${status}`);
  }

  get code(): string {
    return this.body?.code ?? `http_${this.status}`;
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      let body: ApiErrorBody | null = null;
      try {
        body = (await response.json()) as ApiErrorBody;
      } catch {
        body = null;
      }
      throw new ApiRequestError(response.status, body);
    }
    if (response.status === 204) {
      return undefined as T;
    }
    return (await response.json()) as T;
  }

  listPatients(): Promise<PatientRow[]> {
    return this.request<PatientRow[]>("/patients");
  }

  createSession(
    subjectId: number,
    hadmId: number,
    personality: PersonalityTraits | number | "random",
  ): Promise<SessionDescriptor> {
    return this.request<SessionDescriptor>("/sessions", {
      method: "POST",
      body: JSON.stringify({
        subject_id: subjectId,
        hadm_id: hadmId,
        personality,
      }),
    });
  }

  sendMessage(sessionId: string, text: string): Promise<MessageResponse> {
    return this.request<MessageResponse>(`/sessions/${sessionId}/message`, {
      method: "POST",
      body: JSON.stringify({ text }),
    });
  }

  getHistory(sessionId: string): Promise<HistoryResponse> {
    return this.request<HistoryResponse>(`/sessions/${sessionId}/history`);
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request<void>(`/sessions/${sessionId}`, { method: "DELETE" });
  }
}
