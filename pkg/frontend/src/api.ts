// Thin typed client for the orchestrator API. Every scene mutation goes
// through here; the client never edits documents locally.

import type {
  ApiErrorPayload,
  CommandResponse,
  EventsResponse,
  LeaderboardResponse,
  SceneDocumentJson,
  ScheduleResponse,
} from './types';

export class ApiError extends Error {
  status: number;
  payload: ApiErrorPayload | null;

  constructor(status: number, payload: ApiErrorPayload | null, fallback: string) {
    super(payload?.message ?? fallback);
    this.status = status;
    this.payload = payload;
  }
}

async function parseError(response: Response): Promise<never> {
  let payload: ApiErrorPayload | null = null;
  try {
    const body = await response.json();
    payload = (body?.detail ?? body) as ApiErrorPayload;
    if (typeof payload === 'string') {
      payload = { error: 'Error', message: payload };
    }
  } catch {
    payload = null;
  }
  throw new ApiError(response.status, payload, `HTTP ${response.status}`);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, '')}${path}`;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.url(path));
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.url(path), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.getJson('/healthz');
  }

  createSession(body: { document?: unknown; path?: string; session_id?: string }) {
    return this.postJson<{ session_id: string; revision: number }>('/sessions', body);
  }

  getScene(sessionId: string): Promise<SceneDocumentJson> {
    return this.getJson(`/sessions/${sessionId}/scene`);
  }

  async getSceneGlb(sessionId: string): Promise<ArrayBuffer> {
    const response = await fetch(this.url(`/sessions/${sessionId}/scene?format=glb`));
    if (!response.ok) await parseError(response);
    return response.arrayBuffer();
  }

  sendCommand(sessionId: string, text: string, baseRevision?: number): Promise<CommandResponse> {
    const body: Record<string, unknown> = { text };
    if (baseRevision !== undefined) body.base_revision = baseRevision;
    return this.postJson(`/sessions/${sessionId}/commands`, body);
  }

  undo(sessionId: string): Promise<CommandResponse> {
    return this.postJson(`/sessions/${sessionId}/undo`, {});
  }

  redo(sessionId: string): Promise<CommandResponse> {
    return this.postJson(`/sessions/${sessionId}/redo`, {});
  }

  events(sessionId: string, since: number, timeoutS = 25): Promise<EventsResponse> {
    return this.getJson(
      `/sessions/${sessionId}/events?since=${since}&timeout_s=${timeoutS}`
    );
  }

  schedule(dimension: string): Promise<ScheduleResponse> {
    return this.getJson(`/eval/schedule?dimension=${dimension}`);
  }

  submitVerdict(body: {
    dimension: string;
    index: number;
    winner: 'A' | 'B';
    judge: string;
  }): Promise<{ recorded: unknown; total_records: number }> {
    return this.postJson('/eval/verdicts', body);
  }

  leaderboard(): Promise<LeaderboardResponse> {
    return this.getJson('/eval/leaderboard');
  }
}
