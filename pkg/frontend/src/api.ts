// Typed client for the session service. Every payload in either
// direction carries `v: 1`; anything else is rejected here so the rest
// of the runner never sees an unversioned object. Errors become
// ApiError with the HTTP status attached — callers branch on status
// (409 stale, 422 validation, 429 playback cap), never on message
// text.

export const PAYLOAD_VERSION = 1;

export interface QuestionnaireItem {
  item_id: string;
  prompt: string;
  scale_points: number;
  required: boolean;
  locale: Record<string, string>;
}

export interface SessionInfo {
  session_id: string;
  participant_id: string;
  experiment_id: string;
  n_trials: number;
  playback_limit: number;
  questionnaire: QuestionnaireItem[];
}

export interface TrialInfo {
  trial_id: string;
  index: number;
  n_trials: number;
  options: string[];
  audio_url: string;
  questionnaire: QuestionnaireItem[];
}

export type NextReply = { done: true } | { done: false; trial: TrialInfo };

export interface SubmitAck {
  accepted: boolean;
  duplicate: boolean;
  cursor: number;
  done: boolean;
}

export interface SubmitBody {
  trial_id: string;
  choice: string;
  mos: Record<string, number>;
  elapsed_ms?: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

/** Network-level failure (server unreachable, connection dropped). */
export class TransportError extends Error {
  constructor(cause: unknown) {
    super(`request failed: ${cause instanceof Error ? cause.message : cause}`);
    this.name = "TransportError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class SessionApi {
  private readonly fetchImpl: FetchLike;

  constructor(readonly baseUrl: string, fetchImpl?: FetchLike) {
    // wrap the global so it is not called unbound (browsers require
    // fetch to be invoked on window)
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  async createSession(
    experimentId: string,
    demographics: Record<string, string>,
    participantId?: string,
  ): Promise<SessionInfo> {
    return this.requestJSON<SessionInfo>(
      `/experiments/${encodeURIComponent(experimentId)}/sessions`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          v: PAYLOAD_VERSION,
          demographics,
          ...(participantId ? { participant_id: participantId } : {}),
        }),
      },
    );
  }

  async nextTrial(sessionId: string): Promise<NextReply> {
    return this.requestJSON<NextReply>(
      `/sessions/${encodeURIComponent(sessionId)}/next`,
    );
  }

  async submitResponse(
    sessionId: string,
    body: SubmitBody,
  ): Promise<SubmitAck> {
    return this.requestJSON<SubmitAck>(
      `/sessions/${encodeURIComponent(sessionId)}/responses`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ v: PAYLOAD_VERSION, ...body }),
      },
    );
  }

  /** One playback-counted fetch; the server 429s past the limit. */
  async fetchAudio(audioUrl: string): Promise<ArrayBuffer> {
    const resp = await this.rawFetch(audioUrl);
    if (!resp.ok) {
      throw new ApiError(resp.status, await errorMessage(resp));
    }
    return resp.arrayBuffer();
  }

  /** The experiment's response log, one JSON object per line. */
  async exportResponses(experimentId: string): Promise<string> {
    const resp = await this.rawFetch(
      `/experiments/${encodeURIComponent(experimentId)}/export`,
    );
    if (!resp.ok) {
      throw new ApiError(resp.status, await errorMessage(resp));
    }
    return resp.text();
  }

  private async rawFetch(path: string, init?: RequestInit): Promise<Response> {
    try {
      return await this.fetchImpl(this.baseUrl + path, init);
    } catch (cause) {
      throw new TransportError(cause);
    }
  }

  private async requestJSON<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.rawFetch(path, init);
    if (!resp.ok) {
      throw new ApiError(resp.status, await errorMessage(resp));
    }
    const body: unknown = await resp.json();
    if (
      typeof body !== "object" ||
      body === null ||
      (body as { v?: unknown }).v !== PAYLOAD_VERSION
    ) {
      throw new ApiError(
        0,
        `unsupported payload version ${JSON.stringify((body as { v?: unknown })?.v)}`,
      );
    }
    return body as T;
  }
}

async function errorMessage(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { error?: string };
    if (body && typeof body.error === "string") {
      return `${body.error} (HTTP ${resp.status})`;
    }
  } catch {
    // non-JSON error body; fall through
  }
  return `HTTP ${resp.status}`;
}
