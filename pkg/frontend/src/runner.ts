// Trial state machine, independent of the DOM. One runner drives one
// session: create it with demographics, then per trial play() once,
// choose() one of the served options, answer the rating items, and
// submit(). The invariants the view must never be able to break live
// here:
//
//   - nothing is submittable before the audio has been played and a
//     choice picked and every required rating answered;
//   - a choice outside the server-provided option pair is rejected
//     before it can reach the wire;
//   - playback stops at the experiment's limit, client-side;
//   - re-entrant submits (double click) are ignored while a post is in
//     flight, and transient network failures are retried — safe
//     because the server answers a replay of the last accepted trial
//     with a duplicate ack instead of a second log line.

import {
  ApiError,
  TransportError,
  type NextReply,
  type QuestionnaireItem,
  type SessionInfo,
  type SubmitAck,
  type SubmitBody,
  type TrialInfo,
} from "./api";

export interface SessionTransport {
  createSession(
    experimentId: string,
    demographics: Record<string, string>,
    participantId?: string,
  ): Promise<SessionInfo>;
  nextTrial(sessionId: string): Promise<NextReply>;
  submitResponse(sessionId: string, body: SubmitBody): Promise<SubmitAck>;
  fetchAudio(audioUrl: string): Promise<ArrayBuffer>;
}

/** A client-side rule was violated; show the message inline. */
export class RunnerError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "RunnerError";
  }
}

export type Phase = "idle" | "trial" | "done";

export interface RunnerOptions {
  retryAttempts?: number;
  retryDelayMs?: number;
  now?: () => number;
}

interface TrialState {
  trial: TrialInfo;
  playbacksUsed: number;
  choice: string | null;
  mos: Record<string, number>;
  shownAt: number;
}

export interface RunnerView {
  phase: Phase;
  trial: TrialInfo | null;
  progress: { index: number; nTrials: number } | null;
  canPlay: boolean;
  playbackUsed: boolean;
  choice: string | null;
  mos: Record<string, number>;
  missingMos: string[];
  canSubmit: boolean;
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export class TrialRunner {
  private session: SessionInfo | null = null;
  private current: TrialState | null = null;
  private donePhase = false;
  private submitting = false;
  private readonly retryAttempts: number;
  private readonly retryDelayMs: number;
  private readonly now: () => number;

  constructor(
    private readonly transport: SessionTransport,
    private readonly experimentId: string,
    options: RunnerOptions = {},
  ) {
    this.retryAttempts = options.retryAttempts ?? 3;
    this.retryDelayMs = options.retryDelayMs ?? 250;
    this.now = options.now ?? Date.now;
  }

  get phase(): Phase {
    if (this.donePhase) return "done";
    return this.current ? "trial" : "idle";
  }

  get sessionInfo(): SessionInfo {
    if (!this.session) throw new RunnerError("session not started");
    return this.session;
  }

  async start(
    demographics: Record<string, string>,
    participantId?: string,
  ): Promise<void> {
    if (this.session) throw new RunnerError("session already started");
    this.session = await this.transport.createSession(
      this.experimentId,
      demographics,
      participantId,
    );
    await this.advance();
  }

  /**
   * Fetch and return the trial's audio, consuming one playback.
   *
   * A network failure does not consume the playback — the play button
   * stays live for a retry. A 429 means the server has already served
   * this trial's audio (for instance a reply lost in transit after the
   * fetch was counted), so playback is marked used rather than leaving
   * the session stuck behind a gate it can never open.
   */
  async play(): Promise<ArrayBuffer> {
    const state = this.requireTrial();
    const limit = this.sessionInfo.playback_limit;
    if (state.playbacksUsed >= limit) {
      throw new RunnerError(`playback limit (${limit}) reached`);
    }
    let audio: ArrayBuffer;
    try {
      audio = await this.transport.fetchAudio(state.trial.audio_url);
    } catch (err) {
      if (err instanceof ApiError && err.status === 429) {
        state.playbacksUsed = limit;
      }
      throw err;
    }
    state.playbacksUsed += 1;
    return audio;
  }

  choose(option: string): void {
    const state = this.requireTrial();
    if (!state.trial.options.includes(option)) {
      throw new RunnerError(
        `"${option}" is not one of the served options ` +
          `(${state.trial.options.join(", ")})`,
      );
    }
    state.choice = option;
  }

  answerMos(itemId: string, rating: number): void {
    const state = this.requireTrial();
    const item = state.trial.questionnaire.find((q) => q.item_id === itemId);
    if (!item) throw new RunnerError(`unknown rating item "${itemId}"`);
    if (!Number.isInteger(rating) || rating < 1 || rating > item.scale_points) {
      throw new RunnerError(
        `rating for "${itemId}" must be an integer in 1..${item.scale_points}`,
      );
    }
    state.mos[itemId] = rating;
  }

  get view(): RunnerView {
    const state = this.current;
    return {
      phase: this.phase,
      trial: state?.trial ?? null,
      progress: state
        ? { index: state.trial.index, nTrials: state.trial.n_trials }
        : null,
      canPlay:
        state !== null &&
        state.playbacksUsed < (this.session?.playback_limit ?? 0),
      playbackUsed: (state?.playbacksUsed ?? 0) > 0,
      choice: state?.choice ?? null,
      mos: { ...(state?.mos ?? {}) },
      missingMos: this.missingMos(),
      canSubmit: this.canSubmit(),
    };
  }

  missingMos(): string[] {
    const state = this.current;
    if (!state) return [];
    return state.trial.questionnaire
      .filter((q) => q.required && !(q.item_id in state.mos))
      .map((q) => q.item_id);
  }

  canSubmit(): boolean {
    const state = this.current;
    return (
      state !== null &&
      !this.submitting &&
      state.playbacksUsed > 0 &&
      state.choice !== null &&
      this.missingMos().length === 0
    );
  }

  /**
   * Post the response and advance to the next trial (or completion).
   *
   * Re-entry while a post is in flight is a no-op. A 409 (this trial
   * is no longer the pending one) resyncs to the server's view and
   * surfaces a RunnerError so the view can explain the jump.
   */
  async submit(): Promise<void> {
    const state = this.requireTrial();
    if (this.submitting) return;
    if (state.playbacksUsed === 0) {
      throw new RunnerError("listen to the audio before answering");
    }
    if (state.choice === null) {
      throw new RunnerError("pick one of the words first");
    }
    const missing = this.missingMos();
    if (missing.length > 0) {
      throw new RunnerError(
        `answer the remaining rating items: ${missing.join(", ")}`,
      );
    }
    const body: SubmitBody = {
      trial_id: state.trial.trial_id,
      choice: state.choice,
      mos: { ...state.mos },
      elapsed_ms: Math.max(0, Math.round(this.now() - state.shownAt)),
    };
    this.submitting = true;
    try {
      await this.postWithRetry(body);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        await this.advance();
        throw new RunnerError(
          "the server had already moved on; showing the current trial",
        );
      }
      throw err;
    } finally {
      this.submitting = false;
    }
    await this.advance();
  }

  private async postWithRetry(body: SubmitBody): Promise<SubmitAck> {
    let lastError: unknown = null;
    for (let attempt = 0; attempt < this.retryAttempts; attempt++) {
      if (attempt > 0) await sleep(this.retryDelayMs * attempt);
      try {
        return await this.transport.submitResponse(
          this.sessionInfo.session_id,
          body,
        );
      } catch (err) {
        if (!(err instanceof TransportError)) throw err;
        lastError = err;
      }
    }
    throw lastError;
  }

  private async advance(): Promise<void> {
    const reply = await this.transport.nextTrial(this.sessionInfo.session_id);
    if (reply.done) {
      this.current = null;
      this.donePhase = true;
      return;
    }
    this.current = {
      trial: reply.trial,
      playbacksUsed: 0,
      choice: null,
      mos: {},
      shownAt: this.now(),
    };
  }

  private requireTrial(): TrialState {
    if (!this.current) throw new RunnerError("no active trial");
    return this.current;
  }
}

export type { QuestionnaireItem, TrialInfo };
