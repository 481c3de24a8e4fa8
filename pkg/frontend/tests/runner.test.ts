// State-machine invariants over a scripted in-memory transport:
// nothing submits before playback + choice + required ratings, choices
// outside the served pair never reach the wire, playback respects the
// limit, and double/retried submits stay single.

import { describe, expect, it } from "vitest";
import {
  ApiError,
  TransportError,
  type NextReply,
  type QuestionnaireItem,
  type SessionInfo,
  type SubmitAck,
  type SubmitBody,
  type TrialInfo,
} from "../src/api";
import { RunnerError, TrialRunner, type SessionTransport } from "../src/runner";

const MOS_ITEM: QuestionnaireItem = {
  item_id: "mos-nat",
  prompt: "How natural?",
  scale_points: 10,
  required: true,
  locale: {},
};

function trialInfo(i: number, questionnaire = [MOS_ITEM]): TrialInfo {
  return {
    trial_id: `trial-${i}`,
    index: i,
    n_trials: 3,
    options: ["peel", "pill"],
    audio_url: `/audio/trial-${i}?session=s1`,
    questionnaire,
  };
}

class FakeTransport implements SessionTransport {
  audioFetches: string[] = [];
  submits: SubmitBody[] = [];
  failNextAudio: Error | null = null;
  failNextSubmits: Error[] = [];
  cursor = 0;

  constructor(
    private readonly trials: TrialInfo[],
    private readonly playbackLimit = 1,
  ) {}

  async createSession(): Promise<SessionInfo> {
    return {
      session_id: "s1",
      participant_id: "p1",
      experiment_id: "e1",
      n_trials: this.trials.length,
      playback_limit: this.playbackLimit,
      questionnaire: [MOS_ITEM],
    };
  }

  async nextTrial(): Promise<NextReply> {
    const trial = this.trials[this.cursor];
    return trial ? { done: false, trial } : { done: true };
  }

  async submitResponse(_: string, body: SubmitBody): Promise<SubmitAck> {
    const failure = this.failNextSubmits.shift();
    if (failure) throw failure;
    this.submits.push(body);
    this.cursor += 1;
    return {
      accepted: true,
      duplicate: false,
      cursor: this.cursor,
      done: this.cursor >= this.trials.length,
    };
  }

  async fetchAudio(url: string): Promise<ArrayBuffer> {
    if (this.failNextAudio) {
      const err = this.failNextAudio;
      this.failNextAudio = null;
      throw err;
    }
    this.audioFetches.push(url);
    return new ArrayBuffer(4);
  }
}

function makeRunner(transport: SessionTransport) {
  return new TrialRunner(transport, "e1", { retryDelayMs: 0 });
}

async function toTrial(transport: FakeTransport): Promise<TrialRunner> {
  const runner = makeRunner(transport);
  await runner.start({ age: "30" });
  return runner;
}

async function completeTrial(runner: TrialRunner): Promise<void> {
  await runner.play();
  runner.choose("peel");
  runner.answerMos("mos-nat", 7);
  await runner.submit();
}

describe("submission gate", () => {
  it("blocks until playback, choice, and required ratings are in", async () => {
    const transport = new FakeTransport([trialInfo(0)]);
    const runner = await toTrial(transport);

    expect(runner.canSubmit()).toBe(false);
    await expect(runner.submit()).rejects.toThrow(/listen to the audio/);

    await runner.play();
    await expect(runner.submit()).rejects.toThrow(/pick one of the words/);

    runner.choose("pill");
    await expect(runner.submit()).rejects.toThrow(/rating items: mos-nat/);
    expect(transport.submits).toHaveLength(0);

    runner.answerMos("mos-nat", 3);
    expect(runner.canSubmit()).toBe(true);
    await runner.submit();
    expect(transport.submits).toHaveLength(1);
    expect(transport.submits[0]).toMatchObject({
      trial_id: "trial-0",
      choice: "pill",
      mos: { "mos-nat": 3 },
    });
  });

  it("treats optional rating items as optional", async () => {
    const optional = { ...MOS_ITEM, required: false };
    const transport = new FakeTransport([trialInfo(0, [optional])]);
    const runner = await toTrial(transport);
    await runner.play();
    runner.choose("peel");
    expect(runner.canSubmit()).toBe(true);
  });

  it("reports elapsed time from trial display to submit", async () => {
    let clock = 1000;
    const transport = new FakeTransport([trialInfo(0)]);
    const runner = new TrialRunner(transport, "e1", {
      retryDelayMs: 0,
      now: () => clock,
    });
    await runner.start({ age: "30" });
    clock = 1850;
    await completeTrial(runner);
    expect(transport.submits[0]?.elapsed_ms).toBe(850);
  });
});

describe("option pair", () => {
  it("never lets a choice outside the served pair reach the wire", async () => {
    const transport = new FakeTransport([trialInfo(0)]);
    const runner = await toTrial(transport);
    await runner.play();
    expect(() => runner.choose("zebra")).toThrow(RunnerError);
    expect(() => runner.choose("zebra")).toThrow(/not one of the served/);
    runner.answerMos("mos-nat", 5);
    await expect(runner.submit()).rejects.toThrow(/pick one of the words/);
    expect(transport.submits).toHaveLength(0);
  });

  it("validates rating items and bounds", async () => {
    const transport = new FakeTransport([trialInfo(0)]);
    const runner = await toTrial(transport);
    expect(() => runner.answerMos("nope", 5)).toThrow(/unknown rating item/);
    expect(() => runner.answerMos("mos-nat", 0)).toThrow(/1\.\.10/);
    expect(() => runner.answerMos("mos-nat", 11)).toThrow(/1\.\.10/);
    expect(() => runner.answerMos("mos-nat", 2.5)).toThrow(/integer/);
  });
});

describe("playback", () => {
  it("stops at the limit client-side", async () => {
    const transport = new FakeTransport([trialInfo(0)]);
    const runner = await toTrial(transport);
    expect(runner.view.canPlay).toBe(true);
    await runner.play();
    expect(runner.view.canPlay).toBe(false);
    await expect(runner.play()).rejects.toThrow(/playback limit/);
    expect(transport.audioFetches).toHaveLength(1);
  });

  it("keeps the retry open after a failed fetch", async () => {
    const transport = new FakeTransport([trialInfo(0)]);
    const runner = await toTrial(transport);
    transport.failNextAudio = new TransportError(new Error("down"));
    await expect(runner.play()).rejects.toThrow(TransportError);
    expect(runner.view.playbackUsed).toBe(false);
    expect(runner.view.canPlay).toBe(true);
    await runner.play();
    expect(runner.view.playbackUsed).toBe(true);
  });

  it("marks playback used when the server says the cap is spent", async () => {
    // the fetch was counted server-side but the reply never arrived;
    // the session must not wedge behind the playback gate
    const transport = new FakeTransport([trialInfo(0)]);
    const runner = await toTrial(transport);
    transport.failNextAudio = new ApiError(429, "playback limit (1) reached");
    await expect(runner.play()).rejects.toThrow(/playback limit/);
    expect(runner.view.playbackUsed).toBe(true);
    expect(runner.view.canPlay).toBe(false);
  });
});

describe("submit resilience", () => {
  it("ignores a second submit while one is in flight", async () => {
    const transport = new FakeTransport([trialInfo(0), trialInfo(1)]);
    const runner = await toTrial(transport);
    await runner.play();
    runner.choose("peel");
    runner.answerMos("mos-nat", 7);
    const first = runner.submit();
    const second = runner.submit(); // double click
    await Promise.all([first, second]);
    expect(transport.submits).toHaveLength(1);
  });

  it("retries through a transient network failure", async () => {
    const transport = new FakeTransport([trialInfo(0)]);
    const runner = await toTrial(transport);
    transport.failNextSubmits = [new TransportError(new Error("drop"))];
    await completeTrial(runner);
    expect(transport.submits).toHaveLength(1);
    expect(runner.phase).toBe("done");
  });

  it("gives up after exhausting retries", async () => {
    const transport = new FakeTransport([trialInfo(0)]);
    const runner = await toTrial(transport);
    await runner.play();
    runner.choose("peel");
    runner.answerMos("mos-nat", 7);
    transport.failNextSubmits = [
      new TransportError(new Error("drop")),
      new TransportError(new Error("drop")),
      new TransportError(new Error("drop")),
    ];
    await expect(runner.submit()).rejects.toThrow(TransportError);
    expect(transport.submits).toHaveLength(0);
  });

  it("does not retry validation rejections", async () => {
    const transport = new FakeTransport([trialInfo(0)]);
    const runner = await toTrial(transport);
    await runner.play();
    runner.choose("peel");
    runner.answerMos("mos-nat", 7);
    transport.failNextSubmits = [new ApiError(422, "rating out of range")];
    await expect(runner.submit()).rejects.toThrow(/rating out of range/);
    expect(transport.submits).toHaveLength(0);
    expect(runner.phase).toBe("trial");
  });

  it("resyncs to the server's trial after a stale rejection", async () => {
    const transport = new FakeTransport([trialInfo(0), trialInfo(1)]);
    const runner = await toTrial(transport);
    await runner.play();
    runner.choose("peel");
    runner.answerMos("mos-nat", 7);
    // another tab answered trial-0 already
    transport.cursor = 1;
    transport.failNextSubmits = [new ApiError(409, "not the pending trial")];
    await expect(runner.submit()).rejects.toThrow(/moved on/);
    expect(runner.phase).toBe("trial");
    expect(runner.view.trial?.trial_id).toBe("trial-1");
    expect(runner.view.playbackUsed).toBe(false);
  });
});

describe("session flow", () => {
  it("walks every trial and lands on done", async () => {
    const transport = new FakeTransport([
      trialInfo(0),
      trialInfo(1),
      trialInfo(2),
    ]);
    const runner = await toTrial(transport);
    while (runner.phase === "trial") {
      await completeTrial(runner);
    }
    expect(runner.phase).toBe("done");
    expect(transport.submits.map((s) => s.trial_id)).toEqual([
      "trial-0",
      "trial-1",
      "trial-2",
    ]);
    expect(transport.audioFetches).toHaveLength(3);
  });

  it("refuses trial actions before the session starts", () => {
    const runner = makeRunner(new FakeTransport([trialInfo(0)]));
    expect(() => runner.choose("peel")).toThrow(/no active trial/);
    expect(runner.view.phase).toBe("idle");
    expect(runner.canSubmit()).toBe(false);
  });
});
