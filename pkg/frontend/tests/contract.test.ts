/**
 * Contract tests against recorded API responses. The fixture file is
 * captured from a live server (tools/record_fixtures.py) so these tests
 * pin the exact wire format the UI consumes.
 */

import { afterEach, describe, expect, it, vi } from "vitest";

import {
  ApiClient,
  ApiError,
  ClassifyResponse,
  FeedbackResponse,
  makeClient,
} from "../src/api.js";
import { submitStep } from "../src/controller.js";
import { render } from "../src/render.js";
import { SessionState, newSession } from "../src/session.js";
import fixture from "./fixtures/figure1.json";

interface RecordedStep {
  before: string;
  after: string;
  classify: ClassifyResponse;
  feedback: FeedbackResponse | null;
}

const steps = fixture.steps as RecordedStep[];
const parseError = fixture.parse_error;

/** Client that replays the recorded responses keyed by the step pair. */
function replayClient(): ApiClient {
  return {
    classify: async (before, after) => {
      if (after === parseError.input) {
        throw new ApiError(parseError.status, parseError.body);
      }
      const hit = steps.find((s) => s.before === before && s.after === after);
      if (!hit) {
        throw new Error(`no recorded classify for ${before} -> ${after}`);
      }
      return hit.classify;
    },
    feedback: async (before, after) => {
      const hit = steps.find((s) => s.before === before && s.after === after);
      if (!hit || !hit.feedback) {
        throw new Error(`no recorded feedback for ${before} -> ${after}`);
      }
      return hit.feedback;
    },
    health: async () => fixture.health,
  };
}

async function driveTranscript(api: ApiClient): Promise<SessionState> {
  let state = await submitStep(newSession(), steps[0].before, api);
  for (const step of steps) {
    state = await submitStep(state, step.after, api);
  }
  return state;
}

describe("recorded fixture sanity", () => {
  it("covers the full worked transcript with a corrupted final step", () => {
    expect(steps.length).toBe(4);
    expect(steps[0].classify.operations[0].label).toBe("ADD_SIDE");
    expect(steps[2].classify.operations[0].label).toBe("COMBINE_ADD");
    const final = steps[steps.length - 1];
    expect(final.classify.valid).toBe(false);
    expect(final.feedback?.feedback.length).toBeGreaterThan(0);
    expect(fixture.health.status).toBe("ok");
  });

  it("orders operation probabilities descending", () => {
    for (const step of steps) {
      const probs = step.classify.operations.map((o) => o.prob);
      const sorted = [...probs].sort((a, b) => b - a);
      expect(probs).toEqual(sorted);
    }
  });
});

describe("driving the UI through the transcript", () => {
  it("annotates every step and flags the corrupted one", async () => {
    const state = await driveTranscript(replayClient());
    expect(state.expressions.length).toBe(5);
    expect(state.annotations.length).toBe(4);
    expect(state.annotations[0].operations[0].label).toBe("ADD_SIDE");
    expect(state.annotations[2].operations[0].label).toBe("COMBINE_ADD");
    const final = state.annotations[3];
    expect(final.valid).toBe(false);
    expect(final.feedback).not.toBeNull();
  });

  it("renders one operation badge per step and a feedback badge", async () => {
    const state = await driveTranscript(replayClient());
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    render(state, root, {
      onSubmit: () => undefined,
      onReset: () => undefined,
      onRetry: () => undefined,
    });
    const rows = root.querySelectorAll("ol.derivation li:not(.seed)");
    expect(rows.length).toBe(4);
    rows.forEach((row) => {
      expect(row.querySelectorAll(".badge.op:not(.secondary)").length).toBe(1);
    });
    const invalid = root.querySelectorAll("li.step.invalid");
    expect(invalid.length).toBe(1);
    expect(invalid[0].querySelector(".badge.feedback")).not.toBeNull();
  });

  it("leaves history unchanged on unparseable input", async () => {
    const api = replayClient();
    const before = await driveTranscript(api);
    const after = await submitStep(before, parseError.input, api);
    expect(after.expressions).toEqual(before.expressions);
    expect(after.annotations.length).toBe(before.annotations.length);
    expect(after.inputError).toContain(parseError.body.error);
  });
});

describe("fetch client against recorded wire format", () => {
  afterEach(() => {
    vi.unstubAllGlobals();
  });

  function stubFetch(status: number, body: unknown): void {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => new Response(JSON.stringify(body), { status })),
    );
  }

  it("parses a recorded classify response", async () => {
    stubFetch(200, steps[0].classify);
    const out = await makeClient("http://h").classify(
      steps[0].before,
      steps[0].after,
    );
    expect(out).toEqual(steps[0].classify);
  });

  it("parses a recorded feedback response", async () => {
    const final = steps[steps.length - 1];
    stubFetch(200, final.feedback);
    const out = await makeClient("http://h").feedback(final.before, final.after);
    expect(out).toEqual(final.feedback);
  });

  it("raises ApiError with the recorded 422 diagnostics", async () => {
    stubFetch(parseError.status, parseError.body);
    const err = await makeClient("http://h")
      .classify("x=1", parseError.input)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(422);
    expect((err as ApiError).body.field).toBe(parseError.body.field);
    expect((err as ApiError).body.offset).toBe(parseError.body.offset);
  });
});
