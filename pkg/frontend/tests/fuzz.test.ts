// Scripted-interaction fuzz of the validation mirror: whatever the client
// lets through, the service must accept; whatever the client blocks, the
// service must also refuse when probed directly.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ApiError, EvalClient } from "../src/api.js";
import type { SessionView } from "../src/api.js";
import { toUiView } from "../src/flow.js";
import type { UISessionView } from "../src/flow.js";
import { annotationVerdict, finishVerdict, messageVerdict } from "../src/validate.js";
import { type LiveService, startService } from "./service_harness.js";

let service: LiveService;

beforeAll(async () => {
  service = await startService(29);
});

afterAll(() => {
  service?.stop();
});

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function pick<T>(rand: () => number, items: T[]): T {
  return items[Math.floor(rand() * items.length)];
}

const TEXT_POOL = [
  "hi there how are you today ?",
  "what do you like to cook ?",
  "?!",
  "tell me something fun .",
  "",
  "   ",
  "do you play any sport ?",
];

const OVERALL_POOL = [0, 1, 2, 3, 4, 5, 2.5, -1];

interface Action {
  kind: "message" | "finish" | "annotate";
  text?: string;
  overall?: number;
  good?: boolean[];
  bad?: boolean[];
}

function randomFlags(rand: () => number, pairs: number): boolean[] {
  const offsets = [0, 0, 0, 1, -1];
  const length = Math.max(0, pairs + pick(rand, offsets));
  return Array.from({ length }, () => rand() < 0.5);
}

function randomAction(rand: () => number, view: UISessionView): Action {
  const roll = rand();
  if (roll < 0.55) return { kind: "message", text: pick(rand, TEXT_POOL) };
  if (roll < 0.75) return { kind: "finish" };
  return {
    kind: "annotate",
    overall: pick(rand, OVERALL_POOL),
    good: randomFlags(rand, view.pairsCompleted),
    bad: randomFlags(rand, view.pairsCompleted),
  };
}

function clientVerdict(view: UISessionView, action: Action): boolean {
  switch (action.kind) {
    case "message":
      return messageVerdict(view, action.text!).ok;
    case "finish":
      return finishVerdict(view).ok;
    case "annotate":
      return annotationVerdict(view, action.overall!, action.good!, action.bad!).ok;
  }
}

async function rawProbe(baseUrl: string, sessionId: string, action: Action): Promise<number> {
  const paths = { message: "messages", finish: "finish", annotate: "annotation" };
  const bodies = {
    message: { text: action.text },
    finish: undefined,
    annotate: { overall: action.overall, good_pairs: action.good, bad_pairs: action.bad },
  };
  const body = bodies[action.kind];
  const response = await fetch(`${baseUrl}/sessions/${sessionId}/${paths[action.kind]}`, {
    method: "POST",
    headers: body === undefined ? {} : { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  return response.status;
}

describe("validation mirror fuzz", () => {
  it("never submits anything the service rejects, and vice versa", async () => {
    const rand = mulberry32(20260818);
    const client = new EvalClient(service.baseUrl);
    let approvedCalls = 0;
    let blockedProbes = 0;

    for (let sessionIndex = 0; sessionIndex < 3; sessionIndex += 1) {
      let raw: SessionView = await client.createSession(`fuzz-worker-${sessionIndex}`);
      let closed = false;

      for (let step = 0; step < 40 && !closed; step += 1) {
        const view = toUiView(raw);
        const action = randomAction(rand, view);

        if (clientVerdict(view, action)) {
          approvedCalls += 1;
          try {
            if (action.kind === "message") {
              raw = await client.postMessage(raw.session_id, action.text!);
            } else if (action.kind === "finish") {
              raw = await client.finish(raw.session_id);
            } else {
              await client.submitAnnotation(raw.session_id, {
                overall: action.overall!,
                good_pairs: action.good!,
                bad_pairs: action.bad!,
              });
              raw = await client.getSession(raw.session_id);
              closed = true;
            }
          } catch (err) {
            const detail = err instanceof ApiError ? `${err.status} ${err.detail}` : String(err);
            expect.fail(
              `client approved ${action.kind} but service rejected it: ${detail} ` +
                `(state=${raw.state} pairs=${raw.pairs_completed}/${raw.min_turns})`,
            );
          }
        } else {
          blockedProbes += 1;
          const status = await rawProbe(service.baseUrl, raw.session_id, action);
          expect(
            status,
            `client blocked ${action.kind} but service accepted it ` +
              `(state=${raw.state} pairs=${raw.pairs_completed}/${raw.min_turns})`,
          ).toBeGreaterThanOrEqual(400);
          expect(status).toBeLessThan(500);
          // a refused request must not have moved the session
          const after = await client.getSession(raw.session_id);
          expect(after.state).toBe(raw.state);
          expect(after.pairs_completed).toBe(raw.pairs_completed);
          raw = after;
        }
      }
    }

    // the walk has to exercise both sides of the mirror to mean anything
    expect(approvedCalls).toBeGreaterThan(15);
    expect(blockedProbes).toBeGreaterThan(15);
  }, 180_000);
});
