import { describe, expect, it } from "vitest";
import type { UISessionView } from "../src/flow.js";
import {
  annotationVerdict,
  annotatorIdVerdict,
  finishVerdict,
  messageVerdict,
} from "../src/validate.js";

function ui(overrides: Partial<UISessionView> = {}): UISessionView {
  return {
    sessionId: "session-0001",
    phase: "chatting",
    minTurns: 5,
    pairsCompleted: 5,
    remainingTurns: 0,
    persona: [],
    pairs: [],
    ...overrides,
  };
}

describe("annotatorIdVerdict", () => {
  it("rejects empty and whitespace-only ids", () => {
    expect(annotatorIdVerdict("").ok).toBe(false);
    expect(annotatorIdVerdict("   ").ok).toBe(false);
    expect(annotatorIdVerdict("worker-1").ok).toBe(true);
  });
});

describe("messageVerdict", () => {
  it("requires a chatting session and some visible text", () => {
    expect(messageVerdict(ui(), "hello").ok).toBe(true);
    expect(messageVerdict(ui(), "   ").ok).toBe(false);
    expect(messageVerdict(ui({ phase: "scoring" }), "hello").ok).toBe(false);
    expect(messageVerdict(ui({ phase: "done" }), "hello").ok).toBe(false);
  });

  it("accepts punctuation-only messages, matching the tokenizer", () => {
    expect(messageVerdict(ui(), "?!").ok).toBe(true);
  });
});

describe("finishVerdict", () => {
  it("blocks below min_turns and in non-chatting phases", () => {
    expect(finishVerdict(ui({ pairsCompleted: 4, remainingTurns: 1 })).ok).toBe(false);
    expect(finishVerdict(ui()).ok).toBe(true);
    expect(finishVerdict(ui({ phase: "scoring" })).ok).toBe(false);
  });
});

describe("annotationVerdict", () => {
  const flags5 = [false, false, true, false, false];

  it("accepts a well-formed submission from either open phase", () => {
    expect(annotationVerdict(ui({ phase: "scoring" }), 3, flags5, flags5).ok).toBe(true);
    expect(annotationVerdict(ui({ phase: "chatting" }), 3, flags5, flags5).ok).toBe(true);
  });

  it("rejects closed sessions and early submissions", () => {
    expect(annotationVerdict(ui({ phase: "done" }), 3, flags5, flags5).ok).toBe(false);
    const early = ui({ pairsCompleted: 3, remainingTurns: 2 });
    expect(annotationVerdict(early, 3, [false, false, false], [false, false, false]).ok).toBe(
      false,
    );
  });

  it("rejects out-of-scale and non-integer overall scores", () => {
    for (const bad of [0, 5, 2.5, -1, NaN, null]) {
      expect(annotationVerdict(ui(), bad as number | null, flags5, flags5).ok).toBe(false);
    }
    for (const good of [1, 2, 3, 4]) {
      expect(annotationVerdict(ui(), good, flags5, flags5).ok).toBe(true);
    }
  });

  it("requires one flag per completed pair in both lists", () => {
    expect(annotationVerdict(ui(), 2, flags5.slice(1), flags5).ok).toBe(false);
    expect(annotationVerdict(ui(), 2, flags5, [...flags5, true]).ok).toBe(false);
  });

  it("allows a pair to be flagged both good and bad", () => {
    const both = [true, false, false, false, false];
    expect(annotationVerdict(ui(), 4, both, both).ok).toBe(true);
  });
});
