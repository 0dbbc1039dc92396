import { describe, expect, it } from "vitest";
import type { SessionView } from "../src/api.js";
import {
  emptyPairFlags,
  groupPairs,
  remainingLabel,
  scoringUnlocked,
  toUiView,
} from "../src/flow.js";
import { resolveBaseUrl, DEFAULT_BASE_URL } from "../src/config.js";

function view(overrides: Partial<SessionView> = {}): SessionView {
  return {
    session_id: "session-0001",
    state: "chatting",
    min_turns: 5,
    pairs_completed: 0,
    your_persona: ["i like boats ."],
    turns: [],
    ...overrides,
  };
}

describe("toUiView", () => {
  it("maps the three service states onto phases", () => {
    expect(toUiView(view({ state: "chatting" })).phase).toBe("chatting");
    expect(toUiView(view({ state: "awaiting_scores" })).phase).toBe("scoring");
    expect(toUiView(view({ state: "closed" })).phase).toBe("done");
  });

  it("counts down remaining exchanges and clamps at zero", () => {
    expect(toUiView(view({ min_turns: 5, pairs_completed: 2 })).remainingTurns).toBe(3);
    expect(toUiView(view({ min_turns: 5, pairs_completed: 5 })).remainingTurns).toBe(0);
    expect(toUiView(view({ min_turns: 5, pairs_completed: 7 })).remainingTurns).toBe(0);
  });

  it("groups the flat turn list into human/reply pairs", () => {
    const turns = [
      { speaker: "a", text: "hi" },
      { speaker: "b", text: "hello" },
      { speaker: "a", text: "how are you ?" },
      { speaker: "b", text: "fine" },
    ];
    expect(groupPairs(turns)).toEqual([
      { human: "hi", reply: "hello" },
      { human: "how are you ?", reply: "fine" },
    ]);
  });

  it("drops a trailing unpaired turn instead of inventing a pair", () => {
    const turns = [
      { speaker: "a", text: "hi" },
      { speaker: "b", text: "hello" },
      { speaker: "a", text: "dangling" },
    ];
    expect(groupPairs(turns)).toHaveLength(1);
  });
});

describe("scoring gate", () => {
  it("stays locked until the service-reported pair count reaches min_turns", () => {
    for (let pairs = 0; pairs < 5; pairs += 1) {
      expect(scoringUnlocked(toUiView(view({ pairs_completed: pairs })))).toBe(false);
    }
    expect(scoringUnlocked(toUiView(view({ pairs_completed: 5 })))).toBe(true);
  });

  it("never unlocks a closed session", () => {
    expect(scoringUnlocked(toUiView(view({ state: "closed", pairs_completed: 6 })))).toBe(false);
  });

  it("builds exactly one flag slot per completed pair", () => {
    const ui = toUiView(view({ pairs_completed: 6 }));
    expect(emptyPairFlags(ui)).toEqual([false, false, false, false, false, false]);
  });

  it("phrases the remaining-turns indicator", () => {
    expect(remainingLabel(toUiView(view({ pairs_completed: 4 })))).toContain("1 more");
    expect(remainingLabel(toUiView(view({ pairs_completed: 0 })))).toContain("5 more");
    expect(remainingLabel(toUiView(view({ pairs_completed: 5 })))).toContain("finish");
    expect(remainingLabel(toUiView(view({ state: "closed" })))).toContain("closed");
  });
});

describe("resolveBaseUrl", () => {
  it("prefers the query parameter and strips trailing slashes", () => {
    expect(resolveBaseUrl("?service=http://10.0.0.2:9000/", "stored", "meta")).toBe(
      "http://10.0.0.2:9000",
    );
  });

  it("falls back through storage and the meta tag to the default", () => {
    expect(resolveBaseUrl("", "http://stored:1234", "http://meta:1")).toBe("http://stored:1234");
    expect(resolveBaseUrl("", null, "http://meta:1")).toBe("http://meta:1");
    expect(resolveBaseUrl("", null, "")).toBe(DEFAULT_BASE_URL);
    expect(resolveBaseUrl("", "   ", null)).toBe(DEFAULT_BASE_URL);
  });
});
