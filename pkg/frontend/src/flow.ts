// Pure view logic: maps service session views onto what the page shows.

import type { SessionView, TurnView } from "./api.js";

export type Phase = "chatting" | "scoring" | "done";

export interface TurnPair {
  human: string;
  reply: string;
}

export interface UISessionView {
  sessionId: string;
  phase: Phase;
  minTurns: number;
  pairsCompleted: number;
  // pairs still needed before scoring unlocks
  remainingTurns: number;
  persona: string[];
  pairs: TurnPair[];
}

const PHASE_BY_STATE: Record<SessionView["state"], Phase> = {
  chatting: "chatting",
  awaiting_scores: "scoring",
  closed: "done",
};

export function groupPairs(turns: TurnView[]): TurnPair[] {
  const pairs: TurnPair[] = [];
  for (let i = 0; i + 1 < turns.length; i += 2) {
    pairs.push({ human: turns[i].text, reply: turns[i + 1].text });
  }
  return pairs;
}

export function toUiView(view: SessionView): UISessionView {
  return {
    sessionId: view.session_id,
    phase: PHASE_BY_STATE[view.state],
    minTurns: view.min_turns,
    pairsCompleted: view.pairs_completed,
    remainingTurns: Math.max(0, view.min_turns - view.pairs_completed),
    persona: [...view.your_persona],
    pairs: groupPairs(view.turns),
  };
}

// one checkbox per completed pair, all initially unchecked
export function emptyPairFlags(view: UISessionView): boolean[] {
  return new Array(view.pairsCompleted).fill(false);
}

export function scoringUnlocked(view: UISessionView): boolean {
  return view.phase !== "done" && view.remainingTurns === 0;
}

export function remainingLabel(view: UISessionView): string {
  if (view.phase === "done") return "session closed";
  if (view.remainingTurns === 0) return "you may finish and score now";
  const n = view.remainingTurns;
  return n === 1 ? "1 more exchange before scoring" : `${n} more exchanges before scoring`;
}
