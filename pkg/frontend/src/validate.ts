// Client-side mirror of the service's own checks. The UI never sends a
// request this module rejects, so nothing the UI submits can draw a 4xx.

import type { UISessionView } from "./flow.js";

export interface Verdict {
  ok: boolean;
  reason: string | null;
}

const OK: Verdict = { ok: true, reason: null };

function fail(reason: string): Verdict {
  return { ok: false, reason };
}

export function annotatorIdVerdict(annotatorId: string): Verdict {
  if (!annotatorId.trim()) return fail("annotator id must be nonempty");
  return OK;
}

export function messageVerdict(view: UISessionView, text: string): Verdict {
  if (view.phase !== "chatting") return fail("session is no longer chatting");
  if (!text.trim()) return fail("message must contain some text");
  return OK;
}

export function finishVerdict(view: UISessionView): Verdict {
  if (view.phase !== "chatting") return fail("session is no longer chatting");
  if (view.pairsCompleted < view.minTurns) {
    return fail(
      `conversation has ${view.pairsCompleted} exchanges, needs ${view.minTurns} before scoring`,
    );
  }
  return OK;
}

export function annotationVerdict(
  view: UISessionView,
  overall: number | null,
  goodPairs: boolean[],
  badPairs: boolean[],
): Verdict {
  if (view.phase === "done") return fail("session is already closed");
  if (view.pairsCompleted < view.minTurns) {
    return fail(
      `conversation has ${view.pairsCompleted} exchanges, needs ${view.minTurns} before scoring`,
    );
  }
  if (overall === null) return fail("pick an overall score first");
  if (!Number.isInteger(overall) || overall < 1 || overall > 4) {
    return fail("overall score must be 1, 2, 3 or 4");
  }
  if (goodPairs.length !== view.pairsCompleted || badPairs.length !== view.pairsCompleted) {
    return fail("need one good and one bad flag per completed exchange");
  }
  return OK;
}
