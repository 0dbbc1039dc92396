"""Greedy, beam, and iterative beam search over a distribution provider.

All searches are pure functions of (model, context, config) and deterministic:
candidate ties are broken by (score, parent index, token id). Scores are raw
cumulative log-probabilities; the length penalty enters only when candidates
are ranked for final selection.

Iterative beam search reruns beam search while banning any candidate that
comes within Hamming distance epsilon of an equal-length hypothesis explored
by an earlier run. Unequal-length comparisons count as infinitely dissimilar
in both directions, which makes the sequential and lock-step parallel
schedules produce identical output.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, SelectionError
from .lm import Context, DistributionProvider
from .vocab import Vocabulary

_EOS = Vocabulary.eos_id


@dataclass(frozen=True)
class Hypothesis:
    """A (possibly partial) response with its cumulative log-probability."""

    tokens: tuple[int, ...] = ()
    score: float = 0.0
    finished: bool = False

    def __post_init__(self):
        if self.score > 1e-9:
            raise InputError("hypothesis score must be <= 0")
        ends_eos = bool(self.tokens) and self.tokens[-1] == _EOS
        if self.finished != ends_eos:
            raise InputError("finished must hold exactly when the last token is <eos>")
        if _EOS in self.tokens[:-1]:
            raise InputError("<eos> may only appear as the final token")

    def extended(self, token: int, logprob: float) -> "Hypothesis":
        if self.finished:
            raise InputError("cannot extend a finished hypothesis")
        return Hypothesis(self.tokens + (token,), self.score + logprob, token == _EOS)

    def to_json_dict(self) -> dict:
        return {"tokens": list(self.tokens), "score": self.score, "finished": self.finished}


_INT_FIELDS = ("beam_width", "max_candidates", "max_length", "block_ngram", "iterations")
_FLOAT_FIELDS = ("length_penalty_alpha", "epsilon")


@dataclass(frozen=True)
class SearchConfig:
    """Knobs shared by every search strategy.

    block_ngram = 0 disables blocking. epsilon is the Hamming dissimilarity
    threshold for iterative beam search; the default 1.0 prunes only exact
    equal-length duplicates.
    """

    beam_width: int = 5
    max_candidates: int = 15
    max_length: int = 40
    block_ngram: int = 3
    length_penalty_alpha: float = 0.6
    iterations: int = 15
    epsilon: float = 1.0

    def __post_init__(self):
        for name in _INT_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise InputError(f"{name} must be an integer")
        for name in _FLOAT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InputError(f"{name} must be a real number")
            if not math.isfinite(value):
                raise InputError(f"{name} must be finite")
        if self.beam_width < 1:
            raise InputError("beam_width must be >= 1")
        if self.max_candidates < 1:
            raise InputError("max_candidates must be >= 1")
        if self.max_length < 1:
            raise InputError("max_length must be >= 1")
        if self.block_ngram < 0:
            raise InputError("block_ngram must be >= 0")
        if self.length_penalty_alpha < 0:
            raise InputError("length_penalty_alpha must be >= 0")
        if self.iterations < 1:
            raise InputError("iterations must be >= 1")
        if self.epsilon <= 0:
            raise InputError("epsilon must be > 0")

    def to_file(self, path: str | Path) -> None:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path: str | Path) -> "SearchConfig":
        known = {f.name for f in fields(cls)}
        values: dict[str, int | float] = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise InputError(f"line {lineno}: expected 'key = value', got {raw!r}")
            if key not in known:
                raise InputError(f"line {lineno}: unknown config key {key!r}")
            text = value.strip()
            try:
                values[key] = int(text) if key in _INT_FIELDS else float(text)
            except ValueError:
                raise InputError(f"line {lineno}: bad value for {key}: {text!r}") from None
        return cls(**values)


@dataclass(frozen=True)
class ScoredCandidate:
    """A finished hypothesis with its selection score and origin iteration."""

    hypothesis: Hypothesis
    selection_score: float
    iteration: int = 0

    def to_json_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis.to_json_dict(),
            "selection_score": self.selection_score,
            "iteration": self.iteration,
        }


@dataclass(frozen=True)
class CandidateSet:
    """Finished candidates a selector may choose between."""

    candidates: tuple[ScoredCandidate, ...]

    def __post_init__(self):
        for cand in self.candidates:
            if not cand.hypothesis.finished:
                raise InputError("candidate sets may only contain finished hypotheses")

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def hypotheses(self) -> list[Hypothesis]:
        return [c.hypothesis for c in self.candidates]

    def to_json_dict(self) -> dict:
        return {"candidates": [c.to_json_dict() for c in self.candidates]}


@dataclass
class SearchTrace:
    """Every partial hypothesis set, per timestep, per iteration.

    iterations[l][t-1] is the hypothesis set selected at step t of iteration
    l (all members have length t; some may be finished). Force-terminated
    hypotheses never appear here: they are returned, not explored.
    """

    iterations: list[list[list[Hypothesis]]] = field(default_factory=list)
    dead_iterations: list[int] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "iterations": [
                {
                    "iteration": l,
                    "steps": [[h.to_json_dict() for h in step] for step in steps],
                }
                for l, steps in enumerate(self.iterations)
            ],
            "dead_iterations": list(self.dead_iterations),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def length_penalized_score(logprob: float, length: int, alpha: float) -> float:
    """Wu-style length normalization: logprob / ((5 + length) / 6) ** alpha."""
    if length < 1:
        raise InputError("length must be >= 1")
    if alpha == 0:
        return logprob
    return logprob / (((5 + length) / 6) ** alpha)


def blocks_ngram(hyp: Hypothesis, n: int) -> bool:
    """True when some n-gram occurs at least twice in hyp.tokens."""
    if n < 1:
        raise InputError("n must be >= 1")
    tokens = hyp.tokens
    if len(tokens) < n + 1:
        return False
    counts = Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    return any(c >= 2 for c in counts.values())


def hamming_dissimilarity(a: Sequence[int], b: Sequence[int]) -> float:
    """Position-wise mismatch count; unequal lengths are infinitely far apart."""
    if len(a) != len(b):
        return math.inf
    return float(sum(1 for x, y in zip(a, b) if x != y))


class _ExploredSpace:
    """Equal-length lookup over all partial hypotheses of earlier iterations.

    Because unequal lengths never match, sequences are bucketed by length.
    With epsilon <= 1 only exact duplicates are within threshold, so a hash
    set answers membership; larger thresholds fall back to a scan.
    """

    _EMPTY: frozenset[int] = frozenset()

    def __init__(self, epsilon: float):
        self.epsilon = epsilon
        self.exact_only = epsilon <= 1.0
        self._followers: dict[tuple[int, ...], set[int]] = {}
        self._buckets: dict[int, list[tuple[int, ...]]] = {}

    def add(self, tokens: tuple[int, ...]) -> None:
        if self.exact_only:
            self._followers.setdefault(tokens[:-1], set()).add(tokens[-1])
        else:
            self._buckets.setdefault(len(tokens), []).append(tokens)

    def too_close(self, tokens: tuple[int, ...]) -> bool:
        if self.exact_only:
            return tokens[-1] in self._followers.get(tokens[:-1], self._EMPTY)
        bucket = self._buckets.get(len(tokens))
        if bucket is None:
            return False
        return any(hamming_dissimilarity(tokens, seen) < self.epsilon for seen in bucket)

    def banned_followers(self, prefix: tuple[int, ...]) -> frozenset[int] | set[int]:
        """Tokens v such that prefix + (v,) would be too close; exact mode only."""
        return self._followers.get(prefix, self._EMPTY)


Scorer = Callable[[tuple[int, ...]], np.ndarray]


def _blocked_followers(tokens: tuple[int, ...], n: int) -> set[int]:
    """Tokens v for which appending v creates a repeated n-gram.

    Assumes `tokens` itself is free of repeated n-grams, which holds for
    every surviving hypothesis because blocking is applied at each step.
    """
    if n < 1 or len(tokens) < n - 1:
        return set()
    tail = tokens[len(tokens) - (n - 1):] if n > 1 else ()
    banned: set[int] = set()
    for i in range(len(tokens) - n + 1):
        if tokens[i:i + n - 1] == tail:
            banned.add(tokens[i + n - 1])
    return banned


def _step(
    beam: list[Hypothesis],
    scorer: Scorer,
    K: int,
    *,
    block_ngram: int = 0,
    explored: _ExploredSpace | None = None,
) -> list[Hypothesis]:
    """One beam step: extend every hypothesis, filter, keep the global top-K.

    Candidates are removed (rather than ranked last) when their probability
    is zero, when they repeat an n-gram, or when they fall within epsilon of
    an equal-length hypothesis from an earlier iteration. Ties break by
    score, then parent index, then token id; the flat (parent, token) index
    encodes that order for the stable sort.
    """
    vocab_size = None
    raw_rows = []
    score_rows = []
    for parent in beam:
        logprobs = scorer(parent.tokens)
        vocab_size = logprobs.shape[0]
        scores = parent.score + logprobs
        banned = _blocked_followers(parent.tokens, block_ngram) if block_ngram else set()
        if explored is not None:
            if explored.exact_only:
                banned = banned | explored.banned_followers(parent.tokens)
            else:
                for v in np.nonzero(np.isfinite(scores))[0]:
                    if explored.too_close(parent.tokens + (int(v),)):
                        banned.add(int(v))
        for v in banned:
            scores[v] = -np.inf
        raw_rows.append(logprobs)
        score_rows.append(scores)
    flat = np.concatenate(score_rows)
    order = np.argsort(-flat, kind="stable")
    selected: list[Hypothesis] = []
    for idx in order[: K]:
        if not np.isfinite(flat[idx]):
            break
        parent_idx, token = divmod(int(idx), vocab_size)
        selected.append(beam[parent_idx].extended(token, float(raw_rows[parent_idx][token])))
    return selected


def beam_step(
    hyps: Sequence[Hypothesis],
    model: DistributionProvider,
    ctx: Context,
    K: int,
) -> tuple[list[Hypothesis], list[Hypothesis]]:
    """Extend a beam one step; split the top-K into (continuing, finished)."""
    if not hyps:
        raise InputError("beam is empty")
    if any(h.finished for h in hyps):
        raise InputError("cannot extend finished hypotheses")
    if K < 1:
        raise InputError("K must be >= 1")
    selected = _step(list(hyps), lambda prefix: model.next_logprobs(ctx, prefix), K)
    return [h for h in selected if not h.finished], [h for h in selected if h.finished]


def _force_terminate(beam: list[Hypothesis], scorer: Scorer) -> Hypothesis:
    """Append <eos> (scored normally) to the best surviving partial."""
    best = min(beam, key=lambda h: (-h.score, h.tokens))
    return best.extended(_EOS, float(scorer(best.tokens)[_EOS]))


class _BeamRun:
    """State of one beam search run advanced step by step."""

    def __init__(self, config: SearchConfig):
        self.config = config
        self.beam: list[Hypothesis] = [Hypothesis()]
        self.finished: list[Hypothesis] = []
        self.steps: list[list[Hypothesis]] = []

    @property
    def active(self) -> bool:
        return bool(self.beam) and len(self.finished) < self.config.max_candidates

    def advance(self, scorer: Scorer, explored: _ExploredSpace | None) -> list[Hypothesis]:
        selected = _step(
            self.beam,
            scorer,
            self.config.beam_width,
            block_ngram=self.config.block_ngram,
            explored=explored,
        )
        self.steps.append(selected)
        self.finished.extend(h for h in selected if h.finished)
        self.beam = [h for h in selected if not h.finished]
        return selected

    def finalize(self, scorer: Scorer) -> None:
        """After the last step: keep a candidate even if nothing ended naturally."""
        if not self.finished and self.beam:
            self.finished.append(_force_terminate(self.beam, scorer))


def _selection_key(config: SearchConfig):
    alpha = config.length_penalty_alpha

    def key(h: Hypothesis):
        return (-length_penalized_score(h.score, len(h.tokens), alpha), len(h.tokens), h.tokens)

    return key


def _scored(h: Hypothesis, config: SearchConfig, iteration: int) -> ScoredCandidate:
    return ScoredCandidate(
        hypothesis=h,
        selection_score=length_penalized_score(
            h.score, len(h.tokens), config.length_penalty_alpha
        ),
        iteration=iteration,
    )


def greedy_decode(model: DistributionProvider, ctx: Context, config: SearchConfig) -> Hypothesis:
    """Follow the stepwise argmax until <eos> or the length limit."""
    hyp = Hypothesis()
    for _ in range(config.max_length):
        logprobs = model.next_logprobs(ctx, hyp.tokens)
        token = int(np.argmax(logprobs))
        hyp = hyp.extended(token, float(logprobs[token]))
        if hyp.finished:
            return hyp
    logprobs = model.next_logprobs(ctx, hyp.tokens)
    return hyp.extended(_EOS, float(logprobs[_EOS]))


def beam_search(
    model: DistributionProvider,
    ctx: Context,
    config: SearchConfig,
) -> tuple[CandidateSet, SearchTrace]:
    """Beam search collecting every finished hypothesis until the pool fills.

    Stops once max_candidates hypotheses have finished, the length limit is
    reached, or the beam empties. The candidate set keeps at most
    max_candidates entries, best selection score first. If nothing finished
    by the length limit, the best partial is force-terminated with <eos>.
    """
    scorer: Scorer = lambda prefix: model.next_logprobs(ctx, prefix)
    run = _BeamRun(config)
    for _ in range(config.max_length):
        if not run.active:
            break
        run.advance(scorer, explored=None)
    run.finalize(scorer)
    key = _selection_key(config)
    ranked = sorted(run.finished, key=key)[: config.max_candidates]
    cands = CandidateSet(tuple(_scored(h, config, 0) for h in ranked))
    return cands, SearchTrace(iterations=[run.steps])


def iterative_beam_search(
    model: DistributionProvider,
    ctx: Context,
    config: SearchConfig,
    mode: str = "sequential",
) -> tuple[CandidateSet, SearchTrace]:
    """Repeated beam search, each run banned from earlier runs' search space.

    Run 0 is plain beam search. A later run discards any candidate within
    Hamming distance epsilon of an equal-length hypothesis recorded by an
    earlier run. Each run contributes its best finished hypothesis (by
    selection score), in run order, so the candidate set holds up to
    `iterations` pairwise-distinct responses. A run whose beam is pruned to
    death before anything finishes contributes nothing and is listed in the
    trace's dead_iterations.

    mode selects the schedule: "sequential" completes each run before the
    next begins; "parallel" advances all runs one step per tick, applying
    the ban in run order within the tick. Equal-length-only comparisons make
    the two schedules produce identical output.
    """
    if mode not in ("sequential", "parallel"):
        raise InputError(f"mode must be 'sequential' or 'parallel', got {mode!r}")
    cache: dict[tuple[int, ...], np.ndarray] = {}

    def scorer(prefix: tuple[int, ...]) -> np.ndarray:
        found = cache.get(prefix)
        if found is None:
            found = cache[prefix] = model.next_logprobs(ctx, prefix)
        return found

    explored = _ExploredSpace(config.epsilon)
    runs = [_BeamRun(config) for _ in range(config.iterations)]

    def advance(run: _BeamRun, iteration: int) -> None:
        selected = run.advance(scorer, explored=None if iteration == 0 else explored)
        for h in selected:
            explored.add(h.tokens)

    if mode == "sequential":
        for l, run in enumerate(runs):
            for _ in range(config.max_length):
                if not run.active:
                    break
                advance(run, l)
    else:
        for _ in range(config.max_length):
            for l, run in enumerate(runs):
                if run.active:
                    advance(run, l)

    trace = SearchTrace()
    picked: list[ScoredCandidate] = []
    key = _selection_key(config)
    for l, run in enumerate(runs):
        run.finalize(scorer)
        trace.iterations.append(run.steps)
        if run.finished:
            picked.append(_scored(min(run.finished, key=key), config, l))
        else:
            trace.dead_iterations.append(l)
    return CandidateSet(tuple(picked)), trace


def select_final(cands: CandidateSet) -> Hypothesis:
    """Best candidate by selection score; ties prefer shorter, then lower tokens."""
    if not len(cands):
        raise SelectionError("no candidates to select from")
    best = min(
        cands,
        key=lambda c: (-c.selection_score, len(c.hypothesis.tokens), c.hypothesis.tokens),
    )
    return best.hypothesis


def audit_trace(trace: SearchTrace, epsilon: float) -> list[dict]:
    """Cross-iteration dissimilarity audit over a search trace.

    Returns one record per violation: a partial hypothesis in some iteration
    lying within Hamming distance epsilon of an equal-length partial from an
    earlier iteration. An empty list means the exploration respected the ban.
    """
    violations: list[dict] = []
    seen_by_len: dict[int, list[tuple[int, tuple[int, ...]]]] = {}
    for l, steps in enumerate(trace.iterations):
        for step in steps:
            for hyp in step:
                for earlier_l, earlier in seen_by_len.get(len(hyp.tokens), ()):
                    distance = hamming_dissimilarity(hyp.tokens, earlier)
                    if distance < epsilon:
                        violations.append(
                            {
                                "iteration": l,
                                "tokens": list(hyp.tokens),
                                "earlier_iteration": earlier_l,
                                "earlier_tokens": list(earlier),
                                "distance": distance,
                            }
                        )
        for step in steps:
            for hyp in step:
                seen_by_len.setdefault(len(hyp.tokens), []).append((l, hyp.tokens))
    return violations
