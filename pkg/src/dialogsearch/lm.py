"""Conditional next-token distributions over a shared vocabulary.

Two concrete models implement the provider interface:

* NGramLM -- add-alpha smoothed n-gram counts with stupid backoff, trainable
  from persona-tagged conversations in milliseconds.
* TableLM -- an explicit (context, prefix) -> distribution table, used as a
  fully controlled model in tests and demos.

Everything works in the log domain; probabilities are only materialized when
checking normalization. Conditioning information (persona lines, dialogue
history, the responding speaker) is flattened into a plain token stream with
control-token separators, so an n-gram model can consume it like any other
context.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError, ModelCoverageError
from .vocab import Vocabulary

LOGPROB_NORM_TOL = 1e-6
BACKOFF_FACTOR = 0.4


@dataclass(frozen=True)
class Context:
    """Conditioning side of a response: persona lines plus dialogue history.

    persona_lines are the *responder's* persona. history holds completed
    turns as (speaker, token ids) with speakers alternating, "a" first.
    The next speaker (the one generating) is implied by the history.
    """

    persona_lines: tuple[tuple[int, ...], ...] = ()
    history: tuple[tuple[str, tuple[int, ...]], ...] = ()

    def __post_init__(self):
        expected = "a"
        for speaker, _ in self.history:
            if speaker not in ("a", "b"):
                raise InputError(f"speaker tag must be 'a' or 'b', got {speaker!r}")
            if speaker != expected:
                raise InputError("history speakers must alternate starting with 'a'")
            expected = "b" if expected == "a" else "a"

    @property
    def next_speaker(self) -> str:
        if not self.history:
            return "a"
        return "b" if self.history[-1][0] == "a" else "a"

    def extended(self, speaker: str, tokens: Sequence[int]) -> "Context":
        return Context(self.persona_lines, self.history + ((speaker, tuple(tokens)),))

    def all_token_ids(self):
        for line in self.persona_lines:
            yield from line
        for _, toks in self.history:
            yield from toks


@dataclass(frozen=True)
class TaggedUtterance:
    """One training example: the context in force when `tokens` were said."""

    context: Context
    tokens: tuple[int, ...]


def encode_context(ctx: Context, history_window: int | None = None) -> tuple[int, ...]:
    """Flatten a Context into the conditioning token stream.

    Each persona line is prefixed with the persona separator, each history
    turn with its speaker tag, and the stream ends with the responder's own
    speaker tag so the first response token is conditioned on who speaks.
    history_window keeps only the most recent turns (None = all).
    """
    stream: list[int] = []
    for line in ctx.persona_lines:
        stream.append(Vocabulary.persona_id)
        stream.extend(line)
    history = ctx.history
    if history_window is not None:
        history = history[len(history) - min(history_window, len(history)):]
    for speaker, tokens in history:
        stream.append(Vocabulary.speaker_a_id if speaker == "a" else Vocabulary.speaker_b_id)
        stream.extend(tokens)
    next_tag = Vocabulary.speaker_a_id if ctx.next_speaker == "a" else Vocabulary.speaker_b_id
    stream.append(next_tag)
    return tuple(stream)


def validate_logprobs(values: np.ndarray, vocab: Vocabulary) -> None:
    """Assert the log-probability vector invariants (normalization, sign)."""
    if values.shape != (len(vocab),):
        raise InputError(f"logprob vector must have length {len(vocab)}")
    if np.any(values > 1e-9):
        raise InputError("log-probabilities must be <= 0")
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        raise InputError("logprob vector has no support")
    total = np.logaddexp.reduce(finite)
    if abs(total) > LOGPROB_NORM_TOL:
        raise InputError(f"logprob vector not normalized (logsumexp={total:g})")


class DistributionProvider(ABC):
    """p(y_t | y_<t, context): the contract greedy/beam search maximize over.

    Implementations are immutable after construction and safe to share
    across threads. `max_prefix_len` bounds how long a prefix a caller may
    score (None = unbounded).
    """

    vocab: Vocabulary
    max_prefix_len: int | None = None

    @abstractmethod
    def _next_logprobs(self, ctx: Context, prefix: tuple[int, ...]) -> np.ndarray:
        ...

    def next_logprobs(self, ctx: Context, prefix: Sequence[int]) -> np.ndarray:
        """Full-vocabulary log-probability vector for the next token."""
        prefix = tuple(prefix)
        self.vocab.validate_ids(prefix)
        self.vocab.validate_ids(ctx.all_token_ids())
        if self.max_prefix_len is not None and len(prefix) >= self.max_prefix_len:
            raise InputError(
                f"prefix length {len(prefix)} exceeds model maximum {self.max_prefix_len}"
            )
        return self._next_logprobs(ctx, prefix)


def next_logprobs(model: DistributionProvider, ctx: Context, prefix: Sequence[int]) -> np.ndarray:
    return model.next_logprobs(ctx, prefix)


def sequence_logprob(model: DistributionProvider, ctx: Context, response: Sequence[int]) -> float:
    """Sum of stepwise log-probabilities of a finished response.

    The response must be nonempty and end with <eos>.
    """
    response = tuple(response)
    if not response:
        raise InputError("response is empty")
    if response[-1] != model.vocab.eos_id:
        raise InputError("response must end with <eos>")
    total = 0.0
    for t, token in enumerate(response):
        logprobs = model.next_logprobs(ctx, response[:t])
        total += float(logprobs[token])
    return total


class TableLM(DistributionProvider):
    """Explicit distribution table keyed by (flattened context, prefix).

    Lookups outside the table raise ModelCoverageError; this model never
    guesses. Intended as a controlled oracle for tests and small demos.
    """

    def __init__(self, vocab: Vocabulary, max_prefix_len: int | None = None):
        self.vocab = vocab
        self.max_prefix_len = max_prefix_len
        self._table: dict[tuple[tuple[int, ...], tuple[int, ...]], np.ndarray] = {}

    def set_entry(self, ctx: Context, prefix: Sequence[int], logprobs: np.ndarray) -> None:
        values = np.asarray(logprobs, dtype=np.float64)
        validate_logprobs(values, self.vocab)
        if np.any(np.isfinite(values[~self.vocab.emittable_mask])):
            raise InputError("control tokens cannot carry probability mass")
        values.setflags(write=False)
        self._table[(encode_context(ctx), tuple(prefix))] = values

    def set_probs(self, ctx: Context, prefix: Sequence[int], probs: Mapping[int, float]) -> None:
        """Convenience: build the entry from a sparse {token id: prob} map."""
        values = np.full(len(self.vocab), -np.inf)
        for token_id, p in probs.items():
            if p < 0:
                raise InputError("probabilities must be nonnegative")
            values[token_id] = math.log(p) if p > 0 else -np.inf
        self.set_entry(ctx, prefix, values)

    def __len__(self) -> int:
        return len(self._table)

    def _next_logprobs(self, ctx: Context, prefix: tuple[int, ...]) -> np.ndarray:
        key = (encode_context(ctx), prefix)
        try:
            return self._table[key]
        except KeyError:
            raise ModelCoverageError(
                f"no table entry for prefix {prefix!r} in this context"
            ) from None


class NGramLM(DistributionProvider):
    """Add-alpha smoothed n-gram model with stupid backoff.

    counts[c][v] is how often token v followed the context tuple c; contexts
    of every length 0..order-1 are stored so scoring can back off. The
    next-token score is count(v|c)/total(c) when v was seen after c,
    otherwise BACKOFF_FACTOR times the score under the one-shorter context;
    the recursion bottoms out at an add-alpha unigram. Scores are
    renormalized over the emittable tokens, so the distribution always sums
    to one, and a context with no counts at all falls through to the shorter
    one (uniform when the model is empty).
    """

    def __init__(
        self,
        vocab: Vocabulary,
        order: int,
        smoothing_alpha: float = 1.0,
        backoff_factor: float = BACKOFF_FACTOR,
        history_window: int | None = 3,
        counts: Mapping[tuple[int, ...], Mapping[int, int]] | None = None,
    ):
        if order < 1:
            raise InputError("order must be >= 1")
        if smoothing_alpha <= 0:
            raise InputError("smoothing_alpha must be > 0")
        self.vocab = vocab
        self.order = order
        self.smoothing_alpha = smoothing_alpha
        self.backoff_factor = backoff_factor
        self.history_window = history_window
        self._counts: dict[tuple[int, ...], dict[int, int]] = {}
        if counts:
            for context, successors in counts.items():
                context = tuple(context)
                if len(context) >= order:
                    raise InputError("stored contexts must be shorter than the order")
                self._counts[context] = dict(successors)
        self._totals = {c: sum(s.values()) for c, s in self._counts.items()}

    @property
    def counts(self) -> dict[tuple[int, ...], dict[int, int]]:
        return self._counts

    def count(self, context: Sequence[int], token: int) -> int:
        return self._counts.get(tuple(context), {}).get(token, 0)

    def _next_logprobs(self, ctx: Context, prefix: tuple[int, ...]) -> np.ndarray:
        stream = encode_context(ctx, self.history_window) + prefix
        mask = self.vocab.emittable_mask
        n_emit = self.vocab.num_emittable
        alpha = self.smoothing_alpha

        # Add-alpha unigram base.
        scores = np.zeros(len(self.vocab))
        base = self._counts.get((), {})
        base_total = self._totals.get((), 0)
        scores[mask] = alpha
        for token, c in base.items():
            scores[token] += c
        scores[mask] /= base_total + alpha * n_emit

        # Refine through longer suffixes; unseen contexts are skipped, which
        # is exactly "back off to the shorter context".
        max_ctx = min(self.order - 1, len(stream))
        for k in range(1, max_ctx + 1):
            context = tuple(stream[len(stream) - k:])
            total = self._totals.get(context, 0)
            if total == 0:
                continue
            refined = scores * self.backoff_factor
            for token, c in self._counts[context].items():
                refined[token] = c / total
            scores = refined

        probs = np.zeros(len(self.vocab))
        emitted = scores[mask]
        probs[mask] = emitted / emitted.sum()
        with np.errstate(divide="ignore"):
            return np.log(probs)

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        counts = sorted(
            (list(context), sorted(successors.items()))
            for context, successors in self._counts.items()
        )
        return {
            "format": "dialogsearch-ngram",
            "version": 1,
            "order": self.order,
            "smoothing_alpha": self.smoothing_alpha,
            "backoff_factor": self.backoff_factor,
            "history_window": self.history_window,
            "words": list(self.vocab.words),
            "counts": counts,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "NGramLM":
        if data.get("format") != "dialogsearch-ngram":
            raise InputError("not a dialogsearch n-gram model file")
        if data.get("version") != 1:
            raise InputError(f"unsupported model version: {data.get('version')!r}")
        counts = {
            tuple(context): {int(t): int(c) for t, c in successors}
            for context, successors in data["counts"]
        }
        return cls(
            vocab=Vocabulary(data["words"]),
            order=data["order"],
            smoothing_alpha=data["smoothing_alpha"],
            backoff_factor=data["backoff_factor"],
            history_window=data["history_window"],
            counts=counts,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "NGramLM":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed model file {path}: {exc}") from exc
        return cls.from_json_dict(data)


def train_ngram(
    corpus: Sequence[TaggedUtterance],
    order: int,
    smoothing_alpha: float = 1.0,
    *,
    vocab: Vocabulary,
    backoff_factor: float = BACKOFF_FACTOR,
    history_window: int | None = 3,
) -> NGramLM:
    """Count n-gram transitions over a corpus of context-tagged utterances.

    Only utterance tokens are counted as prediction targets; the flattened
    context stream (persona, speaker tags, history) contributes conditioning
    positions. Tokens are counted exactly as given -- callers that want a
    terminator include <eos> in the utterance.
    """
    if not corpus:
        raise InputError("training corpus is empty")
    model = NGramLM(
        vocab,
        order,
        smoothing_alpha,
        backoff_factor=backoff_factor,
        history_window=history_window,
    )
    counts = model._counts
    for example in corpus:
        vocab.validate_ids(example.tokens)
        vocab.validate_ids(example.context.all_token_ids())
        stream = encode_context(example.context, history_window) + example.tokens
        start = len(stream) - len(example.tokens)
        for pos in range(start, len(stream)):
            target = stream[pos]
            for k in range(min(order, pos + 1)):
                context = stream[pos - k:pos]
                counts.setdefault(context, {})
                counts[context][target] = counts[context].get(target, 0) + 1
    model._totals = {c: sum(s.values()) for c, s in counts.items()}
    return model
