"""Automatic metrics: response log-probability and distinct-n diversity.

distinct-n is the number of unique n-grams divided by the number of tokens,
computed per conversation and averaged over conversations. It is measured in
two settings: over the full candidate sets a search produced (pre-selection)
and over the selected responses only (post-selection). <eos> is stripped
before counting; it is a terminator, not generated content.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import InputError
from .vocab import Vocabulary

_EOS = Vocabulary.eos_id

SINGLE_CANDIDATE_STRATEGIES = ("greedy", "human")
DISTINCT_ORDERS = (1, 2, 3)


@dataclass(frozen=True)
class TurnMetricsInput:
    """Per generated turn: what was selected, from what, at what log-p."""

    selected: tuple[int, ...]
    candidates: tuple[tuple[int, ...], ...]
    logprob: float

    def __post_init__(self):
        if self.selected not in self.candidates:
            raise InputError("candidate set must contain the selected response")
        if self.logprob > 1e-9:
            raise InputError("log-probability must be <= 0")


@dataclass(frozen=True)
class ConversationMetricsInput:
    turns: tuple[TurnMetricsInput, ...]


def _strip_eos(seq: Sequence[int]) -> tuple[int, ...]:
    return tuple(t for t in seq if t != _EOS)


def distinct_n(
    conversations: Sequence[Sequence[Sequence[int]]],
    n: int,
) -> tuple[float, int]:
    """Mean per-conversation unique-n-gram rate; also counts skipped inputs.

    Each conversation is a list of token sequences pooled together: the
    value is |unique n-grams| / |tokens|. Conversations contributing no
    n-grams after <eos> stripping (no tokens at all, or every sequence
    shorter than n) are left out of the mean and tallied as skipped, keeping
    the result in (0, 1].
    """
    if n < 1:
        raise InputError("n must be >= 1")
    values = []
    skipped = 0
    for conversation in conversations:
        ngrams = set()
        total = 0
        for raw in conversation:
            seq = _strip_eos(raw)
            total += len(seq)
            for i in range(len(seq) - n + 1):
                ngrams.add(seq[i:i + n])
        if not ngrams:
            skipped += 1
            continue
        values.append(len(ngrams) / total)
    if not values:
        raise InputError("no conversation contributed any n-grams")
    return math.fsum(values) / len(values), skipped


def logp_stats(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation, compensated summation."""
    if not values:
        raise InputError("no values")
    mean = math.fsum(values) / len(values)
    variance = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(variance)


@dataclass(frozen=True)
class StrategyRow:
    strategy: str
    conversations: int
    logp_mean: float
    logp_std: float
    # a None cell means no conversation had an n-gram of that order
    post_distinct: dict[int, float | None]
    pre_distinct: dict[int, float | None] | None
    skipped: int = 0


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple[StrategyRow, ...]
    pre_pooling: str = "conversation"

    def to_json_dict(self) -> dict:
        return {
            "pre_pooling": self.pre_pooling,
            "stddev": "population",
            "rows": [
                {
                    "strategy": r.strategy,
                    "conversations": r.conversations,
                    "logp_mean": r.logp_mean,
                    "logp_std": r.logp_std,
                    "post_distinct": {str(n): v for n, v in r.post_distinct.items()},
                    "pre_distinct": None
                    if r.pre_distinct is None
                    else {str(n): v for n, v in r.pre_distinct.items()},
                    "skipped_conversations": r.skipped,
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        headers = ["search", "log-p", "conv"]
        for n in DISTINCT_ORDERS:
            headers.append(f"post-d{n}")
        for n in DISTINCT_ORDERS:
            headers.append(f"pre-d{n}")
        table = [headers]
        for r in self.rows:
            cells = [
                r.strategy,
                f"{r.logp_mean:.3f}+-{r.logp_std:.3f}",
                str(r.conversations),
            ]
            def fmt(value: float | None) -> str:
                return "-" if value is None else f"{value:.4f}"

            cells += [fmt(r.post_distinct[n]) for n in DISTINCT_ORDERS]
            if r.pre_distinct is None:
                cells += ["-"] * len(DISTINCT_ORDERS)
            else:
                cells += [fmt(r.pre_distinct[n]) for n in DISTINCT_ORDERS]
            table.append(cells)
        widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
        lines = [
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
            for row in table
        ]
        lines.append("")
        lines.append(
            "log-p is mean+-population standard deviation over selected responses;"
        )
        lines.append(
            f"distinct-n normalized per conversation (pre pooled per {self.pre_pooling})."
        )
        return "\n".join(lines) + "\n"


def build_report(
    per_strategy: Mapping[str, Sequence[ConversationMetricsInput]],
    pre_pooling: str = "conversation",
) -> MetricsReport:
    """Aggregate per-strategy conversations into a diversity/log-p report.

    pre_pooling picks the unit whose candidate sets are pooled for the
    pre-selection diversity number: "conversation" merges all turns of one
    conversation, "turn" treats each turn's candidate set separately.
    Strategies that only ever produce one candidate get no pre column.
    """
    if not per_strategy:
        raise InputError("no strategies given")
    if pre_pooling not in ("conversation", "turn"):
        raise InputError("pre_pooling must be 'conversation' or 'turn'")
    rows = []
    for strategy, conversations in per_strategy.items():
        if not conversations:
            raise InputError(f"strategy {strategy!r} has no conversations")
        logps = [t.logprob for c in conversations for t in c.turns]
        mean, std = logp_stats(logps)

        def distinct_or_none(groups, n):
            try:
                return distinct_n(groups, n)
            except InputError:
                # nothing of this order anywhere: dash the cell
                return None, len(groups)

        post_groups = [[t.selected for t in c.turns] for c in conversations]
        post = {}
        skipped = 0
        for n in DISTINCT_ORDERS:
            post[n], skip = distinct_or_none(post_groups, n)
            skipped = max(skipped, skip)

        # dash keyed on the strategy name: a search run whose candidate sets
        # happen to be singletons still gets a (degenerate) pre column
        if strategy in SINGLE_CANDIDATE_STRATEGIES:
            pre = None
        else:
            if pre_pooling == "conversation":
                pre_groups = [
                    [seq for t in c.turns for seq in t.candidates]
                    for c in conversations
                ]
            else:
                pre_groups = [list(t.candidates) for c in conversations for t in c.turns]
            pre = {n: distinct_or_none(pre_groups, n)[0] for n in DISTINCT_ORDERS}

        rows.append(
            StrategyRow(
                strategy=strategy,
                conversations=len(conversations),
                logp_mean=mean,
                logp_std=std,
                post_distinct=post,
                pre_distinct=pre,
                skipped=skipped,
            )
        )
    return MetricsReport(rows=tuple(rows), pre_pooling=pre_pooling)
