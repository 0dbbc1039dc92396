"""Transcript persistence: one JSON object per line, append-only.

A record is self-contained: the metrics and calibration modules can run
from a transcript file alone, without the service or the model that
produced it. Records carry no timestamps so identical runs produce
identical bytes.

Record fields:
  format             "dialogsearch-transcript" (rejects foreign files)
  version            1
  session_id         unique per store ("session-0001", "selfplay-beam-0000")
  annotator_id       caller-supplied opaque string; null for self-play
  strategy           "greedy" | "beam" | "iter-beam"
  personas           [persona_a_lines, persona_b_lines], each a list of str
  min_turns          pairs required before scoring; null for self-play
  search_config      echo of every search parameter the run used
  model_fingerprint  sha256 of the model's canonical JSON
  candidates_shown   always false: annotators never see candidate sets
  turns              list of {speaker, text, tokens, generated,
                     logprob, candidates}; logprob/candidates are null on
                     human turns. Generated tokens include the terminator;
                     each candidate is {tokens, logprob, selection_score}.
  annotation         null until scored, then {overall, good_pairs, bad_pairs}
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..errors import InputError
from ..metrics import ConversationMetricsInput, TurnMetricsInput

RECORD_FORMAT = "dialogsearch-transcript"
RECORD_VERSION = 1


def encode_record(record: Mapping) -> str:
    """Canonical single-line encoding; identical records give identical bytes."""
    return json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"


def validate_record(record: Mapping) -> None:
    if not isinstance(record, Mapping):
        raise InputError("transcript record must be a JSON object")
    if record.get("format") != RECORD_FORMAT:
        raise InputError("not a transcript record (bad or missing format tag)")
    if record.get("version") != RECORD_VERSION:
        raise InputError(f"unsupported transcript version {record.get('version')!r}")
    for key in ("session_id", "strategy", "personas", "turns", "search_config"):
        if key not in record:
            raise InputError(f"transcript record missing {key!r}")


class TranscriptStore:
    """Append-only JSONL file with serialized, atomic line appends."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: Mapping) -> None:
        validate_record(record)
        line = encode_record(record)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(line)
                handle.flush()

    def read_all(self) -> list[dict]:
        if not self.path.exists():
            return []
        return load_transcripts(self.path)


def load_transcripts(path: str | Path) -> list[dict]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"transcript file not found: {path}")
    records = []
    with open(p, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"line {lineno}: invalid JSON: {exc}") from None
            validate_record(record)
            records.append(record)
    return records


def generated_turns(record: Mapping) -> list[dict]:
    return [t for t in record["turns"] if t["generated"]]


def metrics_inputs(
    records: Iterable[Mapping],
) -> dict[str, list[ConversationMetricsInput]]:
    """Group transcript records into per-strategy metrics inputs.

    Only generated turns contribute; a record with none is skipped.
    """
    grouped: dict[str, list[ConversationMetricsInput]] = {}
    for record in records:
        validate_record(record)
        turns = []
        for turn in generated_turns(record):
            candidates = tuple(
                tuple(c["tokens"]) for c in (turn["candidates"] or ())
            )
            turns.append(
                TurnMetricsInput(
                    selected=tuple(turn["tokens"]),
                    candidates=candidates,
                    logprob=float(turn["logprob"]),
                )
            )
        if turns:
            grouped.setdefault(record["strategy"], []).append(
                ConversationMetricsInput(turns=tuple(turns))
            )
    if not grouped:
        raise InputError("no transcripts with generated turns")
    return grouped
