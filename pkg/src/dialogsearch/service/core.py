"""Session orchestration for the human-evaluation protocol.

An EvaluationService owns one immutable model snapshot, a persona pool, a
search configuration, and a transcript store. Live sessions pair a human
(speaker a) with a hidden, randomly assigned search strategy (speaker b);
the self-play generator has the model talk to itself on both sides.

Randomness (strategy, persona pair, min_turns) comes from one seeded
generator, so a fixed seed gives a reproducible assignment sequence. The
assigned strategy is never exposed in session views: annotators see only
final responses, never candidate sets or which decoder produced them.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import (
    InputError,
    ProtocolError,
    QuotaError,
    SessionNotFoundError,
    SessionStateError,
)
from ..lm import Context, DistributionProvider
from ..search import (
    CandidateSet,
    Hypothesis,
    ScoredCandidate,
    SearchConfig,
    beam_search,
    greedy_decode,
    iterative_beam_search,
    length_penalized_score,
    select_final,
)
from ..vocab import Vocabulary
from .transcripts import RECORD_FORMAT, RECORD_VERSION, TranscriptStore

STRATEGIES = ("greedy", "beam", "iter-beam")
MIN_TURN_CHOICES = (5, 6)
DEFAULT_SESSION_CAP = 6
PERSONA_LINE_RANGE = (4, 5)

CHATTING = "chatting"
AWAITING_SCORES = "awaiting_scores"
CLOSED = "closed"


def load_questionnaire() -> dict[str, str]:
    """The bundled post-conversation questionnaire prompts, verbatim."""
    raw = resources.files("dialogsearch").joinpath("data/questionnaire.json")
    data = json.loads(raw.read_text(encoding="utf-8"))
    if set(data) != {"overall", "good", "bad"}:
        raise InputError("questionnaire fixture must define overall/good/bad")
    return data


def model_fingerprint(model: DistributionProvider) -> str:
    """sha256 over the model's canonical JSON (type name if unserializable)."""
    to_json = getattr(model, "to_json_dict", None)
    payload = to_json() if to_json else {"class": type(model).__name__}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class Turn:
    speaker: str
    text: str
    tokens: tuple[int, ...]
    generated: bool
    logprob: float | None = None
    candidates: tuple[dict, ...] | None = None

    def context_tokens(self, eos_id: int) -> tuple[int, ...]:
        # conditioning histories carry content only, no terminator
        if self.tokens and self.tokens[-1] == eos_id:
            return self.tokens[:-1]
        return self.tokens

    def to_json_dict(self) -> dict:
        return {
            "speaker": self.speaker,
            "text": self.text,
            "tokens": list(self.tokens),
            "generated": self.generated,
            "logprob": self.logprob,
            "candidates": [dict(c) for c in self.candidates]
            if self.candidates is not None
            else None,
        }


@dataclass
class Session:
    session_id: str
    annotator_id: str
    strategy: str
    personas: tuple[tuple[str, ...], tuple[str, ...]]
    min_turns: int
    state: str = CHATTING
    turns: list[Turn] = field(default_factory=list)
    annotation: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def pairs_completed(self) -> int:
        return sum(1 for t in self.turns if t.generated)

    def view(self) -> dict:
        """What an annotator may see: no strategy, no candidate metadata."""
        return {
            "session_id": self.session_id,
            "state": self.state,
            "min_turns": self.min_turns,
            "pairs_completed": self.pairs_completed,
            "your_persona": list(self.personas[0]),
            "turns": [{"speaker": t.speaker, "text": t.text} for t in self.turns],
        }


def _validate_personas(pool: Sequence[Sequence[str]]) -> list[tuple[str, ...]]:
    lo, hi = PERSONA_LINE_RANGE
    cleaned = []
    for idx, persona in enumerate(pool):
        lines = tuple(persona)
        if not lo <= len(lines) <= hi:
            raise InputError(
                f"persona {idx} has {len(lines)} lines, expected {lo}-{hi}"
            )
        if any(not line.strip() for line in lines):
            raise InputError(f"persona {idx} has an empty line")
        cleaned.append(lines)
    if len(cleaned) < 2:
        raise InputError("persona pool needs at least two personas")
    return cleaned


class EvaluationService:
    """Stateful session manager; one instance per served model snapshot."""

    def __init__(
        self,
        model: DistributionProvider,
        persona_pool: Sequence[Sequence[str]],
        search_config: SearchConfig = SearchConfig(),
        store: TranscriptStore | None = None,
        seed: int = 0,
        session_cap: int = DEFAULT_SESSION_CAP,
    ):
        if session_cap < 1:
            raise InputError("session cap must be >= 1")
        self.model = model
        self.vocab: Vocabulary = model.vocab
        self.persona_pool = _validate_personas(persona_pool)
        self.search_config = search_config
        self.store = store
        self.session_cap = session_cap
        self.seed = seed
        self.fingerprint = model_fingerprint(model)
        self._rng = np.random.default_rng(seed)
        self._sessions: dict[str, Session] = {}
        self._counts: dict[tuple[str, str], int] = {}
        self._selfplay_counts: dict[str, int] = {}
        self._session_seq = 0
        self._lock = threading.Lock()

    # -- generation ---------------------------------------------------

    def _encode_persona(self, persona: tuple[str, ...]) -> tuple[tuple[int, ...], ...]:
        return tuple(self.vocab.encode_text(line) for line in persona)

    def _generate(self, strategy: str, ctx: Context) -> tuple[Hypothesis, CandidateSet]:
        cfg = self.search_config
        if strategy == "greedy":
            hyp = greedy_decode(self.model, ctx, cfg)
            cands = CandidateSet((
                ScoredCandidate(
                    hypothesis=hyp,
                    selection_score=length_penalized_score(
                        hyp.score, len(hyp.tokens), cfg.length_penalty_alpha
                    ),
                    iteration=0,
                ),
            ))
        elif strategy == "beam":
            cands, _ = beam_search(self.model, ctx, cfg)
        elif strategy == "iter-beam":
            cands, _ = iterative_beam_search(self.model, ctx, cfg)
        else:
            raise InputError(f"unknown strategy {strategy!r}")
        return select_final(cands), cands

    def _generated_turn(self, speaker: str, hyp: Hypothesis, cands: CandidateSet) -> Turn:
        return Turn(
            speaker=speaker,
            text=self.vocab.decode_text(hyp.tokens),
            tokens=hyp.tokens,
            generated=True,
            logprob=hyp.score,
            candidates=tuple(
                {
                    "tokens": list(c.hypothesis.tokens),
                    "logprob": c.hypothesis.score,
                    "selection_score": c.selection_score,
                }
                for c in cands
            ),
        )

    def _history(self, turns: Sequence[Turn]) -> tuple[tuple[str, tuple[int, ...]], ...]:
        eos = self.vocab.eos_id
        return tuple((t.speaker, t.context_tokens(eos)) for t in turns)

    # -- live sessions ------------------------------------------------

    def create_session(self, annotator_id: str) -> Session:
        if not annotator_id or not annotator_id.strip():
            raise InputError("annotator id must be nonempty")
        with self._lock:
            open_strategies = [
                s
                for s in STRATEGIES
                if self._counts.get((annotator_id, s), 0) < self.session_cap
            ]
            if not open_strategies:
                raise QuotaError(
                    f"annotator {annotator_id!r} reached the cap of "
                    f"{self.session_cap} sessions per strategy"
                )
            strategy = open_strategies[int(self._rng.integers(len(open_strategies)))]
            pair_idx = self._rng.choice(len(self.persona_pool), size=2, replace=False)
            min_turns = MIN_TURN_CHOICES[int(self._rng.integers(len(MIN_TURN_CHOICES)))]
            self._counts[(annotator_id, strategy)] = (
                self._counts.get((annotator_id, strategy), 0) + 1
            )
            self._session_seq += 1
            session = Session(
                session_id=f"session-{self._session_seq:04d}",
                annotator_id=annotator_id,
                strategy=strategy,
                personas=(
                    self.persona_pool[int(pair_idx[0])],
                    self.persona_pool[int(pair_idx[1])],
                ),
                min_turns=min_turns,
            )
            self._sessions[session.session_id] = session
            return session

    def get_session(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFoundError(f"no session {session_id!r}")
        return session

    def post_message(self, session_id: str, text: str) -> Session:
        session = self.get_session(session_id)
        with session.lock:
            if session.state != CHATTING:
                raise SessionStateError(
                    f"session {session_id} is {session.state}, not chatting"
                )
            tokens = self.vocab.encode_text(text)
            if not tokens:
                raise InputError("message must contain at least one token")
            session.turns.append(
                Turn(speaker="a", text=text, tokens=tokens, generated=False)
            )
            ctx = Context(
                persona_lines=self._encode_persona(session.personas[1]),
                history=self._history(session.turns),
            )
            hyp, cands = self._generate(session.strategy, ctx)
            session.turns.append(self._generated_turn("b", hyp, cands))
            return session

    def finish(self, session_id: str) -> Session:
        session = self.get_session(session_id)
        with session.lock:
            if session.state != CHATTING:
                raise SessionStateError(
                    f"session {session_id} is {session.state}, not chatting"
                )
            if session.pairs_completed < session.min_turns:
                raise ProtocolError(
                    f"conversation has {session.pairs_completed} pairs, "
                    f"needs {session.min_turns} before scoring"
                )
            session.state = AWAITING_SCORES
            return session

    def submit_annotation(
        self,
        session_id: str,
        overall: int,
        good_pairs: Sequence[bool],
        bad_pairs: Sequence[bool],
    ) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            if session.state == CLOSED:
                raise SessionStateError(f"session {session_id} is already closed")
            pairs = session.pairs_completed
            if pairs < session.min_turns:
                raise ProtocolError(
                    f"conversation has {pairs} pairs, needs "
                    f"{session.min_turns} before scoring"
                )
            if not isinstance(overall, int) or isinstance(overall, bool):
                raise InputError("overall score must be an integer")
            if not 1 <= overall <= 4:
                raise InputError("overall score must be in 1..4")
            good = [bool(v) for v in good_pairs]
            bad = [bool(v) for v in bad_pairs]
            if len(good) != pairs or len(bad) != pairs:
                raise InputError(
                    f"flag vectors must have one entry per pair ({pairs})"
                )
            session.annotation = {
                "overall": overall,
                "good_pairs": good,
                "bad_pairs": bad,
            }
            session.state = CLOSED
            record = self._record(session)
            if self.store is not None:
                self.store.append(record)
            return record

    # -- self-play ----------------------------------------------------

    def self_play(
        self,
        conversations: int,
        strategy: str,
        turns: int,
        seed: int = 0,
    ) -> list[dict]:
        """Model-vs-model conversations; `turns` counts exchanged pairs.

        Both sides are generated with the same strategy, each conditioned
        on its own persona. Runs from a dedicated seeded generator, so the
        output is a pure function of (model, personas, config, arguments).
        """
        if strategy not in STRATEGIES:
            raise InputError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
        if conversations < 1 or turns < 1:
            raise InputError("conversations and turns must be >= 1")
        rng = np.random.default_rng(seed)
        with self._lock:
            start = self._selfplay_counts.get(strategy, 0)
            self._selfplay_counts[strategy] = start + conversations
        records = []
        for c in range(conversations):
            pair_idx = rng.choice(len(self.persona_pool), size=2, replace=False)
            personas = (
                self.persona_pool[int(pair_idx[0])],
                self.persona_pool[int(pair_idx[1])],
            )
            encoded = (self._encode_persona(personas[0]), self._encode_persona(personas[1]))
            session = Session(
                session_id=f"selfplay-{strategy}-{start + c:04d}",
                annotator_id="",
                strategy=strategy,
                personas=personas,
                min_turns=0,
            )
            for t in range(2 * turns):
                speaker = "a" if t % 2 == 0 else "b"
                ctx = Context(
                    persona_lines=encoded[0] if speaker == "a" else encoded[1],
                    history=self._history(session.turns),
                )
                hyp, cands = self._generate(strategy, ctx)
                session.turns.append(self._generated_turn(speaker, hyp, cands))
            record = self._record(session, selfplay=True)
            if self.store is not None:
                self.store.append(record)
            records.append(record)
        return records

    # -- records ------------------------------------------------------

    def _record(self, session: Session, selfplay: bool = False) -> dict:
        return {
            "format": RECORD_FORMAT,
            "version": RECORD_VERSION,
            "session_id": session.session_id,
            "annotator_id": None if selfplay else session.annotator_id,
            "strategy": session.strategy,
            "personas": [list(p) for p in session.personas],
            "min_turns": None if selfplay else session.min_turns,
            "search_config": asdict(self.search_config),
            "model_fingerprint": self.fingerprint,
            "candidates_shown": False,
            "turns": [t.to_json_dict() for t in session.turns],
            "annotation": session.annotation,
        }

    def transcripts(self) -> list[dict]:
        if self.store is None:
            return []
        return self.store.read_all()


@dataclass(frozen=True)
class ServiceConfig:
    """Flat `key = value` config for the serve entry point."""

    model_path: str
    personas_path: str
    transcripts_path: str
    port: int = 8000
    seed: int = 0
    session_cap: int = DEFAULT_SESSION_CAP
    search_config_path: str | None = None

    def __post_init__(self):
        if not 0 < self.port < 65536:
            raise InputError("port must be in 1..65535")
        if self.session_cap < 1:
            raise InputError("session cap must be >= 1")

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        text = Path(path).read_text()
        fields = {"model_path", "personas_path", "transcripts_path",
                  "port", "seed", "session_cap", "search_config_path"}
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in fields:
                raise InputError(f"line {lineno}: unknown or malformed entry {raw!r}")
            value = value.strip()
            if key in ("port", "seed", "session_cap"):
                try:
                    values[key] = int(value)
                except ValueError:
                    raise InputError(f"line {lineno}: {key} must be an integer") from None
            else:
                values[key] = value
        missing = {"model_path", "personas_path", "transcripts_path"} - set(values)
        if missing:
            raise InputError(f"config missing required keys: {sorted(missing)}")
        return cls(**values)
