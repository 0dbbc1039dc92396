"""Token vocabulary with reserved control tokens.

Id layout is fixed: the six special tokens occupy ids 0..5, regular words
follow in the order given at construction. Four of the specials are pure
control markers (padding, persona separator, speaker tags): they may appear
in conditioning streams but are never emitted by a model, so every
distribution assigns them probability zero. The emittable set is everything
else: regular words plus <unk> and <eos>.
"""

from __future__ import annotations

import re
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InputError

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
EOS_TOKEN = "<eos>"
PERSONA_TOKEN = "<persona>"
SPEAKER_A_TOKEN = "<a>"
SPEAKER_B_TOKEN = "<b>"

SPECIAL_TOKENS = (
    PAD_TOKEN,
    UNK_TOKEN,
    EOS_TOKEN,
    PERSONA_TOKEN,
    SPEAKER_A_TOKEN,
    SPEAKER_B_TOKEN,
)

# Control tokens structure the conditioning stream only; models never emit them.
CONTROL_TOKENS = (PAD_TOKEN, PERSONA_TOKEN, SPEAKER_A_TOKEN, SPEAKER_B_TOKEN)

_WORD_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word/punctuation tokens."""
    return _WORD_RE.findall(text.lower())


class Vocabulary:
    """Bijective string<->id mapping with dense ids and reserved specials."""

    pad_id = 0
    unk_id = 1
    eos_id = 2
    persona_id = 3
    speaker_a_id = 4
    speaker_b_id = 5

    def __init__(self, words: Iterable[str] = ()):
        tokens = list(SPECIAL_TOKENS)
        seen = set(tokens)
        for word in words:
            if word in seen:
                if word in SPECIAL_TOKENS:
                    continue
                raise InputError(f"duplicate token in vocabulary: {word!r}")
            seen.add(word)
            tokens.append(word)
        self._tokens: tuple[str, ...] = tuple(tokens)
        self._ids: dict[str, int] = {t: i for i, t in enumerate(tokens)}
        control = np.zeros(len(tokens), dtype=bool)
        for t in CONTROL_TOKENS:
            control[self._ids[t]] = True
        self._control_mask = control
        self._emittable_mask = ~control

    def __len__(self) -> int:
        return len(self._tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self._tokens)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    @property
    def words(self) -> tuple[str, ...]:
        """Non-special tokens, in id order."""
        return self._tokens[len(SPECIAL_TOKENS):]

    @property
    def emittable_mask(self) -> np.ndarray:
        """Boolean mask over ids; True where a model may place probability."""
        return self._emittable_mask

    @property
    def num_emittable(self) -> int:
        return int(self._emittable_mask.sum())

    @property
    def emittable_ids(self) -> list[int]:
        return [i for i in range(len(self)) if self._emittable_mask[i]]

    def id_of(self, token: str) -> int:
        """Exact lookup; unknown token is an error (use encode for unk mapping)."""
        try:
            return self._ids[token]
        except KeyError:
            raise InputError(f"token not in vocabulary: {token!r}") from None

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._tokens):
            raise InputError(f"token id out of range: {token_id}")
        return self._tokens[token_id]

    def encode(self, tokens: Sequence[str]) -> tuple[int, ...]:
        """Map token strings to ids, sending unknown words to <unk>."""
        unk = self.unk_id
        return tuple(self._ids.get(t, unk) for t in tokens)

    def encode_text(self, text: str) -> tuple[int, ...]:
        return self.encode(tokenize(text))

    def decode(self, ids: Sequence[int], drop_eos: bool = False) -> list[str]:
        tokens = [self.token_of(i) for i in ids]
        if drop_eos:
            tokens = [t for t in tokens if t != EOS_TOKEN]
        return tokens

    def decode_text(self, ids: Sequence[int]) -> str:
        return " ".join(self.decode(ids, drop_eos=True))

    def validate_ids(self, ids: Iterable[int]) -> None:
        n = len(self._tokens)
        for i in ids:
            if not 0 <= i < n:
                raise InputError(f"token id out of range: {i}")
