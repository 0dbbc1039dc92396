"""Plain-text conversation corpus and persona pool parsing.

Corpus format: blank-line separated conversation blocks. Each block may open
with any number of `persona:` lines (the persona of speaker b, the
responder being modeled) followed by alternating `a:` / `b:` utterance
lines, starting with `a:`. Example:

    persona: i love dogs .
    persona: i work at a bakery .
    a: hi , how are you ?
    b: great , i just walked my dog .
    a: what breed is it ?
    b: a terrier . do you like dogs ?

Persona pool files are simpler: blank-line separated groups of
`persona:` lines, one group per persona.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .errors import InputError
from .lm import Context, TaggedUtterance
from .vocab import EOS_TOKEN, Vocabulary, tokenize


def _blocks(text: str) -> list[list[str]]:
    blocks: list[list[str]] = []
    current: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            if current:
                blocks.append(current)
                current = []
            continue
        current.append(line)
    if current:
        blocks.append(current)
    return blocks


def parse_conversations(text: str) -> list[tuple[list[str], list[tuple[str, str]]]]:
    """Parse corpus text into (persona lines, [(speaker, utterance), ...])."""
    conversations = []
    for block_idx, block in enumerate(_blocks(text)):
        persona: list[str] = []
        turns: list[tuple[str, str]] = []
        expected = "a"
        for line in block:
            head, sep, body = line.partition(":")
            head = head.strip()
            if not sep:
                raise InputError(f"conversation {block_idx}: line without tag: {line!r}")
            if head == "persona":
                if turns:
                    raise InputError(
                        f"conversation {block_idx}: persona lines must precede turns"
                    )
                persona.append(body.strip())
            elif head in ("a", "b"):
                if head != expected:
                    raise InputError(
                        f"conversation {block_idx}: expected speaker {expected!r}, got {head!r}"
                    )
                turns.append((head, body.strip()))
                expected = "b" if expected == "a" else "a"
            else:
                raise InputError(f"conversation {block_idx}: unknown tag {head!r}")
        if not turns:
            raise InputError(f"conversation {block_idx}: no utterances")
        conversations.append((persona, turns))
    if not conversations:
        raise InputError("corpus contains no conversations")
    return conversations


def parse_context(text: str) -> tuple[list[str], list[tuple[str, str]]]:
    """Parse one persona+turns block to be used as a decoding prompt.

    Unlike a corpus conversation, the turn list may be empty (generate the
    opener) and only a single block is allowed.
    """
    blocks = _blocks(text)
    if len(blocks) != 1:
        raise InputError(f"expected exactly one context block, found {len(blocks)}")
    persona: list[str] = []
    turns: list[tuple[str, str]] = []
    expected = "a"
    for line in blocks[0]:
        head, sep, body = line.partition(":")
        head = head.strip()
        if not sep:
            raise InputError(f"context line without tag: {line!r}")
        if head == "persona":
            if turns:
                raise InputError("persona lines must precede turns")
            persona.append(body.strip())
        elif head in ("a", "b"):
            if head != expected:
                raise InputError(f"expected speaker {expected!r}, got {head!r}")
            turns.append((head, body.strip()))
            expected = "b" if expected == "a" else "a"
        else:
            raise InputError(f"unknown tag {head!r}")
    return persona, turns


def parse_persona_pool(text: str) -> list[tuple[str, ...]]:
    """Parse a persona pool file into tuples of persona lines."""
    pool: list[tuple[str, ...]] = []
    for block_idx, block in enumerate(_blocks(text)):
        lines = []
        for line in block:
            head, sep, body = line.partition(":")
            if not sep or head.strip() != "persona":
                raise InputError(f"persona {block_idx}: expected 'persona:' line, got {line!r}")
            lines.append(body.strip())
        pool.append(tuple(lines))
    if not pool:
        raise InputError("persona pool is empty")
    return pool


def build_vocab(text: str) -> Vocabulary:
    """Vocabulary over every word in a corpus, sorted for determinism."""
    words: set[str] = set()
    for persona, turns in parse_conversations(text):
        for line in persona:
            words.update(tokenize(line))
        for _, utterance in turns:
            words.update(tokenize(utterance))
    return Vocabulary(sorted(words))


def training_examples(text: str, vocab: Vocabulary) -> list[TaggedUtterance]:
    """Expand a corpus into per-utterance training examples.

    Every utterance becomes one example whose context is the persona plus
    all preceding turns; an <eos> terminator is appended to the target
    tokens so models learn to stop.
    """
    eos = vocab.id_of(EOS_TOKEN)
    examples: list[TaggedUtterance] = []
    for persona, turns in parse_conversations(text):
        persona_ids = tuple(vocab.encode_text(line) for line in persona)
        ctx = Context(persona_lines=persona_ids)
        for speaker, utterance in turns:
            tokens = vocab.encode_text(utterance) + (eos,)
            examples.append(TaggedUtterance(context=ctx, tokens=tokens))
            ctx = ctx.extended(speaker, vocab.encode_text(utterance))
    return examples


def load_corpus(path: str | Path) -> str:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    return p.read_text()
