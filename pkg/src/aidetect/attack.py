"""Lexical evasion attacks applied to machine-class test documents before
rescoring: thesaurus-based synonym swapping at a configurable rate, and
sentence-order shuffling (which leaves all order-free lexical statistics
untouched)."""

from __future__ import annotations

import random

from .errors import ConfigError
from .linguistics import split_sentences
from .synthetic import load_thesaurus

ATTACKS = ("synonym-swap", "sentence-shuffle")

_TRAIL = ".,;:!?\"')"


def synonym_swap(text: str, rate: float, seed: int, thesaurus: dict[str, list[str]] | None = None) -> str:
    """Replace each word having a thesaurus entry with one of its synonyms,
    independently with probability ``rate``; trailing punctuation and a
    leading capital survive the swap."""
    if thesaurus is None:
        thesaurus = load_thesaurus()
    rng = random.Random(seed)
    out: list[str] = []
    for token in text.split():
        stripped = token.rstrip(_TRAIL)
        trail = token[len(stripped) :]
        key = stripped.lower()
        options = thesaurus.get(key)
        if options and rate > 0.0 and rng.random() < rate:
            choice = options[rng.randrange(len(options))]
            if stripped[:1].isupper():
                choice = choice[:1].upper() + choice[1:]
            out.append(choice + trail)
        else:
            out.append(token)
    return " ".join(out)


def sentence_shuffle(text: str, seed: int) -> str:
    sentences = split_sentences(text)
    rng = random.Random(seed)
    rng.shuffle(sentences)
    return " ".join(sentences)


def apply_attack(name: str, text: str, rate: float, seed: int) -> str:
    if name == "synonym-swap":
        return synonym_swap(text, rate, seed)
    if name == "sentence-shuffle":
        return sentence_shuffle(text, seed)
    raise ConfigError(f"unknown attack {name!r}; available: {ATTACKS}")
