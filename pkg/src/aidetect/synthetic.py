"""Synthetic desk-scale corpus: pooled human prose vs. Markov-generated text.

Human documents are assembled by sampling sentences from a bundled prose
pool (three registers: formal expository tagged "arxiv", journalistic
tagged "news", narrative tagged "fiction"). AI documents come from biased
Markov chains trained on the same pool; lower sampling temperature yields
the repetitive, low-diversity text the detectors are meant to catch.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources

from .corpus import Document, preprocess
from .errors import ConfigError, DataContractError
from .linguistics import split_sentences

REGISTERS = ("arxiv", "news", "fiction")

_SENT_END = "</sent>"
_TERMINALS = (".", "!", "?")


@dataclass(frozen=True)
class GeneratorProfile:
    name: str
    order: int  # Markov context length in tokens
    temperature: float  # < 1 sharpens the next-token distribution
    min_sent: int  # machine text tends toward uniform sentence lengths
    max_sent: int


PROFILES = {
    "markov2-lowtemp": GeneratorProfile("markov2-lowtemp", order=2, temperature=0.25, min_sent=14, max_sent=21),
    "markov2-midtemp": GeneratorProfile("markov2-midtemp", order=2, temperature=0.55, min_sent=10, max_sent=25),
    "markov3-hightemp": GeneratorProfile("markov3-hightemp", order=3, temperature=0.9, min_sent=6, max_sent=28),
}
DEFAULT_PROFILES = ("markov2-lowtemp", "markov2-midtemp", "markov3-hightemp")


def load_pool() -> dict:
    try:
        raw = resources.files("aidetect.data").joinpath("prose_pool.json").read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError("bundled prose pool is missing from the package data") from exc
    return json.loads(raw)


def pool_sentences_by_register(pool: dict) -> dict[str, list[str]]:
    by_register: dict[str, list[str]] = {r: [] for r in REGISTERS}
    for passage in pool["passages"]:
        by_register[passage["register"]].extend(split_sentences(passage["text"]))
    return by_register


class MarkovChain:
    """Order-n Markov chain over whitespace tokens with per-sentence
    start/end markers and temperature-biased sampling."""

    def __init__(self, profile: GeneratorProfile):
        self.order = profile.order
        self.temperature = profile.temperature
        self.min_sent = profile.min_sent
        self.max_sent = profile.max_sent
        self.transitions: dict[tuple[str, ...], dict[str, int]] = {}

    def train(self, sentences: list[str]) -> None:
        for sent in sentences:
            tokens = sent.split()
            if not tokens:
                continue
            seq = ["<start>"] * self.order + tokens + [_SENT_END]
            for i in range(self.order, len(seq)):
                ctx = tuple(seq[i - self.order : i])
                self.transitions.setdefault(ctx, {}).setdefault(seq[i], 0)
                self.transitions[ctx][seq[i]] += 1

    def _sample_next(self, ctx: tuple[str, ...], rng: random.Random, allow_end: bool) -> str | None:
        table = self.transitions.get(ctx)
        if not table:
            return None
        items = sorted((tok, c) for tok, c in table.items() if allow_end or tok != _SENT_END)
        if not items:
            return None
        weights = [count ** (1.0 / self.temperature) for _, count in items]
        return rng.choices([tok for tok, _ in items], weights=weights, k=1)[0]

    def sentence(self, rng: random.Random) -> str:
        start = tuple(["<start>"] * self.order)
        ctx = start
        raw: list[str] = []
        while len(raw) < self.max_sent:
            tok = self._sample_next(ctx, rng, allow_end=len(raw) >= self.min_sent)
            if tok == _SENT_END:
                break
            if tok is None:
                if len(raw) >= self.min_sent or ctx == start:
                    break
                # Dead end with the end marker blocked: splice in a fresh
                # clause so the surface sentence keeps its target length.
                ctx = start
                continue
            raw.append(tok)
            ctx = ctx[1:] + (tok,)
        if not raw:
            return ""
        # Interior tokens may carry sentence-final punctuation from the pool;
        # soften it to commas so the surface holds exactly one boundary.
        surface: list[str] = []
        for i, tok in enumerate(raw):
            if i < len(raw) - 1 and tok.endswith(_TERMINALS):
                bare = tok.rstrip("".join(_TERMINALS))
                tok = bare + "," if bare else ","
            surface.append(tok)
        if not surface[-1].endswith(_TERMINALS):
            surface[-1] = surface[-1].rstrip(",;:") + "."
        return " ".join(surface)


def _human_text(sentences: list[str], rng: random.Random, target_words: int) -> str:
    # Draw sentences in shuffled cycles so a document never repeats one
    # until the register pool is exhausted; repetition is the machine tell,
    # not the human one.
    chosen: list[str] = []
    count = 0
    deck: list[str] = []
    while count < target_words:
        if not deck:
            deck = list(sentences)
            rng.shuffle(deck)
        sent = deck.pop()
        chosen.append(sent)
        count += len(sent.split())
    return " ".join(chosen)


def _machine_text(chain: MarkovChain, rng: random.Random, target_words: int) -> str:
    chosen: list[str] = []
    count = 0
    while count < target_words:
        sent = chain.sentence(rng)
        if not sent:
            continue
        chosen.append(sent)
        count += len(sent.split())
    return " ".join(chosen)


def generate_synthetic_corpus(
    n_per_class: int,
    seed: int,
    profiles: tuple[str, ...] | list[str] = DEFAULT_PROFILES,
) -> list[Document]:
    """Emit ``n_per_class`` human and ``n_per_class`` machine documents, all
    inside the 300-800 word window, deterministically for a given seed."""
    if n_per_class < 10:
        raise DataContractError(f"n_per_class must be >= 10, got {n_per_class}")
    unknown = [p for p in profiles if p not in PROFILES]
    if unknown:
        raise ConfigError(f"unknown generator profiles: {unknown}; known: {sorted(PROFILES)}")
    if not profiles:
        raise ConfigError("at least one generator profile is required")

    pool = load_pool()
    by_register = pool_sentences_by_register(pool)
    all_sentences = [s for r in REGISTERS for s in by_register[r]]

    chains: dict[str, MarkovChain] = {}
    for name in profiles:
        chain = MarkovChain(PROFILES[name])
        chain.train(all_sentences)
        chains[name] = chain

    rng = random.Random(seed)
    docs: list[Document] = []
    for i in range(n_per_class):
        register = REGISTERS[i % len(REGISTERS)]
        target = rng.randint(400, 480)
        text = _human_text(by_register[register], rng, target)
        result = preprocess(text)
        if not result.accepted:
            raise DataContractError(f"generated human document failed the length filter: {result.rejection}")
        docs.append(Document(id=f"h{i:05d}", text=result.text, label=0, source=register))

    for i in range(n_per_class):
        register = REGISTERS[i % len(REGISTERS)]
        profile = profiles[(i // len(REGISTERS)) % len(profiles)]
        target = rng.randint(400, 480)
        text = _machine_text(chains[profile], rng, target)
        result = preprocess(text)
        if not result.accepted:
            raise DataContractError(f"generated AI document failed the length filter: {result.rejection}")
        docs.append(Document(id=f"a{i:05d}", text=result.text, label=1, source=register, generator=profile))
    return docs


def load_thesaurus() -> dict[str, list[str]]:
    return load_pool()["thesaurus"]
