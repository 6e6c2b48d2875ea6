"""Corpus ingestion, text cleaning, length filtering, and stratified splitting.

A document is the unit flowing through the whole pipeline: one text sample
with a binary label (0 = human, 1 = AI), a source tag used for
stratification, and an optional generator tag for AI samples.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError, DataContractError

MIN_WORDS = 300
MAX_WORDS = 800

# Tag syntax only: "<" followed by an optional "/", a letter, then anything up
# to the closing ">". Comments and declarations are matched separately.
_TAG_RE = re.compile(r"<!--.*?-->|</?[A-Za-z][^<>]*>|<![^<>]*>", re.DOTALL)
_ENTITIES = {"&amp;": "&", "&lt;": "<", "&gt;": ">", "&quot;": '"'}
_ENTITY_RE = re.compile("|".join(re.escape(e) for e in _ENTITIES))
_URL_PREFIXES = ("http://", "https://", "www.")


@dataclass
class Document:
    id: str
    text: str
    label: int
    source: str
    generator: str | None = None
    word_count: int = field(default=0)

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise DataContractError(f"document {self.id!r}: label must be 0 or 1, got {self.label!r}")
        self.label = int(self.label)
        self.word_count = len(self.text.split())


@dataclass(frozen=True)
class PreprocessResult:
    text: str
    word_count: int
    rejection: str | None = None  # None | "too_short" | "too_long"

    @property
    def accepted(self) -> bool:
        return self.rejection is None


@dataclass
class CorpusSplit:
    train: list[Document]
    validation: list[Document]
    test: list[Document]
    seed: int


def _clean_pass(text: str) -> str:
    text = _TAG_RE.sub(" ", text)
    text = _ENTITY_RE.sub(lambda m: _ENTITIES[m.group(0)], text)
    tokens = [t for t in text.split() if not t.lower().startswith(_URL_PREFIXES)]
    return " ".join(tokens)


def clean_text(raw: str) -> str:
    """Strip markup tags, decode the four basic entities, drop URL tokens,
    and collapse whitespace.

    The pass is iterated to a fixpoint so cleaning is idempotent even when
    escaped markup decodes into tag syntax (every non-trivial pass strictly
    shrinks the text, so the loop terminates).
    """
    text = raw
    while True:
        new = _clean_pass(text)
        if new == text:
            return text
        text = new


def preprocess(raw: str, min_words: int = MIN_WORDS, max_words: int = MAX_WORDS) -> PreprocessResult:
    """Clean ``raw`` and accept it only when the cleaned word count is within
    [min_words, max_words]. Rejection is a filtering outcome, not an error."""
    text = clean_text(raw)
    n = len(text.split())
    if n < min_words:
        return PreprocessResult(text, n, "too_short")
    if n > max_words:
        return PreprocessResult(text, n, "too_long")
    return PreprocessResult(text, n)


def _apportion(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of n items into len(ratios) bins,
    then force every bin to at least one item (taking from the largest bin).

    Raises when a bin with ratio zero would stay empty: every split must be
    populated from every stratum.
    """
    ideal = [r * n for r in ratios]
    counts = [math.floor(x) for x in ideal]
    leftover = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (-(ideal[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    while 0 in counts:
        empty = counts.index(0)
        if ratios[empty] <= 0.0:
            raise DataContractError(
                "cannot populate all splits: ratio for split "
                f"{empty} is zero but every split needs at least one document per stratum"
            )
        donor = max(range(len(counts)), key=lambda i: (counts[i], -i))
        counts[donor] -= 1
        counts[empty] += 1
    return counts


def stratified_split(
    corpus: Sequence[Document],
    ratios: Sequence[float] = (0.7, 0.15, 0.15),
    seed: int = 0,
) -> CorpusSplit:
    """Partition the corpus into train/validation/test, stratified by
    (label, source) so that both class balance and source balance survive
    in every split.

    Deterministic given (corpus, ratios, seed); per-stratum counts come from
    largest-remainder rounding.
    """
    if len(ratios) != 3:
        raise DataContractError(f"expected 3 ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise DataContractError(f"ratios must be non-negative, got {tuple(ratios)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataContractError(f"ratios must sum to 1 within 1e-9, got sum {sum(ratios)!r}")

    seen: set[str] = set()
    for doc in corpus:
        if doc.id in seen:
            raise DataContractError(f"duplicate document id {doc.id!r}")
        seen.add(doc.id)
        if not doc.source:
            raise DataContractError(f"document {doc.id!r} has no source tag")

    shuffled = sorted(corpus, key=lambda d: d.id)
    rng = random.Random(seed)
    rng.shuffle(shuffled)

    strata: dict[tuple[int, str], list[Document]] = {}
    for doc in shuffled:
        strata.setdefault((doc.label, doc.source), []).append(doc)

    train: list[Document] = []
    validation: list[Document] = []
    test: list[Document] = []
    for key in sorted(strata):
        docs = strata[key]
        if len(docs) < 3:
            raise DataContractError(
                f"stratum (label={key[0]}, source={key[1]!r}) has {len(docs)} documents; "
                "at least 3 are needed to populate all splits"
            )
        n_train, n_val, _ = _apportion(len(docs), ratios)
        train.extend(docs[:n_train])
        validation.extend(docs[n_train : n_train + n_val])
        test.extend(docs[n_train + n_val :])
    return CorpusSplit(train=train, validation=validation, test=test, seed=seed)


def load_corpus_jsonl(path: str | Path) -> list[Document]:
    """Read documents from a JSONL file with fields id, text, label, source,
    generator (nullable)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"corpus file not found: {path}")
    docs: list[Document] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataContractError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            missing = {"id", "text", "label", "source"} - set(row)
            if missing:
                raise DataContractError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            docs.append(
                Document(
                    id=str(row["id"]),
                    text=str(row["text"]),
                    label=row["label"],
                    source=str(row["source"]),
                    generator=row.get("generator"),
                )
            )
    return docs


def write_corpus_jsonl(path: str | Path, docs: Iterable[Document]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for doc in docs:
            row = {
                "id": doc.id,
                "text": doc.text,
                "label": doc.label,
                "source": doc.source,
                "generator": doc.generator,
            }
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
