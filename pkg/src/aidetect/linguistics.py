"""Stylometric detector: five lexical/sentence statistics averaged into a score.

Every feature is normalized into [0, 1] and oriented so that larger values
read as more machine-like: low lexical diversity, uniform sentence lengths,
long sentences, many multi-syllable words, and few short sentences.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields

from .errors import DataContractError

# Splits are suppressed after these tokens (compared lowercased, with any
# leading quote/bracket stripped).
ABBREVIATIONS = frozenset({"e.g.", "i.e.", "dr.", "mr.", "ms.", "etc.", "vs."})

DEFAULT_STD_CAP = 15.0
DEFAULT_AVG_CAP = 40.0
DEFAULT_COMPLEX_CAP = 0.4
DEFAULT_SHORT_LEN = 8

_BOUNDARY_RE = re.compile(r"[.!?]+(?=\s|$)")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
_STRIP_CHARS = ".,;:!?\"'()[]"


@dataclass(frozen=True)
class FeatureVector:
    f1_ttr_ai: float
    f2_sentlen_std_ai: float
    f3_sentlen_avg_ai: float
    f4_complex_ratio_ai: float
    f5_short_sent_freq_ai: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (
            self.f1_ttr_ai,
            self.f2_sentlen_std_ai,
            self.f3_sentlen_avg_ai,
            self.f4_complex_ratio_ai,
            self.f5_short_sent_freq_ai,
        )

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0.0 <= v <= 1.0:
                raise DataContractError(f"feature {f.name} out of [0,1]: {v!r}")


@dataclass(frozen=True)
class SentenceStats:
    sentence_lengths: list[int]
    token_count: int
    type_count: int


def split_sentences(text: str) -> list[str]:
    """Split cleaned text into sentences on runs of ``.!?`` followed by
    whitespace or end of text, keeping the terminal punctuation with the
    sentence. A small abbreviation list suppresses false splits."""
    boundaries: list[int] = []
    for m in _BOUNDARY_RE.finditer(text):
        end = m.end()
        ws_start = text.rfind(" ", 0, m.start()) + 1
        word = text[ws_start:end].lstrip("\"'([").lower()
        if word in ABBREVIATIONS:
            continue
        boundaries.append(end)
    sentences: list[str] = []
    start = 0
    for end in boundaries:
        seg = text[start:end].strip()
        if seg:
            sentences.append(seg)
        start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _normalize_word(token: str) -> str:
    return token.lower().rstrip(_STRIP_CHARS)


def _words(text: str) -> list[str]:
    return [w for w in (_normalize_word(t) for t in text.split()) if w]


def sentence_stats(text: str) -> SentenceStats:
    lengths = [len(s.split()) for s in split_sentences(text)]
    words = _words(text)
    return SentenceStats(sentence_lengths=lengths, token_count=len(words), type_count=len(set(words)))


def is_complex_word(word: str) -> bool:
    """Vowel-group heuristic: three or more maximal runs of aeiouy."""
    return len(_VOWEL_GROUP_RE.findall(word)) >= 3


def text_statistics(text: str, short_len: int = DEFAULT_SHORT_LEN) -> dict[str, float]:
    """Raw, unoriented statistics: type-token ratio, sentence-length std and
    mean, complex-word ratio, and short-sentence frequency."""
    sentences = split_sentences(text)
    words = _words(text)
    if not sentences:
        raise DataContractError("cannot extract features from a text with no sentences")
    if not words:
        raise DataContractError("cannot extract features from a text with no words")
    lengths = [len(s.split()) for s in sentences]
    mean_len = sum(lengths) / len(lengths)
    var = sum((x - mean_len) ** 2 for x in lengths) / len(lengths)
    return {
        "ttr": len(set(words)) / len(words),
        "sentlen_std": math.sqrt(var),
        "sentlen_avg": mean_len,
        "complex_ratio": sum(1 for w in words if is_complex_word(w)) / len(words),
        "short_sent_freq": sum(1 for n in lengths if n < short_len) / len(lengths),
    }


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def extract_features(
    text: str,
    std_cap: float = DEFAULT_STD_CAP,
    avg_cap: float = DEFAULT_AVG_CAP,
    complex_cap: float = DEFAULT_COMPLEX_CAP,
    short_len: int = DEFAULT_SHORT_LEN,
) -> FeatureVector:
    """Compute the five machine-oriented features.

    Orientation: high lexical diversity and frequent short sentences read as
    human, so those statistics are inverted; sentence-length mean and
    complex-word ratio are capped and scaled so typical prose lands inside
    [0, 1] before clamping.
    """
    raw = text_statistics(text, short_len=short_len)
    return FeatureVector(
        f1_ttr_ai=_clamp01(1.0 - raw["ttr"]),
        f2_sentlen_std_ai=1.0 - _clamp01(raw["sentlen_std"] / std_cap),
        f3_sentlen_avg_ai=_clamp01(raw["sentlen_avg"] / avg_cap),
        f4_complex_ratio_ai=_clamp01(raw["complex_ratio"] / complex_cap),
        f5_short_sent_freq_ai=_clamp01(1.0 - raw["short_sent_freq"]),
    )


def linguistic_probability(f: FeatureVector) -> float:
    """Unweighted average of the five oriented features."""
    t = f.as_tuple()
    return sum(t) / len(t)
