"""Perturbation likelihood-curvature detector.

A text is scored by how far its log-likelihood under a reference language
model sits above the average log-likelihood of randomly masked-and-infilled
variants of itself. Machine text generated near the model's probability
ridge drops sharply when perturbed; human text does not. The reference
model here is an add-alpha smoothed n-gram model trained on machine-class
text, and infilling samples replacement tokens from the same model.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import DataContractError
from .linguistics import split_sentences

START = "<s>"
END = "</s>"
UNK = "<unk>"


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace tokens; the tokenization used everywhere the
    language model touches text."""
    return [t.lower() for t in text.split()]


@dataclass
class NGramModel:
    order: int
    alpha: float
    vocabulary: set[str]
    counts: dict[tuple[str, ...], dict[str, int]]
    context_totals: dict[tuple[str, ...], int]
    _sorted_vocab: list[str] = field(default_factory=list, repr=False)
    _sorted_counts: dict[tuple[str, ...], list[tuple[str, int]]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self._sorted_vocab:
            self._sorted_vocab = sorted(self.vocabulary)

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    def map_token(self, token: str) -> str:
        return token if token in self.vocabulary else UNK

    def cond_prob(self, context: tuple[str, ...], token: str) -> float:
        """Add-alpha smoothed conditional probability. Sums to 1 over the
        vocabulary for any context."""
        c = self.counts.get(context, {}).get(token, 0)
        total = self.context_totals.get(context, 0)
        return (c + self.alpha) / (total + self.alpha * self.vocab_size)

    def sample_token(self, context: tuple[str, ...], rng: random.Random) -> str:
        """Draw from the smoothed conditional, excluding the boundary
        markers. The smoothed distribution is a mixture of the observed
        count table and a uniform over the vocabulary, so sampling never
        materializes the full distribution."""
        items = self._sorted_counts.get(context)
        if items is None:
            items = sorted(self.counts.get(context, {}).items())
            self._sorted_counts[context] = items
        total = self.context_totals.get(context, 0)
        uniform_mass = self.alpha * self.vocab_size
        for _ in range(1000):
            u = rng.random() * (total + uniform_mass)
            if u < total:
                acc = 0.0
                tok = UNK
                for tok, c in items:
                    acc += c
                    if u < acc:
                        break
            else:
                idx = min(int((u - total) / self.alpha), self.vocab_size - 1)
                tok = self._sorted_vocab[idx]
            if tok not in (START, END):
                return tok
        # Pathological vocabulary (markers only); fall back deterministically.
        candidates = [t for t in self._sorted_vocab if t not in (START, END)]
        if not candidates:
            raise DataContractError("vocabulary contains no sampleable tokens")
        return candidates[0]


@dataclass(frozen=True)
class CurvatureScore:
    l_original: float
    l_perturbed_mean: float
    s2: float
    k: int
    mask_rate: float


def train_lm(texts: Sequence[str], order: int, alpha: float) -> NGramModel:
    """Build the smoothed n-gram model over lowercased whitespace tokens with
    per-sentence boundary padding; tokens seen exactly once across the corpus
    collapse to the unknown marker."""
    if not texts:
        raise DataContractError("cannot train a language model on an empty corpus")
    if not 1 <= order <= 5:
        raise DataContractError(f"order must be in [1, 5], got {order}")
    if alpha <= 0:
        raise DataContractError(f"smoothing alpha must be positive, got {alpha}")

    sentences: list[list[str]] = []
    freq: dict[str, int] = {}
    for text in texts:
        for sent in split_sentences(text):
            tokens = tokenize(sent)
            if not tokens:
                continue
            sentences.append(tokens)
            for t in tokens:
                freq[t] = freq.get(t, 0) + 1

    vocabulary = {t for t, c in freq.items() if c >= 2}
    vocabulary.update((START, END, UNK))

    counts: dict[tuple[str, ...], dict[str, int]] = {}
    context_totals: dict[tuple[str, ...], int] = {}
    for tokens in sentences:
        mapped = [t if t in vocabulary else UNK for t in tokens]
        seq = [START] * (order - 1) + mapped + [END]
        for i in range(order - 1, len(seq)):
            ctx = tuple(seq[i - order + 1 : i])
            table = counts.setdefault(ctx, {})
            table[seq[i]] = table.get(seq[i], 0) + 1
            context_totals[ctx] = context_totals.get(ctx, 0) + 1
    return NGramModel(order=order, alpha=alpha, vocabulary=vocabulary, counts=counts, context_totals=context_totals)


def log_likelihood(model: NGramModel, tokens: Sequence[str]) -> float:
    """Total (not per-token) log-likelihood in nats, with start padding for
    the first positions and unknown tokens mapped to the unknown marker."""
    if not tokens:
        raise DataContractError("log_likelihood over an empty token list")
    mapped = [model.map_token(t) for t in tokens]
    seq = [START] * (model.order - 1) + mapped
    total = 0.0
    for i in range(model.order - 1, len(seq)):
        ctx = tuple(seq[i - model.order + 1 : i])
        total += math.log(model.cond_prob(ctx, seq[i]))
    return total


def perturb(tokens: Sequence[str], mask_rate: float, model: NGramModel, seed: int) -> list[str]:
    """Mask round(mask_rate * len) distinct positions chosen uniformly and
    infill them left to right by sampling the model conditioned on the
    preceding, possibly already-infilled, tokens."""
    if not tokens:
        raise DataContractError("cannot perturb an empty token list")
    if not 0.0 < mask_rate < 1.0:
        raise DataContractError(f"mask_rate must be in (0, 1), got {mask_rate}")
    n_mask = int(len(tokens) * mask_rate + 0.5)
    if n_mask == 0:
        raise DataContractError(
            f"mask_rate {mask_rate} on {len(tokens)} tokens rounds to zero masked positions"
        )
    rng = random.Random(seed)
    positions = sorted(rng.sample(range(len(tokens)), n_mask))
    out = [model.map_token(t) for t in tokens]
    for pos in positions:
        left = max(0, pos - (model.order - 1))
        ctx_tokens = [START] * (model.order - 1 - (pos - left)) + out[left:pos]
        out[pos] = model.sample_token(tuple(ctx_tokens), rng)
    return out


def curvature_score(
    model: NGramModel,
    text: str,
    k: int = 20,
    mask_rate: float = 0.15,
    seed: int = 0,
) -> CurvatureScore:
    """Likelihood gap between the original text and the mean of k perturbed
    variants, generated with sub-seeds seed+1 .. seed+k."""
    if k < 1:
        raise DataContractError(f"k must be >= 1, got {k}")
    tokens = tokenize(text)
    if len(tokens) < 10:
        raise DataContractError(f"text tokenizes to {len(tokens)} tokens; at least 10 required")
    l_original = log_likelihood(model, tokens)
    perturbed_lls = []
    for i in range(1, k + 1):
        variant = perturb(tokens, mask_rate, model, seed=seed + i)
        perturbed_lls.append(log_likelihood(model, variant))
    l_perturbed_mean = sum(perturbed_lls) / k
    return CurvatureScore(
        l_original=l_original,
        l_perturbed_mean=l_perturbed_mean,
        s2=l_original - l_perturbed_mean,
        k=k,
        mask_rate=mask_rate,
    )


def save_model(model: NGramModel, path: str | Path) -> None:
    """Persist as sorted plain text: one header line (order, alpha, vocab
    size), then context TAB token TAB count lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{model.order}\t{model.alpha!r}\t{model.vocab_size}\n"]
    rows = []
    for ctx, table in model.counts.items():
        ctx_str = " ".join(ctx)
        for tok, c in table.items():
            rows.append((ctx_str, tok, c))
    rows.sort()
    for ctx_str, tok, c in rows:
        lines.append(f"{ctx_str}\t{tok}\t{c}\n")
    path.write_text("".join(lines), encoding="utf-8")


def load_model(path: str | Path) -> NGramModel:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataContractError(f"empty model file: {path}")
    header = lines[0].split("\t")
    if len(header) != 3:
        raise DataContractError(f"malformed model header in {path}: {lines[0]!r}")
    order, alpha, vocab_size = int(header[0]), float(header[1]), int(header[2])
    counts: dict[tuple[str, ...], dict[str, int]] = {}
    context_totals: dict[tuple[str, ...], int] = {}
    vocabulary: set[str] = {START, END, UNK}
    for line in lines[1:]:
        ctx_str, tok, c = line.split("\t")
        ctx = tuple(ctx_str.split(" ")) if ctx_str else ()
        table = counts.setdefault(ctx, {})
        table[tok] = int(c)
        context_totals[ctx] = context_totals.get(ctx, 0) + int(c)
        vocabulary.update(ctx)
        vocabulary.add(tok)
    if len(vocabulary) != vocab_size:
        raise DataContractError(
            f"model file {path} vocab size mismatch: header says {vocab_size}, reconstructed {len(vocabulary)}"
        )
    return NGramModel(order=order, alpha=alpha, vocabulary=vocabulary, counts=counts, context_totals=context_totals)
