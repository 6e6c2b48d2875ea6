"""Detector m2: likelihood-curvature under a causal language model with
masked-LM infilling.

raw_score = L(x) - mean_i L(x_i~) over k perturbations, each produced by
masking a fraction of the whitespace words and regenerating them left to
right with a fill-mask model. Probabilities are left null; the pipeline
calibrates raw scores itself. Token-budget overruns and per-document
perturbation failures are logged to sidecar files, never silently imputed.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import torch
from transformers import AutoModelForCausalLM, AutoModelForMaskedLM, AutoTokenizer

from .records import BridgeJob, read_corpus, score_row, sidecar_path, write_records_atomic


def sequence_log_likelihood(model, tokenizer, text: str, device: str = "cpu") -> float:
    """Total log-likelihood (nats) of the tokenized text: sum of next-token
    log-probabilities from the second token onward."""
    ids = tokenizer(text, return_tensors="pt", truncation=True, max_length=_max_positions(model))
    input_ids = ids["input_ids"].to(device)
    if input_ids.shape[1] < 2:
        raise ValueError("text too short to score")
    with torch.no_grad():
        logits = model(input_ids).logits
    logprobs = torch.log_softmax(logits[:, :-1, :].double(), dim=-1)
    targets = input_ids[:, 1:]
    picked = logprobs.gather(2, targets.unsqueeze(-1)).squeeze(-1)
    return float(picked.sum())


def _max_positions(model) -> int:
    cfg = model.config
    for attr in ("n_positions", "max_position_embeddings"):
        if hasattr(cfg, attr):
            return int(getattr(cfg, attr))
    return 512


def perturb_words(
    text: str,
    mask_rate: float,
    infill_model,
    infill_tokenizer,
    seed: int,
    device: str = "cpu",
) -> str:
    """Mask round(mask_rate * n) whitespace words and infill them left to
    right by sampling the fill-mask distribution at each mask position."""
    words = text.split()
    n_mask = int(len(words) * mask_rate + 0.5)
    if n_mask == 0:
        raise ValueError(f"mask rate {mask_rate} rounds to zero masked words for {len(words)} words")
    rng = random.Random(seed)
    positions = sorted(rng.sample(range(len(words)), n_mask))
    gen = torch.Generator(device="cpu").manual_seed(seed)
    mask_token = infill_tokenizer.mask_token
    if mask_token is None:
        raise ValueError("infill model's tokenizer has no mask token")
    out = list(words)
    for pos in positions:
        masked = list(out)
        masked[pos] = mask_token
        enc = infill_tokenizer(
            " ".join(masked),
            return_tensors="pt",
            truncation=True,
            max_length=_max_positions(infill_model),
        ).to(device)
        mask_positions = (enc["input_ids"][0] == infill_tokenizer.mask_token_id).nonzero(as_tuple=True)[0]
        if len(mask_positions) == 0:
            continue  # mask fell beyond the truncation budget; keep the word
        with torch.no_grad():
            logits = infill_model(**enc).logits[0, int(mask_positions[0])]
        probs = torch.softmax(logits.double(), dim=-1)
        choice = int(torch.multinomial(probs.cpu(), num_samples=1, generator=gen))
        token = infill_tokenizer.decode([choice]).strip()
        if token:
            out[pos] = token
    return " ".join(out)


def bridge_score_m2(
    job: BridgeJob,
    k: int = 20,
    mask_rate: float = 0.15,
    seed: int = 0,
    infill_model_id: str | None = None,
    log_perturbations: bool = False,
) -> Path:
    docs = read_corpus(job.corpus)
    if not docs:
        write_records_atomic(job.out, [])
        return job.out

    tokenizer = AutoTokenizer.from_pretrained(job.model)
    lm = AutoModelForCausalLM.from_pretrained(job.model)
    lm.to(job.device)
    lm.eval()
    infill_id = infill_model_id or job.model
    infill_tokenizer = AutoTokenizer.from_pretrained(infill_id)
    infill = AutoModelForMaskedLM.from_pretrained(infill_id)
    infill.to(job.device)
    infill.eval()

    rows: list[dict] = []
    skipped: list[dict] = []
    logged: list[dict] = []
    for doc_index, doc in enumerate(docs):
        doc_seed = seed + 1000 * doc_index
        try:
            l_original = sequence_log_likelihood(lm, tokenizer, doc.text, job.device)
            perturbed_lls = []
            for i in range(1, k + 1):
                variant = perturb_words(doc.text, mask_rate, infill, infill_tokenizer, seed=doc_seed + i, device=job.device)
                perturbed_lls.append(sequence_log_likelihood(lm, tokenizer, variant, job.device))
                if log_perturbations:
                    logged.append({"doc_id": doc.id, "k_index": i, "text": variant})
            raw = l_original - sum(perturbed_lls) / k
            rows.append(score_row(doc.id, "m2", raw, None))
        except torch.cuda.OutOfMemoryError as exc:
            raise RuntimeError(
                f"out of memory while scoring {doc.id}; retry with a smaller --batch-size "
                f"or --device cpu ({exc})"
            ) from exc
        except Exception as exc:
            skipped.append({"doc_id": doc.id, "error": str(exc)})

    write_records_atomic(job.out, rows)
    if skipped:
        log = sidecar_path(job.out, "skipped")
        with log.open("w", encoding="utf-8") as fh:
            for event in skipped:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
    if log_perturbations:
        log = sidecar_path(job.out, "perturbations")
        with log.open("w", encoding="utf-8") as fh:
            for event in logged:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
    return job.out
