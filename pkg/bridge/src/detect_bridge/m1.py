"""Detector m1: binary sequence classification with a transformer head.

raw_score is the pre-sigmoid margin (positive-class logit minus
negative-class logit for two-logit heads), prob the positive-class
probability. Inference is greedy and seeded, so repeated runs produce
byte-identical output files.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from .records import BridgeJob, read_corpus, score_row, sidecar_path, write_records_atomic

MAX_LENGTH = 512


def bridge_score_m1(job: BridgeJob, seed: int = 0) -> Path:
    torch.manual_seed(seed)
    docs = read_corpus(job.corpus)
    if not docs:
        write_records_atomic(job.out, [])
        return job.out

    tokenizer = AutoTokenizer.from_pretrained(job.model)
    model = AutoModelForSequenceClassification.from_pretrained(job.model)
    model.to(job.device)
    model.eval()

    truncated: list[dict] = []
    rows: list[dict] = []
    with torch.no_grad():
        for start in range(0, len(docs), job.batch_size):
            batch = docs[start : start + job.batch_size]
            lengths = [len(tokenizer(d.text)["input_ids"]) for d in batch]
            for doc, n in zip(batch, lengths):
                if n > MAX_LENGTH:
                    truncated.append({"doc_id": doc.id, "token_count": n, "max_length": MAX_LENGTH})
            enc = tokenizer(
                [d.text for d in batch],
                return_tensors="pt",
                padding=True,
                truncation=True,
                max_length=MAX_LENGTH,
            ).to(job.device)
            logits = model(**enc).logits
            if logits.shape[-1] == 2:
                raw = (logits[:, 1] - logits[:, 0]).cpu()
            else:
                raw = logits[:, 0].cpu()
            prob = torch.sigmoid(raw)
            for doc, r, p in zip(batch, raw.tolist(), prob.tolist()):
                rows.append(score_row(doc.id, "m1", float(r), float(p)))

    write_records_atomic(job.out, rows)
    if truncated:
        log = sidecar_path(job.out, "truncated")
        with log.open("w", encoding="utf-8") as fh:
            for event in truncated:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
    return job.out
