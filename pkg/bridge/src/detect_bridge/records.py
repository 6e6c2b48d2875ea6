"""Corpus reading, score-record schema, and atomic JSONL output."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable


@dataclass(frozen=True)
class CorpusDoc:
    id: str
    text: str


@dataclass(frozen=True)
class BridgeJob:
    corpus: Path
    detector_id: str  # "m1" | "m2"
    model: str
    out: Path
    batch_size: int = 8
    device: str = "cpu"


def read_corpus(path: str | Path) -> list[CorpusDoc]:
    path = Path(path)
    docs: list[CorpusDoc] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if "id" not in row or "text" not in row:
                raise ValueError(f"{path}:{lineno}: corpus rows need 'id' and 'text'")
            docs.append(CorpusDoc(id=str(row["id"]), text=str(row["text"])))
    return docs


def write_records_atomic(path: str | Path, rows: Iterable[dict]) -> None:
    """Write the full file to a sibling temp path, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    os.replace(tmp, path)


def score_row(doc_id: str, detector_id: str, raw_score: float, prob: float | None) -> dict:
    return {"doc_id": doc_id, "detector_id": detector_id, "raw_score": raw_score, "prob": prob}


def sidecar_path(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}.jsonl")
