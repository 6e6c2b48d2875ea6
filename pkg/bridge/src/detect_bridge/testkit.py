"""Offline test assets: a tiny fixture corpus and freshly initialized
miniature models (causal LM, masked LM, classifier) sharing one word-level
tokenizer, so the bridge can be exercised without any downloads. The real
deployment path is identical except that --model names a hub id."""

from __future__ import annotations

import json
import random
from pathlib import Path

FIXTURE_WORDS = (
    "the tide went out before dawn and left the flats shining like pewter "
    "a glass float lay beside two gull feathers on the cold sand "
    "the village slept while thin smoke rose from stone chimneys "
    "boats coughed awake beyond the breakwater as buyers arrived from the city "
    "she carried the bucket up the beach while gulls wheeled and screamed"
).split()


def make_fixture_corpus(path: str | Path, n_docs: int = 5, seed: int = 0, words_per_doc: int = 40) -> list[str]:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    ids = []
    with path.open("w", encoding="utf-8") as fh:
        for i in range(n_docs):
            words = [FIXTURE_WORDS[rng.randrange(len(FIXTURE_WORDS))] for _ in range(words_per_doc)]
            doc_id = f"fix{i:03d}"
            ids.append(doc_id)
            row = {
                "id": doc_id,
                "text": " ".join(words),
                "label": i % 2,
                "source": "arxiv",
                "generator": None,
            }
            fh.write(json.dumps(row) + "\n")
    return ids


def build_tiny_models(root: str | Path, seed: int = 0) -> Path:
    """Create lm/ (causal), mlm/ (fill-mask), classifier/ (2-label) model
    directories under ``root``, all sharing a word-level tokenizer built
    from the fixture vocabulary."""
    import torch
    from tokenizers import Tokenizer, models, pre_tokenizers
    from transformers import (
        BertConfig,
        BertForMaskedLM,
        BertForSequenceClassification,
        GPT2Config,
        GPT2LMHeadModel,
        PreTrainedTokenizerFast,
    )

    root = Path(root)
    vocab = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3, "[MASK]": 4}
    for word in sorted(set(FIXTURE_WORDS)):
        vocab.setdefault(word, len(vocab))
    tokenizer = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tokenizer.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )

    torch.manual_seed(seed)
    lm_cfg = GPT2Config(
        vocab_size=len(vocab), n_positions=128, n_embd=32, n_layer=2, n_head=2,
        bos_token_id=vocab["[CLS]"], eos_token_id=vocab["[SEP]"],
    )
    GPT2LMHeadModel(lm_cfg).save_pretrained(root / "lm")
    fast.save_pretrained(root / "lm")

    bert_cfg = dict(
        vocab_size=len(vocab), hidden_size=32, num_hidden_layers=2, num_attention_heads=2,
        intermediate_size=64, max_position_embeddings=128, pad_token_id=vocab["[PAD]"],
    )
    BertForMaskedLM(BertConfig(**bert_cfg)).save_pretrained(root / "mlm")
    fast.save_pretrained(root / "mlm")
    BertForSequenceClassification(BertConfig(num_labels=2, **bert_cfg)).save_pretrained(root / "classifier")
    fast.save_pretrained(root / "classifier")
    return root
