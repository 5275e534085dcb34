"""Shared fixtures: small random checkpoints, the app, and a live server.

The checkpoints are tiny Bert stacks with a handmade word-level vocabulary,
seeded so every session produces identical weights. The NLI head declares
its labels in an order that differs from the wire fields on purpose.
"""

import threading
import time
from types import SimpleNamespace

import pytest
import torch
import uvicorn
from fastapi.testclient import TestClient
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors
from transformers import (
    BertConfig,
    BertForSequenceClassification,
    BertModel,
    PreTrainedTokenizerFast,
)

from semantic_sidecar import NliScorer, RecallScorer, create_app

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
WORDS = [
    "the", "a", "cat", "dog", "bird", "fish", "mat", "rug", "tree", "house",
    "sat", "ran", "slept", "ate", "walked", "jumped", "stood", "on", "under",
    "near", "by", "big", "small", "old", "fast", "slow", "red", "blue",
    "happy", "quiet", "man", "woman", "child", "river", "stone", "cloud",
    "wind", ".", ",",
]
MAX_TOKENS = 32
SEED = 20260817


def build_tokenizer() -> PreTrainedTokenizerFast:
    vocab = {token: i for i, token in enumerate(SPECIALS + WORDS)}
    backend = Tokenizer(models.WordPiece(vocab, unk_token="[UNK]"))
    backend.normalizer = normalizers.BertNormalizer(lowercase=True)
    backend.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    backend.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B:1 [SEP]:1",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    return PreTrainedTokenizerFast(
        tokenizer_object=backend,
        model_max_length=MAX_TOKENS,
        model_input_names=["input_ids", "token_type_ids", "attention_mask"],
        pad_token="[PAD]",
        unk_token="[UNK]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )


def small_config(**overrides) -> BertConfig:
    base = dict(
        vocab_size=len(SPECIALS) + len(WORDS),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=64,
        type_vocab_size=2,
    )
    base.update(overrides)
    return BertConfig(**base)


@pytest.fixture(scope="session")
def checkpoints(tmp_path_factory):
    root = tmp_path_factory.mktemp("checkpoints")
    tokenizer = build_tokenizer()

    nli_dir = root / "nli"
    torch.manual_seed(SEED)
    nli = BertForSequenceClassification(
        small_config(
            num_labels=3,
            id2label={0: "CONTRADICTION", 1: "NEUTRAL", 2: "ENTAILMENT"},
            label2id={"CONTRADICTION": 0, "NEUTRAL": 1, "ENTAILMENT": 2},
        )
    )
    nli.save_pretrained(nli_dir)
    tokenizer.save_pretrained(nli_dir)

    embed_dir = root / "embed"
    torch.manual_seed(SEED + 1)
    BertModel(small_config()).save_pretrained(embed_dir)
    tokenizer.save_pretrained(embed_dir)

    # default LABEL_0.. names, unmappable on purpose
    unmapped_dir = root / "unmapped"
    torch.manual_seed(SEED + 2)
    BertForSequenceClassification(small_config(num_labels=3)).save_pretrained(unmapped_dir)
    tokenizer.save_pretrained(unmapped_dir)

    return SimpleNamespace(nli=str(nli_dir), embed=str(embed_dir), unmapped=str(unmapped_dir))


@pytest.fixture(scope="session")
def nli_scorer(checkpoints):
    return NliScorer(checkpoints.nli, batch_size=2)


@pytest.fixture(scope="session")
def recall_scorer(checkpoints):
    return RecallScorer(checkpoints.embed, batch_size=2)


@pytest.fixture(scope="session")
def app(nli_scorer, recall_scorer):
    return create_app(nli_scorer, recall_scorer)


@pytest.fixture(scope="session")
def client(app):
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="session")
def live_endpoint(app):
    """The same app served by uvicorn on an ephemeral local port."""
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 30
    while not server.started:
        if time.monotonic() > deadline or not thread.is_alive():
            raise RuntimeError("inference server did not start")
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)
