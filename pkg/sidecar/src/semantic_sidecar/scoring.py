"""Model-backed scorers: soft token recall and three-way entailment.

Each scorer loads one checkpoint, pins it to a device in eval mode, and
serves float64 scores. Forward passes run in fixed-size batches under a
lock so concurrent requests never interleave on the model.
"""

from __future__ import annotations

import math
import threading
from collections import Counter

import torch
from transformers import AutoModel, AutoModelForSequenceClassification, AutoTokenizer

WIRE_FIELDS = ("entail", "contradict", "neutral")

_LABEL_PREFIXES = (("entail", "entail"), ("contradict", "contra"), ("neutral", "neutral"))


class LabelMappingError(ValueError):
    """The checkpoint's label names cannot be matched to the wire fields."""


class OversizeTextError(ValueError):
    """An input does not fit the model's sequence limit."""

    def __init__(self, message: str, limit: int):
        super().__init__(message)
        self.limit = limit


def resolve_label_order(id2label) -> dict[str, int]:
    """Map each wire field to a logit index via the checkpoint's own labels.

    Matching is by case-insensitive prefix, so "ENTAILMENT", "entailed" and
    "contradiction" all resolve. Checkpoints permute label order freely;
    anything unmatched or ambiguous fails fast instead of guessing.
    """
    if len(id2label) != 3:
        raise LabelMappingError(f"expected 3 labels, checkpoint declares {len(id2label)}")
    order: dict[str, int] = {}
    for idx, label in id2label.items():
        name = str(label).strip().lower()
        for field, prefix in _LABEL_PREFIXES:
            if name.startswith(prefix):
                if field in order:
                    raise LabelMappingError(f"two labels map to {field!r} in {dict(id2label)}")
                order[field] = int(idx)
                break
    missing = [field for field in WIRE_FIELDS if field not in order]
    if missing:
        raise LabelMappingError(f"labels {dict(id2label)} leave {missing} unmapped")
    return order


class _ModelHost:
    def __init__(self, model_dir: str, loader, device: str = "cpu", batch_size: int = 8):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.tokenizer = AutoTokenizer.from_pretrained(model_dir)
        self.model = loader(model_dir).to(device).eval()
        self.device = device
        self.batch_size = batch_size
        # the fast tokenizer mutates shared state on every call, so the
        # lock must cover tokenization as well as the forward passes
        self._lock = threading.RLock()

    @property
    def max_tokens(self) -> int:
        """Longest sequence the model accepts, special tokens included."""
        declared = int(self.tokenizer.model_max_length)
        positions = getattr(self.model.config, "max_position_embeddings", declared)
        return min(declared, int(positions))

    def _content_ids(self, text: str) -> list[int]:
        return self.tokenizer.encode(text, add_special_tokens=False)


class NliScorer(_ModelHost):
    """Three-way premise/hypothesis classifier behind the nli endpoint."""

    def __init__(self, model_dir: str, device: str = "cpu", batch_size: int = 8):
        super().__init__(
            model_dir, AutoModelForSequenceClassification.from_pretrained, device, batch_size
        )
        self.label_order = resolve_label_order(self.model.config.id2label)

    def score(self, premises, hypotheses):
        """Score aligned premise/hypothesis lists.

        Returns (triples, warnings): a dict over the wire fields for every
        pair, and a warning string (or None) per pair. Oversized hypotheses
        are truncated to fit the model limit; a premise that leaves no room
        for a non-empty hypothesis is rejected outright.
        """
        limit = self.max_tokens
        rows: list[list[float]] = []
        with self._lock:
            overhead = self.tokenizer.num_special_tokens_to_add(pair=True)
            warnings: list[str | None] = []
            for i, (premise, hypothesis) in enumerate(zip(premises, hypotheses)):
                p_len = len(self._content_ids(premise))
                h_len = len(self._content_ids(hypothesis))
                room = limit - overhead - p_len
                if room < 0 or (room == 0 and h_len > 0):
                    raise OversizeTextError(
                        f"premise at index {i} is {p_len} tokens and leaves no room for a"
                        f" hypothesis; the model accepts at most {limit} tokens per pair",
                        limit,
                    )
                if h_len > room:
                    warnings.append(
                        f"hypothesis at index {i} truncated from {h_len} to {room} tokens"
                        f" to fit the model's {limit}-token limit"
                    )
                else:
                    warnings.append(None)

            with torch.inference_mode():
                for start in range(0, len(premises), self.batch_size):
                    enc = self.tokenizer(
                        list(premises[start : start + self.batch_size]),
                        list(hypotheses[start : start + self.batch_size]),
                        truncation="only_second",
                        max_length=limit,
                        padding=True,
                        return_tensors="pt",
                    ).to(self.device)
                    logits = self.model(**enc).logits.double()
                    rows.extend(torch.softmax(logits, dim=-1).tolist())
        triples = [
            {field: row[self.label_order[field]] for field in WIRE_FIELDS} for row in rows
        ]
        return triples, warnings


class RecallScorer(_ModelHost):
    """Soft unigram coverage of a reference by a candidate.

    Every reference token takes its best cosine match among the candidate's
    tokens; the score is the (optionally idf-weighted) mean of those
    matches, clamped to [0, 1]. Special tokens never participate. A text
    with no content tokens on either side scores 0.
    """

    def __init__(self, model_dir: str, device: str = "cpu", batch_size: int = 8):
        super().__init__(model_dir, AutoModel.from_pretrained, device, batch_size)

    def score(self, candidates, references, idf: bool = False) -> list[float]:
        limit = self.max_tokens
        with self._lock:
            overhead = self.tokenizer.num_special_tokens_to_add(pair=False)
            cand_ids = [self._content_ids(t) for t in candidates]
            ref_ids = [self._content_ids(t) for t in references]
            for role, groups in (("candidate", cand_ids), ("reference", ref_ids)):
                for i, ids in enumerate(groups):
                    if len(ids) + overhead > limit:
                        raise OversizeTextError(
                            f"{role} at index {i} is {len(ids) + overhead} tokens with"
                            f" special tokens; the model accepts at most {limit}",
                            limit,
                        )

            weights = self._reference_weights(ref_ids, idf)
            cand_emb = self._embeddings(candidates)
            ref_emb = self._embeddings(references)
        scores = []
        for cand, ref, w in zip(cand_emb, ref_emb, weights):
            if ref.shape[0] == 0 or cand.shape[0] == 0:
                scores.append(0.0)
                continue
            best = (ref @ cand.T).max(dim=1).values
            value = float((best * w).sum() / w.sum())
            scores.append(min(1.0, max(0.0, value)))
        return scores

    def _reference_weights(self, ref_ids, idf: bool) -> list[torch.Tensor]:
        """Per-token weights; rarity-weighted over the request's references.

        df counts how many references contain each token id. A single
        reference gives every token df = 1 and weight log(2/2) + 1 = 1, so
        scalar requests degrade to the plain mean exactly.
        """
        if not idf:
            return [torch.ones(len(ids), dtype=torch.float64) for ids in ref_ids]
        n = len(ref_ids)
        df: Counter = Counter()
        for ids in ref_ids:
            df.update(set(ids))
        return [
            torch.tensor(
                [math.log((1 + n) / (1 + df[i])) + 1.0 for i in ids], dtype=torch.float64
            )
            for ids in ref_ids
        ]

    def _embeddings(self, texts) -> list[torch.Tensor]:
        """Unit-normalized content-token vectors for each text."""
        out = []
        with self._lock, torch.inference_mode():
            for start in range(0, len(texts), self.batch_size):
                chunk = list(texts[start : start + self.batch_size])
                enc = self.tokenizer(
                    chunk, padding=True, return_tensors="pt", return_special_tokens_mask=True
                )
                special = enc.pop("special_tokens_mask").bool()
                enc = enc.to(self.device)
                hidden = self.model(**enc).last_hidden_state.double()
                keep = enc["attention_mask"].bool() & special.to(self.device).logical_not()
                for row in range(len(chunk)):
                    vectors = hidden[row][keep[row]]
                    out.append(torch.nn.functional.normalize(vectors, dim=-1))
        return out
