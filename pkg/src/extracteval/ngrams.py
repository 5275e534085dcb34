"""Clipped n-gram overlap metrics used for extraction scoring and baselines."""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

_PUNCT = string.punctuation


@dataclass(frozen=True)
class RougeScore:
    recall: float
    precision: float
    f1: float


def normalize_tokens(text: str) -> list[str]:
    """Whitespace-split, lowercase, strip edge punctuation, drop empty tokens."""
    out = []
    for tok in text.split():
        tok = tok.strip(_PUNCT).lower()
        if tok:
            out.append(tok)
    return out


def ngrams(tokens: Sequence[str], order: int) -> Counter:
    """Multiset of consecutive n-grams over an already normalized token list."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def _clipped_overlap(candidate: Counter, reference: Counter) -> int:
    return sum(min(count, candidate[gram]) for gram, count in reference.items())


def rouge_recall(candidate: Sequence[str], reference: Sequence[str], order: int) -> float:
    """Fraction of reference n-grams covered by the candidate, counts clipped."""
    ref = ngrams(reference, order)
    total = sum(ref.values())
    if total == 0:
        return 0.0
    return _clipped_overlap(ngrams(candidate, order), ref) / total


def rouge_combined(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Sum of unigram and bigram recall, in [0, 2]."""
    return rouge_recall(candidate, reference, 1) + rouge_recall(candidate, reference, 2)


def rouge_f1(candidate: Sequence[str], reference: Sequence[str], order: int) -> RougeScore:
    cand = ngrams(candidate, order)
    ref = ngrams(reference, order)
    overlap = _clipped_overlap(cand, ref)
    cand_total = sum(cand.values())
    ref_total = sum(ref.values())
    precision = overlap / cand_total if cand_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return RougeScore(recall=recall, precision=precision, f1=f1)
