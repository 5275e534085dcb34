"""Sentence segmentation and pluggable token counting.

Token counts drive every budget decision, so the counter is an explicit
object rather than a global. The whitespace counter is the hermetic default;
the BPE counter loads a GPT-2 style merge table for fidelity with byte-level
tokenizers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import regex

from .corpus import AnnotatedInstance, Sentence


class TokenizerError(Exception):
    """A token table could not be loaded or is corrupt."""


DEFAULT_ABBREVIATIONS = frozenset(
    {
        "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "St.", "Jr.", "Sr.",
        "Fig.", "No.", "vs.", "etc.", "e.g.", "i.e.", "al.", "Inc.", "Co.",
    }
)


@dataclass(frozen=True)
class SegmenterConfig:
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
    min_sentence_chars: int = 1

    def __post_init__(self):
        if self.min_sentence_chars < 1:
            raise ValueError("min_sentence_chars must be >= 1")


_TERMINAL_RUN = re.compile(r"[.!?]+")
_WORD_BEFORE = re.compile(r"\S+$")
_SENTENCE_OPENERS = "\"'“‘«"


def _boundary_positions(text: str, cfg: SegmenterConfig) -> list[int]:
    positions = []
    for m in _TERMINAL_RUN.finditer(text):
        end = m.end()
        if end >= len(text) or not text[end].isspace():
            continue
        rest = text[end:].lstrip()
        if not rest:
            continue
        ch = rest[0]
        if not (ch.isupper() or ch.isdigit() or ch in _SENTENCE_OPENERS):
            continue
        word = _WORD_BEFORE.search(text[:end])
        if "." in m.group() and word and word.group() in cfg.abbreviations:
            continue
        positions.append(end)
    return positions


def segment(text: str, config: SegmenterConfig | None = None, counter=None) -> list[Sentence]:
    """Split text into sentences at terminal punctuation.

    A boundary is a run of ``. ! ?`` followed by whitespace and an uppercase
    letter, digit, or opening quote, unless the preceding word is a known
    abbreviation. Sentence-internal whitespace is collapsed to single spaces.
    Text with no boundary comes back as a single sentence.
    """
    if not text or not text.strip():
        raise ValueError("cannot segment empty text")
    cfg = config or SegmenterConfig()

    pieces: list[str] = []
    start = 0
    for end in _boundary_positions(text, cfg):
        candidate = " ".join(text[start:end].split())
        if len(candidate) < cfg.min_sentence_chars:
            continue
        if candidate:
            pieces.append(candidate)
            start = end
    tail = " ".join(text[start:].split())
    if tail:
        pieces.append(tail)

    return [
        Sentence(index=i, text=p, token_count=counter.count(p) if counter else 0)
        for i, p in enumerate(pieces)
    ]


_NONSPACE_RUN = re.compile(r"\S+")


class WhitespaceCounter:
    """Counts maximal non-whitespace runs. No external state."""

    kind = "whitespace"

    def count(self, text: str) -> int:
        return len(_NONSPACE_RUN.findall(text))

    def truncate(self, text: str, limit: int) -> str:
        if limit <= 0:
            return ""
        spans = list(_NONSPACE_RUN.finditer(text))
        if len(spans) <= limit:
            return text
        return text[: spans[limit - 1].end()]


def _bytes_to_unicode() -> dict[int, str]:
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, map(chr, cs)))


class BpeCounter:
    """Byte-level BPE token counter over a rank-per-merge table.

    Reads the widely used two-column merges file (optionally with a
    ``#version`` header): line order is merge priority. Text is pre-split
    with the GPT-2 pattern, mapped byte-by-byte into printable symbols, then
    merged greedily by rank.
    """

    kind = "bpe"

    _PRETOKEN = regex.compile(
        r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""
    )

    def __init__(self, merges_path):
        self._ranks: dict[tuple[str, str], int] = {}
        try:
            with open(merges_path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise TokenizerError(f"cannot read merge table: {exc}") from exc
        if lines and lines[0].startswith("#version"):
            lines = lines[1:]
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            parts = line.split(" ")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise TokenizerError(f"corrupt merge table at line {i + 1}: {line!r}")
            self._ranks[(parts[0], parts[1])] = len(self._ranks)
        self._byte_map = _bytes_to_unicode()
        self._cache: dict[str, tuple[str, ...]] = {}

    def _merge(self, symbols: tuple[str, ...]) -> tuple[str, ...]:
        word = symbols
        while len(word) > 1:
            pairs = set(zip(word, word[1:]))
            best = min(pairs, key=lambda p: self._ranks.get(p, float("inf")))
            if best not in self._ranks:
                break
            first, second = best
            merged = []
            i = 0
            while i < len(word):
                if i < len(word) - 1 and word[i] == first and word[i + 1] == second:
                    merged.append(first + second)
                    i += 2
                else:
                    merged.append(word[i])
                    i += 1
            word = tuple(merged)
        return word

    def _encode_chunk(self, chunk: str) -> tuple[str, ...]:
        cached = self._cache.get(chunk)
        if cached is not None:
            return cached
        mapped = tuple(self._byte_map[b] for b in chunk.encode("utf-8"))
        tokens = self._merge(mapped)
        self._cache[chunk] = tokens
        return tokens

    def count(self, text: str) -> int:
        return sum(len(self._encode_chunk(c)) for c in self._PRETOKEN.findall(text))

    def truncate(self, text: str, limit: int) -> str:
        if limit <= 0:
            return ""
        pieces: list[str] = []
        for chunk in self._PRETOKEN.findall(text):
            pieces.extend(self._encode_chunk(chunk))
            if len(pieces) > limit:
                break
        if len(pieces) <= limit:
            return text
        data = text.encode("utf-8")
        n_tokens = limit
        while n_tokens > 0:
            # each mapped symbol character stands for exactly one byte
            n_bytes = sum(len(p) for p in pieces[:n_tokens])
            prefix = data[:n_bytes].decode("utf-8", errors="ignore")
            if self.count(prefix) <= limit:
                return prefix
            n_tokens -= 1
        return ""


def count_tokens(text: str, counter) -> int:
    return counter.count(text)


def truncate_to_tokens(text: str, limit: int, counter) -> str:
    """Longest prefix of text that ends on a token boundary within limit."""
    if limit < 0:
        raise ValueError("limit must be >= 0")
    return counter.truncate(text, limit)


def annotate(obj, counter, config: SegmenterConfig | None = None):
    """Populate .sentences on a document or summary if not already done."""
    if not obj.sentences:
        obj.sentences = segment(obj.text, config, counter=counter)
    return obj


def annotate_instance(inst: AnnotatedInstance, counter, config: SegmenterConfig | None = None):
    annotate(inst.document, counter, config)
    annotate(inst.summary, counter, config)
    if inst.reference is not None:
        annotate(inst.reference, counter, config)
    return inst


def annotate_corpus(instances, counter, config: SegmenterConfig | None = None):
    for inst in instances:
        annotate_instance(inst, counter, config)
    return instances
