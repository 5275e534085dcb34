"""Corpus data model: annotated instances, JSONL ingestion, synthetic fixtures.

A corpus is a list of instances, each pairing a source document with one
machine summary and at least one human quality score. Instances flagged
``is_human_written`` carry a reference summary in place of a machine one and
are excluded from meta-evaluation by default.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field

# criterion name -> (scale_min, scale_max)
CRITERION_SCALES: dict[str, tuple[int, int]] = {
    "consistency": (1, 5),
    "relevance": (1, 5),
    "faithfulness": (1, 7),
}

# Corruption markers embedded in synthetic summaries. The marker encodes the
# corruption level and the level count so downstream fixtures can recover the
# quality signal from the text alone.
MARKER_RE = re.compile(r"\bqq(\d+)of(\d+)qq\b")


class CorpusError(ValueError):
    """Malformed corpus input. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass
class Sentence:
    index: int
    text: str
    token_count: int = 0


@dataclass
class Document:
    id: str
    text: str
    sentences: list[Sentence] = field(default_factory=list)


@dataclass
class GeneratedSummary:
    system_id: str
    text: str
    sentences: list[Sentence] = field(default_factory=list)


@dataclass
class ReferenceSummary:
    text: str
    sentences: list[Sentence] = field(default_factory=list)


@dataclass
class AnnotatedInstance:
    document: Document
    summary: GeneratedSummary
    reference: ReferenceSummary | None = None
    human_scores: dict[str, float] = field(default_factory=dict)
    is_human_written: bool = False

    @property
    def id(self) -> str:
        return self.document.id


def _require(record: dict, key: str, line: int):
    if key not in record:
        raise CorpusError(f"missing required field {key!r}", line)
    return record[key]


def _validate_scores(scores, line: int) -> dict[str, float]:
    if not isinstance(scores, dict) or not scores:
        raise CorpusError("'scores' must be a non-empty object", line)
    out = {}
    for name, value in scores.items():
        if name not in CRITERION_SCALES:
            known = ", ".join(sorted(CRITERION_SCALES))
            raise CorpusError(f"unknown criterion {name!r} (known: {known})", line)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise CorpusError(f"score for {name!r} is not a number", line)
        lo, hi = CRITERION_SCALES[name]
        if not lo <= value <= hi:
            raise CorpusError(f"score {value} for {name!r} outside scale {lo}-{hi}", line)
        out[name] = float(value)
    return out


def load_corpus(path, format: str = "jsonl") -> list[AnnotatedInstance]:
    """Load an evaluation corpus.

    The only supported format is JSONL with one instance per line:
    ``{id, document, summary, system_id?, reference?, scores, is_human_written?}``.
    """
    if format != "jsonl":
        raise CorpusError(f"unsupported corpus format {format!r}")
    instances = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON: {exc.msg}", line_no) from exc
            if not isinstance(record, dict):
                raise CorpusError("record is not an object", line_no)

            instance_id = _require(record, "id", line_no)
            if not isinstance(instance_id, str) or not instance_id:
                raise CorpusError("'id' must be a non-empty string", line_no)
            document = _require(record, "document", line_no)
            if not isinstance(document, str) or not document.strip():
                raise CorpusError("'document' must be non-empty text", line_no)
            summary = _require(record, "summary", line_no)
            if not isinstance(summary, str) or not summary.strip():
                raise CorpusError("'summary' must be non-empty text", line_no)
            scores = _validate_scores(_require(record, "scores", line_no), line_no)

            reference = None
            if record.get("reference") is not None:
                ref_text = record["reference"]
                if not isinstance(ref_text, str) or not ref_text.strip():
                    raise CorpusError("'reference' must be non-empty text when present", line_no)
                reference = ReferenceSummary(text=ref_text)

            instances.append(
                AnnotatedInstance(
                    document=Document(id=instance_id, text=document),
                    summary=GeneratedSummary(
                        system_id=str(record.get("system_id", "unknown")), text=summary
                    ),
                    reference=reference,
                    human_scores=scores,
                    is_human_written=bool(record.get("is_human_written", False)),
                )
            )
    return instances


def write_corpus(instances: list[AnnotatedInstance], path) -> None:
    """Write instances as JSONL, the inverse of load_corpus."""
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            record = {
                "id": inst.document.id,
                "document": inst.document.text,
                "summary": inst.summary.text,
                "system_id": inst.summary.system_id,
            }
            if inst.reference is not None:
                record["reference"] = inst.reference.text
            record["scores"] = inst.human_scores
            if inst.is_human_written:
                record["is_human_written"] = True
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


_CONSONANTS = "bcdfglmnprstv"
_VOWELS = "aeiou"


def _vocabulary() -> list[str]:
    words = []
    for c1 in _CONSONANTS:
        for v1 in _VOWELS:
            for c2 in _CONSONANTS[:6]:
                words.append(c1 + v1 + c2 + "a")
    return words


def generate_synthetic_corpus(
    seed: int, n_docs: int, corruption_levels: int
) -> list[AnnotatedInstance]:
    """Build a deterministic corpus of corrupted summaries with proxy scores.

    Every document yields one instance per corruption level. Level 0 is the
    clean summary; level k replaces k steps' worth of summary tokens with
    out-of-vocabulary markers. Proxy human scores decrease strictly with the
    corruption level, so a scorer that recovers summary quality should
    correlate perfectly with them.
    """
    if n_docs < 1:
        raise ValueError("n_docs must be >= 1")
    if corruption_levels < 2:
        raise ValueError("corruption_levels must be >= 2")

    rng = random.Random(seed)
    vocab = _vocabulary()
    denom = corruption_levels - 1
    instances = []

    for d in range(n_docs):
        n_sent = rng.randint(10, 16)
        doc_sentences = []
        for _ in range(n_sent):
            words = rng.choices(vocab, k=rng.randint(7, 12))
            doc_sentences.append(words[0].capitalize() + " " + " ".join(words[1:]) + ".")
        doc_text = " ".join(doc_sentences)

        picked = sorted(rng.sample(range(n_sent), k=3))
        clean_summary = " ".join(doc_sentences[i] for i in picked)
        words = clean_summary.split()
        # only corrupt word positions that do not carry sentence punctuation
        replaceable = [i for i, w in enumerate(words) if not w.endswith(".")]
        step = max(1, len(replaceable) // (2 * denom))
        if step * denom > len(replaceable):
            raise ValueError("summaries too short for the requested corruption levels")
        order = rng.sample(replaceable, k=step * denom)

        for level in range(corruption_levels):
            corrupted = list(words)
            marker = f"qq{level}of{denom}qq"
            for pos in order[: level * step]:
                corrupted[pos] = marker
            q = level / denom
            scores = {
                name: hi - q * (hi - lo) for name, (lo, hi) in CRITERION_SCALES.items()
            }
            instances.append(
                AnnotatedInstance(
                    document=Document(id=f"doc{d:03d}-l{level}", text=doc_text),
                    summary=GeneratedSummary(
                        system_id=f"corruption-{level}", text=" ".join(corrupted)
                    ),
                    reference=ReferenceSummary(text=clean_summary),
                    human_scores=scores,
                )
            )
    return instances
