"""Sentence scoring and budgeted greedy selection.

Given a segmented document and a machine summary, each extraction method
assigns a relevance score to every document sentence, then packs sentences
into a token budget greedily by score. Selected sentences are always emitted
in document order, so the extract reads as a subsequence of the source.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .corpus import Document, GeneratedSummary
from .ngrams import normalize_tokens, rouge_combined, rouge_recall
from .semantic import ProviderError, ProviderResponseError
from .textproc import truncate_to_tokens

PRESET_BUDGETS = (128, 256, 512, 768, 1024, 1536, 2048, 4096)

METHOD_KINDS = ("lead", "rouge1", "rouge2", "rouge12", "bertscore", "nli")
LEAD_MODES = ("sentence_boundary", "token_exact")


@dataclass(frozen=True)
class Budget:
    max_tokens: int

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("budget must be >= 1 token")


@dataclass(frozen=True)
class ExtractionMethod:
    kind: str
    lead_mode: str = "sentence_boundary"

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ValueError(f"unknown extraction method {self.kind!r}")
        if self.lead_mode not in LEAD_MODES:
            raise ValueError(f"unknown lead mode {self.lead_mode!r}")

    @property
    def needs_provider(self) -> bool:
        return self.kind in ("bertscore", "nli")

    @property
    def name(self) -> str:
        return self.kind


@dataclass(frozen=True)
class ExtractedDocument:
    """A budgeted subsequence of a document's sentences.

    ``token_count`` is the sum of the selected sentences' token counts, the
    same unit the packing decisions were made in.
    """

    source_id: str
    sentence_indices: tuple[int, ...]
    text: str
    token_count: int
    method: ExtractionMethod
    budget: Budget
    sentence_scores: dict[int, float] = field(default_factory=dict)


def _require_annotated(doc: Document):
    if not doc.sentences:
        raise ValueError(f"document {doc.id!r} is not segmented; annotate it first")


def extract_lead(
    doc: Document, budget: Budget, mode: str = "sentence_boundary", counter=None
) -> ExtractedDocument:
    """Take the document prefix that fits the budget.

    sentence_boundary keeps whole leading sentences. If even the first
    sentence exceeds the budget it degrades to a hard token cut of that
    sentence. token_exact cuts after exactly the budgeted number of tokens.
    """
    _require_annotated(doc)
    if counter is None:
        raise ValueError("lead extraction needs a token counter")
    method = ExtractionMethod("lead", mode)
    n = budget.max_tokens

    if mode == "sentence_boundary":
        indices = []
        total = 0
        for s in doc.sentences:
            if total + s.token_count > n:
                break
            indices.append(s.index)
            total += s.token_count
        if indices:
            text = " ".join(doc.sentences[i].text for i in indices)
            return ExtractedDocument(
                source_id=doc.id,
                sentence_indices=tuple(indices),
                text=text,
                token_count=total,
                method=method,
                budget=budget,
            )
        # first sentence alone exceeds the budget: hard-truncate it
        text = truncate_to_tokens(doc.sentences[0].text, n, counter)
        return ExtractedDocument(
            source_id=doc.id,
            sentence_indices=(0,),
            text=text,
            token_count=counter.count(text),
            method=method,
            budget=budget,
        )

    full = " ".join(s.text for s in doc.sentences)
    text = truncate_to_tokens(full, n, counter)
    token_count = counter.count(text)
    indices = []
    covered = 0
    for s in doc.sentences:
        if covered >= token_count:
            break
        indices.append(s.index)
        covered += s.token_count
    return ExtractedDocument(
        source_id=doc.id,
        sentence_indices=tuple(indices),
        text=text,
        token_count=token_count,
        method=method,
        budget=budget,
    )


def _map_indexed(fn, items, max_parallel: int) -> list:
    """Apply fn over items, optionally threaded, preserving order."""
    if max_parallel <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_parallel) as pool:
        return list(pool.map(fn, items))


def score_sentences(
    doc: Document,
    summary: GeneratedSummary,
    method: ExtractionMethod,
    provider=None,
) -> dict[int, float]:
    """Score every document sentence for relevance to the summary."""
    _require_annotated(doc)
    if method.kind == "lead":
        raise ValueError("lead does not score sentences")
    if method.needs_provider and provider is None:
        raise ValueError(f"method {method.kind!r} needs a semantic provider")

    if method.kind in ("rouge1", "rouge2", "rouge12"):
        summary_tokens = normalize_tokens(summary.text)
        scores = {}
        for s in doc.sentences:
            tokens = normalize_tokens(s.text)
            if method.kind == "rouge1":
                scores[s.index] = rouge_recall(tokens, summary_tokens, 1)
            elif method.kind == "rouge2":
                scores[s.index] = rouge_recall(tokens, summary_tokens, 2)
            else:
                scores[s.index] = rouge_combined(tokens, summary_tokens)
        return scores

    if method.kind == "bertscore":
        def recall_of(sentence):
            try:
                value = provider.bertscore_recall(sentence.text, summary.text)
            except ProviderError as exc:
                raise type(exc)(f"sentence {sentence.index}: {exc}") from exc
            if not 0.0 <= value <= 1.0:
                raise ProviderResponseError(
                    f"sentence {sentence.index}: recall {value} outside [0, 1]"
                )
            return value

        values = _map_indexed(recall_of, doc.sentences, getattr(provider, "max_parallel", 1))
        return {s.index: v for s, v in zip(doc.sentences, values)}

    # nli: a sentence is informative if some summary sentence is decisively
    # entailed or contradicted by it
    if not summary.sentences:
        raise ValueError("summary is not segmented; annotate it first")

    def nli_of(sentence):
        best = 0.0
        for premise in summary.sentences:
            try:
                probs = provider.nli(premise.text, sentence.text)
            except ProviderError as exc:
                raise type(exc)(f"sentence {sentence.index}: {exc}") from exc
            best = max(best, probs.entail + probs.contradict)
        return best

    values = _map_indexed(nli_of, doc.sentences, getattr(provider, "max_parallel", 1))
    return {s.index: v for s, v in zip(doc.sentences, values)}


def pack_by_score(
    doc: Document, scores: dict[int, float], budget: Budget, method: ExtractionMethod
) -> ExtractedDocument:
    """Greedy selection: visit by descending score (ties to the earlier
    sentence), keep whatever still fits the remaining budget, then restore
    document order."""
    _require_annotated(doc)
    missing = [s.index for s in doc.sentences if s.index not in scores]
    if missing:
        raise ValueError(f"no score for sentence indices {missing}")

    remaining = budget.max_tokens
    chosen = []
    for s in sorted(doc.sentences, key=lambda s: (-scores[s.index], s.index)):
        if s.token_count <= remaining:
            chosen.append(s.index)
            remaining -= s.token_count
    chosen.sort()
    text = " ".join(doc.sentences[i].text for i in chosen)
    return ExtractedDocument(
        source_id=doc.id,
        sentence_indices=tuple(chosen),
        text=text,
        token_count=budget.max_tokens - remaining,
        method=method,
        budget=budget,
        sentence_scores=dict(scores),
    )


def extract(
    doc: Document,
    summary: GeneratedSummary | None,
    method: ExtractionMethod,
    budget: Budget,
    counter,
    provider=None,
) -> ExtractedDocument:
    """Run one extraction method against one document under a budget."""
    if method.kind == "lead":
        return extract_lead(doc, budget, method.lead_mode, counter)
    if summary is None:
        raise ValueError(f"method {method.kind!r} needs the summary to score against")
    scores = score_sentences(doc, summary, method, provider)
    return pack_by_score(doc, scores, budget, method)
