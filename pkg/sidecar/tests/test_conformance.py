"""Service-level contract checks, one verdict line each.

S1 drives the live server through the toolkit's own HTTP client, whose
response validation (schema, [0, 1] ranges, probability simplex, batch
shapes) is exactly what the in-process mock provider is held to. S2 runs
the extraction pipeline unmodified against the server and checks that the
packing invariants survive real model scores.
"""

from __future__ import annotations

import contextlib

import pytest

from extracteval.corpus import Document, GeneratedSummary
from extracteval.extraction import Budget, ExtractionMethod, extract, score_sentences
from extracteval.semantic import HttpSemanticProvider, MockSemanticProvider, NliProbs
from extracteval.textproc import WhitespaceCounter, annotate


@contextlib.contextmanager
def verdict(label: str):
    try:
        yield
    except BaseException:
        print(f"{label}: FAIL", flush=True)
        raise
    print(f"{label}: PASS", flush=True)


NLI_PAIRS = [
    ("the cat sat on the mat .", "a dog ran near the river ."),
    ("a small bird slept", "the old tree stood by the house"),
    ("the wind was quiet", "the wind was quiet"),
    ("", ""),
    ("unseen zebra words", "the cat sat"),
]

RECALL_PAIRS = [
    ("blue stone", "a red house"),
    ("the cat sat on the mat", "the cat sat on the mat"),
    ("a dog ran", "the quiet child walked near the river"),
    ("", "the cat"),
]

DOC_TEXT = (
    "The cat sat on the mat. A dog ran near the river. "
    "The old tree stood by the house. A small bird slept under the rug. "
    "The child walked near the stone. The wind was quiet and slow. "
    "A fish ate near the stone. The woman jumped by the tree."
)
SUMMARY_TEXT = "The cat sat on the mat. A dog ran near the river."


def test_s1_contract_conformance(live_endpoint):
    """Live responses pass the exact client-side validation the mock passes,
    and batch results line up with scalar results index by index."""
    with verdict("S1 wire contract (schema, ranges, simplex, batch order)"):
        provider = HttpSemanticProvider(live_endpoint, max_retries=0)
        mock = MockSemanticProvider()

        nli_singles = []
        for premise, hypothesis in NLI_PAIRS:
            probs = provider.nli(premise, hypothesis)
            # NliProbs construction enforces [0, 1] fields summing to 1 +- 1e-6
            assert isinstance(probs, NliProbs)
            assert isinstance(mock.nli(premise, hypothesis), NliProbs)
            nli_singles.append(probs)
        batch = provider.nli_batch(NLI_PAIRS)
        assert len(batch) == len(NLI_PAIRS)
        for got, want in zip(batch, nli_singles):
            assert got.entail == pytest.approx(want.entail, abs=1e-6)
            assert got.contradict == pytest.approx(want.contradict, abs=1e-6)
            assert got.neutral == pytest.approx(want.neutral, abs=1e-6)

        recall_singles = []
        for candidate, reference in RECALL_PAIRS:
            value = provider.bertscore_recall(candidate, reference)
            assert 0.0 <= value <= 1.0
            recall_singles.append(value)
        values = provider.bertscore_recall_batch(RECALL_PAIRS)
        assert values == pytest.approx(recall_singles, abs=1e-6)
        # the self-match pair sits at index 1; order mixups would move it
        assert max(range(len(values)), key=values.__getitem__) == 1
        assert values[1] >= 0.99


def test_s2_pipeline_swap_in(live_endpoint):
    """extract() runs unmodified against the live provider: budgets hold,
    indices stay strictly increasing, reruns are identical, and only the
    score values differ from the mock's."""
    with verdict("S2 pipeline swap-in (budget and ordering invariants live)"):
        counter = WhitespaceCounter()
        live = HttpSemanticProvider(live_endpoint, max_retries=0)
        mock = MockSemanticProvider()

        for kind in ("bertscore", "nli"):
            for max_tokens in (8, 16, 64):
                doc = annotate(Document(id="d0", text=DOC_TEXT), counter)
                summary = annotate(
                    GeneratedSummary(system_id="m0", text=SUMMARY_TEXT), counter
                )
                method = ExtractionMethod(kind)
                budget = Budget(max_tokens)
                got = extract(doc, summary, method, budget, counter, provider=live)
                assert got.token_count <= max_tokens
                indices = got.sentence_indices
                assert all(a < b for a, b in zip(indices, indices[1:]))
                again = extract(doc, summary, method, budget, counter, provider=live)
                assert (again.sentence_indices, again.text, again.token_count) == (
                    indices,
                    got.text,
                    got.token_count,
                )
                ref = extract(doc, summary, method, budget, counter, provider=mock)
                assert ref.token_count <= max_tokens
                assert all(
                    a < b for a, b in zip(ref.sentence_indices, ref.sentence_indices[1:])
                )

        # same machinery, different numbers: live scores are not the mock's
        doc = annotate(Document(id="d1", text=DOC_TEXT), counter)
        summary = annotate(GeneratedSummary(system_id="m0", text=SUMMARY_TEXT), counter)
        method = ExtractionMethod("bertscore")
        live_scores = score_sentences(doc, summary, method, provider=live)
        mock_scores = score_sentences(doc, summary, method, provider=mock)
        assert set(live_scores) == set(mock_scores)
        assert any(live_scores[i] != mock_scores[i] for i in live_scores)
