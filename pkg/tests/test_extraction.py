from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extracteval.corpus import Document, GeneratedSummary, Sentence
from extracteval.extraction import (
    Budget,
    ExtractionMethod,
    extract,
    extract_lead,
    pack_by_score,
    score_sentences,
)
from extracteval.semantic import MockSemanticProvider
from extracteval.textproc import WhitespaceCounter, segment


def make_summary(text: str, counter, system_id: str = "sys") -> GeneratedSummary:
    summary = GeneratedSummary(system_id=system_id, text=text)
    summary.sentences = segment(text, counter=counter)
    return summary


def doc_with_counts(counts, doc_id="d0"):
    """Document whose sentence i has exactly counts[i] whitespace tokens."""
    sentences = []
    for i, n in enumerate(counts):
        words = [f"s{i}w{j}" for j in range(n)]
        words[-1] += "."
        sentences.append(Sentence(index=i, text=" ".join(words), token_count=n))
    doc = Document(id=doc_id, text=" ".join(s.text for s in sentences))
    doc.sentences = sentences
    return doc


class TestBudgetAndMethod:
    def test_budget_must_be_positive(self):
        with pytest.raises(ValueError):
            Budget(0)
        assert Budget(1).max_tokens == 1

    def test_method_validation(self):
        with pytest.raises(ValueError):
            ExtractionMethod("tfidf")
        with pytest.raises(ValueError):
            ExtractionMethod("lead", lead_mode="clause")
        assert ExtractionMethod("nli").needs_provider
        assert not ExtractionMethod("rouge1").needs_provider


class TestLead:
    def test_prefix_trace(self, counter):
        doc = doc_with_counts([50, 60, 40])
        got = extract_lead(doc, Budget(128), counter=counter)
        assert got.sentence_indices == (0, 1)
        assert got.token_count == 110
        assert got.text == doc.sentences[0].text + " " + doc.sentences[1].text

    def test_strict_prefix_never_skips(self, counter):
        # sentence 2 would fit the leftover budget but the prefix stops first
        doc = doc_with_counts([50, 60, 30])
        got = extract_lead(doc, Budget(90), counter=counter)
        assert got.sentence_indices == (0,)
        assert got.token_count == 50

    def test_oversized_first_sentence_hard_cut(self, counter):
        doc = doc_with_counts([10, 5])
        got = extract_lead(doc, Budget(4), counter=counter)
        assert got.sentence_indices == (0,)
        assert got.token_count == 4
        assert got.text == "s0w0 s0w1 s0w2 s0w3"

    def test_exact_fit(self, counter):
        doc = doc_with_counts([50, 60, 40])
        got = extract_lead(doc, Budget(150), counter=counter)
        assert got.sentence_indices == (0, 1, 2)
        assert got.token_count == 150

    def test_token_exact_mode(self, counter):
        doc = doc_with_counts([50, 60, 40])
        got = extract_lead(doc, Budget(128), mode="token_exact", counter=counter)
        assert got.token_count == 128
        assert counter.count(got.text) == 128
        assert got.sentence_indices == (0, 1, 2)
        assert doc.text.startswith(got.text)

    def test_token_exact_whole_document(self, counter):
        doc = doc_with_counts([5, 5])
        got = extract_lead(doc, Budget(100), mode="token_exact", counter=counter)
        assert got.text == doc.text
        assert got.token_count == 10

    def test_requires_counter_and_sentences(self, counter):
        doc = doc_with_counts([5])
        with pytest.raises(ValueError, match="counter"):
            extract_lead(doc, Budget(10))
        bare = Document(id="x", text="Some text here.")
        with pytest.raises(ValueError, match="segmented"):
            extract_lead(bare, Budget(10), counter=counter)


class TestPack:
    def test_greedy_trace(self):
        doc = doc_with_counts([60, 60, 60])
        scores = {0: 0.9, 1: 0.1, 2: 0.8}
        got = pack_by_score(doc, scores, Budget(128), ExtractionMethod("rouge1"))
        assert got.sentence_indices == (0, 2)
        assert got.token_count == 120
        assert got.text == doc.sentences[0].text + " " + doc.sentences[2].text
        assert got.sentence_scores == scores

    def test_tie_prefers_earlier_sentence(self):
        doc = doc_with_counts([60, 60, 60])
        got = pack_by_score(doc, {0: 0.5, 1: 0.5, 2: 0.5}, Budget(60), ExtractionMethod("rouge1"))
        assert got.sentence_indices == (0,)

    def test_skip_and_continue(self):
        doc = doc_with_counts([100, 60, 30])
        scores = {0: 0.9, 1: 0.8, 2: 0.7}
        got = pack_by_score(doc, scores, Budget(95), ExtractionMethod("rouge1"))
        assert got.sentence_indices == (1, 2)
        assert got.token_count == 90

    def test_output_in_document_order(self):
        doc = doc_with_counts([10, 10, 10])
        got = pack_by_score(doc, {0: 0.1, 1: 0.2, 2: 0.9}, Budget(30), ExtractionMethod("rouge1"))
        assert got.sentence_indices == (0, 1, 2)
        assert got.text == doc.text

    def test_missing_score_rejected(self):
        doc = doc_with_counts([10, 10])
        with pytest.raises(ValueError, match="indices \\[1\\]"):
            pack_by_score(doc, {0: 1.0}, Budget(10), ExtractionMethod("rouge1"))

    def test_uniform_scores_equal_lead_on_uniform_lengths(self, counter):
        doc = doc_with_counts([12] * 8)
        for budget in (1, 12, 30, 60, 96, 200):
            packed = pack_by_score(
                doc, {i: 1.0 for i in range(8)}, Budget(budget), ExtractionMethod("rouge1")
            )
            lead = extract_lead(doc, Budget(budget), counter=counter)
            if packed.sentence_indices:
                assert packed.sentence_indices == lead.sentence_indices
                assert packed.token_count == lead.token_count


class TestScoreSentences:
    def test_rouge1_scores(self, counter):
        doc = Document(id="d", text="The cat sat. Dogs bark loudly.")
        doc.sentences = [
            Sentence(0, "The cat sat.", 3),
            Sentence(1, "Dogs bark loudly.", 3),
        ]
        summary = make_summary("The cat sat.", counter)
        got = score_sentences(doc, summary, ExtractionMethod("rouge1"))
        assert got == {0: 1.0, 1: 0.0}

    def test_rouge2_and_combined(self, counter):
        doc = Document(id="d", text="The cat sat quietly. The dog sat.")
        doc.sentences = [
            Sentence(0, "The cat sat quietly.", 4),
            Sentence(1, "The dog sat.", 3),
        ]
        summary = make_summary("The cat sat.", counter)
        r2 = score_sentences(doc, summary, ExtractionMethod("rouge2"))
        assert r2[0] == 1.0
        assert r2[1] == 0.0
        both = score_sentences(doc, summary, ExtractionMethod("rouge12"))
        assert both[0] == 2.0
        assert both[1] == pytest.approx(2 / 3, abs=1e-12)

    def test_bertscore_uses_provider(self, counter):
        doc = Document(id="d", text="Alpha beta. Distinct words only.")
        doc.sentences = [
            Sentence(0, "Alpha beta.", 2),
            Sentence(1, "Distinct words only.", 3),
        ]
        summary = make_summary("Alpha gamma.", counter)
        got = score_sentences(doc, summary, ExtractionMethod("bertscore"), MockSemanticProvider())
        assert got[0] == pytest.approx(0.5, abs=1e-12)
        assert got[1] == 0.0

    def test_nli_max_over_summary_sentences(self, counter):
        doc = Document(id="d", text="Alpha gamma. Unrelated totally.")
        doc.sentences = [
            Sentence(0, "Alpha gamma.", 2),
            Sentence(1, "Unrelated totally.", 2),
        ]
        summary = make_summary("Alpha beta. Gamma delta alpha.", counter)
        got = score_sentences(doc, summary, ExtractionMethod("nli"), MockSemanticProvider())
        # premise "Alpha beta.": jaccard({alpha,gamma},{alpha,beta}) = 1/3
        # premise "Gamma delta alpha.": jaccard = 2/3; the max wins
        assert got[0] == pytest.approx(2 / 3, abs=1e-12)
        assert got[1] == 0.0

    def test_provider_required(self, counter):
        doc = doc_with_counts([3])
        summary = make_summary("Anything here.", counter)
        with pytest.raises(ValueError, match="provider"):
            score_sentences(doc, summary, ExtractionMethod("nli"))

    def test_lead_has_no_scores(self, counter):
        doc = doc_with_counts([3])
        summary = make_summary("Anything here.", counter)
        with pytest.raises(ValueError):
            score_sentences(doc, summary, ExtractionMethod("lead"))


class TestExtractDispatch:
    def test_lead_ignores_summary(self, counter):
        doc = doc_with_counts([5, 5])
        got = extract(doc, None, ExtractionMethod("lead"), Budget(5), counter)
        assert got.sentence_indices == (0,)

    def test_scored_methods_need_summary(self, counter):
        doc = doc_with_counts([5])
        with pytest.raises(ValueError, match="summary"):
            extract(doc, None, ExtractionMethod("rouge1"), Budget(5), counter)

    def test_end_to_end_rouge1(self, counter):
        doc = Document(id="d", text="The cat sat. Dogs bark. The cat ran.")
        doc.sentences = [
            Sentence(0, "The cat sat.", 3),
            Sentence(1, "Dogs bark.", 2),
            Sentence(2, "The cat ran.", 3),
        ]
        summary = make_summary("The cat sat down.", counter)
        got = extract(doc, summary, ExtractionMethod("rouge1"), Budget(3), counter)
        assert got.sentence_indices == (0,)
        assert got.method.kind == "rouge1"


counts_strategy = st.lists(st.integers(1, 20), min_size=1, max_size=12)


class TestBudgetSafetyProperties:
    @given(counts_strategy, st.integers(1, 80), st.randoms(use_true_random=False))
    @settings(max_examples=300)
    def test_pack_never_exceeds_budget(self, counts, budget, rng):
        doc = doc_with_counts(counts)
        scores = {i: rng.random() for i in range(len(counts))}
        got = pack_by_score(doc, scores, Budget(budget), ExtractionMethod("rouge1"))
        assert got.token_count <= budget
        assert list(got.sentence_indices) == sorted(set(got.sentence_indices))
        assert got.token_count == sum(counts[i] for i in got.sentence_indices)
        assert got.text == " ".join(doc.sentences[i].text for i in got.sentence_indices)

    @given(counts_strategy, st.integers(1, 80))
    @settings(max_examples=300)
    def test_lead_prefix_within_budget(self, counts, budget):
        counter = WhitespaceCounter()
        doc = doc_with_counts(counts)
        got = extract_lead(doc, Budget(budget), counter=counter)
        assert got.token_count <= budget
        if counts[0] <= budget:
            k = len(got.sentence_indices)
            assert got.sentence_indices == tuple(range(k))
            assert k >= 1

    @given(counts_strategy, st.integers(1, 80))
    @settings(max_examples=300)
    def test_token_exact_hits_min_of_budget_and_length(self, counts, budget):
        counter = WhitespaceCounter()
        doc = doc_with_counts(counts)
        got = extract_lead(doc, Budget(budget), mode="token_exact", counter=counter)
        assert got.token_count == min(budget, sum(counts))
        assert doc.text.startswith(got.text)
