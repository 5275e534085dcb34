"""Budget-aware evaluation of machine summaries against long documents.

The pipeline has three stages: extract an information-dense, token-budgeted
subset of the source document; judge the summary against that extract with an
LLM; correlate judge scores with human scores to pick the best method and
budget.
"""

from .corpus import (
    AnnotatedInstance,
    CorpusError,
    Document,
    GeneratedSummary,
    ReferenceSummary,
    Sentence,
    generate_synthetic_corpus,
    load_corpus,
    write_corpus,
)
from .extraction import (
    PRESET_BUDGETS,
    Budget,
    ExtractedDocument,
    ExtractionMethod,
    extract,
    extract_lead,
    pack_by_score,
    score_sentences,
)
from .judge import (
    CRITERIA,
    Criterion,
    JudgeConfig,
    JudgeVerdict,
    MockJudgeClient,
    VerdictCache,
    assemble_prompt,
    cost_of,
    judge,
    parse_score,
)
from .metaeval import (
    CorrelationResult,
    evaluate_corpus,
    length_distribution,
    pearson,
    position_distribution,
    rouge_baseline,
    run_sweep,
    spearman,
)
from .ngrams import RougeScore, normalize_tokens, rouge_combined, rouge_f1, rouge_recall
from .semantic import (
    HttpSemanticProvider,
    MockSemanticProvider,
    NliProbs,
    ProviderError,
    make_provider,
)
from .textproc import (
    BpeCounter,
    SegmenterConfig,
    WhitespaceCounter,
    annotate_corpus,
    count_tokens,
    segment,
    truncate_to_tokens,
)

__version__ = "0.1.0"
