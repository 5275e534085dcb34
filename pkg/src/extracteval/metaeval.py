"""Meta-evaluation: correlate judge scores with human scores across a grid
of extraction methods and token budgets, and report the winners.

The unit of comparison is a sweep cell, one (method, budget) pair. For each
cell every instance is extracted, judged per criterion, and the verdict
vector is correlated against the human vector. A full-document cell runs
alongside as the no-extraction baseline. Best is the top cell by correlation;
pareto is the top cell among budgets up to 1024 tokens, where judging is
substantially cheaper than full documents.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal

from .corpus import CRITERION_SCALES, AnnotatedInstance
from .extraction import Budget, ExtractedDocument, ExtractionMethod, extract
from .judge import JudgeConfig, JudgeVerdict, judge
from .ngrams import normalize_tokens, rouge_f1
from .textproc import annotate_instance


class ConstantInputError(ValueError):
    """Correlation is undefined when either vector has zero variance."""


def _check_pair(xs, ys):
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValueError("need at least 2 pairs")


def pearson(xs, ys) -> float:
    """Sample Pearson correlation."""
    _check_pair(xs, ys)
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantInputError("constant input has no defined correlation")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _average_ranks(values) -> list[float]:
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman(xs, ys) -> float:
    """Pearson correlation of average ranks; ties share their mean rank."""
    _check_pair(xs, ys)
    return pearson(_average_ranks(list(xs)), _average_ranks(list(ys)))


@dataclass(frozen=True)
class CorrelationResult:
    pearson_r: float
    spearman_rho: float
    n: int


def correlate(xs, ys) -> CorrelationResult:
    return CorrelationResult(pearson_r=pearson(xs, ys), spearman_rho=spearman(xs, ys), n=len(xs))


def nearest_rank(values, q: float):
    """Nearest-rank percentile: the ceil(q*n)-th smallest value."""
    if not values:
        raise ValueError("no values")
    if not 0 < q <= 1:
        raise ValueError("q must be in (0, 1]")
    ordered = sorted(values)
    rank = max(1, math.ceil(q * len(ordered)))
    return ordered[rank - 1]


@dataclass
class EvaluationRecord:
    instance_id: str
    verdict: JudgeVerdict
    extraction: ExtractedDocument | None
    article_tokens: int


@dataclass
class EvaluationRun:
    records: list[EvaluationRecord]
    failures: list[tuple[str, str]] = field(default_factory=list)


class EvaluationError(Exception):
    pass


def _document_tokens(inst: AnnotatedInstance) -> int:
    return sum(s.token_count for s in inst.document.sentences)


def select_instances(instances, include_references: bool = False):
    """Drop human-written reference rows unless explicitly included."""
    return [i for i in instances if include_references or not i.is_human_written]


def evaluate_corpus(
    instances,
    method: ExtractionMethod | None,
    budget: Budget | None,
    criterion: str,
    judge_config: JudgeConfig,
    *,
    client,
    counter,
    provider=None,
    cache=None,
    include_references: bool = False,
    parallel: int = 1,
    extractions: dict[str, ExtractedDocument] | None = None,
) -> EvaluationRun:
    """Extract (or not) and judge every usable instance on one criterion.

    ``extractions`` lets callers reuse already computed extracts keyed by
    instance id. Per-instance failures are collected, not raised, unless
    every instance fails.
    """
    selected = select_instances(instances, include_references)
    if not selected:
        raise EvaluationError("no usable instances (all human-written?)")
    if method is not None and budget is None:
        raise ValueError("a budget is required when a method is given")

    for inst in selected:
        annotate_instance(inst, counter)

    def run_one(inst: AnnotatedInstance) -> EvaluationRecord:
        if method is None:
            article = inst.document
            extraction = None
            article_tokens = _document_tokens(inst)
        elif extractions is not None and inst.id in extractions:
            extraction = extractions[inst.id]
            article = extraction
            article_tokens = extraction.token_count
        else:
            extraction = extract(inst.document, inst.summary, method, budget, counter, provider)
            if extractions is not None:
                extractions[inst.id] = extraction
            article = extraction
            article_tokens = extraction.token_count
        verdict = judge(article, inst.summary, criterion, judge_config, client, counter, cache)
        return EvaluationRecord(
            instance_id=inst.id,
            verdict=verdict,
            extraction=extraction,
            article_tokens=article_tokens,
        )

    records: list[EvaluationRecord] = []
    failures: list[tuple[str, str]] = []
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(lambda i: _attempt(run_one, i), selected))
    else:
        outcomes = [_attempt(run_one, i) for i in selected]
    for inst, outcome in zip(selected, outcomes):
        if isinstance(outcome, Exception):
            failures.append((inst.id, str(outcome)))
        else:
            records.append(outcome)

    if not records:
        details = "; ".join(f"{i}: {e}" for i, e in failures[:5])
        raise EvaluationError(f"all {len(failures)} instances failed ({details})")
    return EvaluationRun(records=records, failures=failures)


def _attempt(fn, item):
    try:
        return fn(item)
    except Exception as exc:  # collected per instance
        return exc


def rouge_baseline(instances, criterion: str, include_references: bool = False) -> CorrelationResult:
    """Unigram F1 between summary and reference, correlated with human scores."""
    selected = select_instances(instances, include_references)
    missing = [i.id for i in selected if i.reference is None]
    if missing:
        raise ValueError(f"instances without references: {missing[:5]}")
    f1s = []
    human = []
    for inst in selected:
        if criterion not in inst.human_scores:
            raise ValueError(f"instance {inst.id} has no human score for {criterion!r}")
        f1s.append(
            rouge_f1(
                normalize_tokens(inst.summary.text), normalize_tokens(inst.reference.text), 1
            ).f1
        )
        human.append(inst.human_scores[criterion])
    return correlate(f1s, human)


PARETO_BUDGET_CAP = 1024


@dataclass
class SweepCell:
    method: ExtractionMethod | None  # None marks the full-document baseline
    budget: Budget | None
    correlations: dict[str, CorrelationResult]
    avg_cost: Decimal
    total_cost: Decimal
    avg_extracted_tokens: float
    p25_extracted_tokens: float
    p75_extracted_tokens: float
    n_instances: int

    @property
    def method_name(self) -> str:
        return self.method.kind if self.method else "full"

    @property
    def budget_tokens(self) -> int | None:
        return self.budget.max_tokens if self.budget else None


@dataclass
class SweepReport:
    criteria: list[str]
    cells: list[SweepCell]
    full_document_cell: SweepCell | None
    best: dict[str, dict]
    pareto: dict[str, dict | None]
    selector: str
    extractions: dict[tuple[str, int], list[ExtractedDocument]] = field(default_factory=dict)


def _cell_stats(token_counts, verdicts, price: Decimal) -> dict:
    total_tokens = sum(v.prompt_tokens for v in verdicts)
    n = len(verdicts)
    return {
        "avg_cost": price * total_tokens / (1000 * n),
        "total_cost": sum((v.cost for v in verdicts), Decimal("0")),
        "avg_extracted_tokens": sum(token_counts) / len(token_counts),
        "p25_extracted_tokens": nearest_rank(token_counts, 0.25),
        "p75_extracted_tokens": nearest_rank(token_counts, 0.75),
        "n_instances": len(token_counts),
    }


def _selector_value(result: CorrelationResult, selector: str) -> float:
    return result.pearson_r if selector == "pearson" else result.spearman_rho


def select_best(cells, criterion: str, selector: str = "pearson") -> SweepCell | None:
    scored = [c for c in cells if criterion in c.correlations]
    if not scored:
        return None
    return max(scored, key=lambda c: _selector_value(c.correlations[criterion], selector))


def select_pareto(cells, criterion: str, selector: str = "pearson") -> SweepCell | None:
    capped = [c for c in cells if c.budget and c.budget.max_tokens <= PARETO_BUDGET_CAP]
    return select_best(capped, criterion, selector)


def run_sweep(
    instances,
    methods,
    budgets,
    criteria,
    judge_config: JudgeConfig,
    *,
    client,
    counter,
    provider=None,
    cache=None,
    include_references: bool = False,
    selector: str = "pearson",
    parallel: int = 1,
    include_full_document: bool = True,
) -> SweepReport:
    """Evaluate every method x budget cell and pick best/pareto per criterion."""
    if selector not in ("pearson", "spearman"):
        raise ValueError("selector must be 'pearson' or 'spearman'")
    methods = [ExtractionMethod(m) if isinstance(m, str) else m for m in methods]
    budgets = [Budget(b) if isinstance(b, int) else b for b in budgets]
    criteria = list(criteria)
    for name in criteria:
        if name not in CRITERION_SCALES:
            raise ValueError(f"unknown criterion {name!r}")

    selected = select_instances(instances, include_references)
    human: dict[str, list[float]] = {}
    for name in criteria:
        missing = [i.id for i in selected if name not in i.human_scores]
        if missing:
            raise ValueError(f"instances without a {name!r} score: {missing[:5]}")
        human[name] = [inst.human_scores[name] for inst in selected]

    cells: list[SweepCell] = []
    extractions_by_cell: dict[tuple[str, int], list[ExtractedDocument]] = {}
    price = judge_config.price_per_1k_input

    for method in methods:
        for budget in budgets:
            shared: dict[str, ExtractedDocument] = {}
            correlations: dict[str, CorrelationResult] = {}
            verdicts: list[JudgeVerdict] = []
            token_counts = None
            for name in criteria:
                run = evaluate_corpus(
                    selected,
                    method,
                    budget,
                    name,
                    judge_config,
                    client=client,
                    counter=counter,
                    provider=provider,
                    cache=cache,
                    include_references=include_references,
                    parallel=parallel,
                    extractions=shared,
                )
                if run.failures:
                    failed = ", ".join(i for i, _ in run.failures)
                    raise EvaluationError(
                        f"cell ({method.kind}, {budget.max_tokens}) had failures: {failed}"
                    )
                scores = [r.verdict.score for r in run.records]
                correlations[name] = correlate(scores, human[name])
                verdicts.extend(r.verdict for r in run.records)
                if token_counts is None:
                    token_counts = [r.article_tokens for r in run.records]
            stats = _cell_stats(token_counts, verdicts, price)
            cells.append(SweepCell(method=method, budget=budget, correlations=correlations, **stats))
            extractions_by_cell[(method.kind, budget.max_tokens)] = [
                shared[inst.id] for inst in selected if inst.id in shared
            ]

    full_cell = None
    if include_full_document:
        correlations = {}
        verdicts = []
        token_counts = None
        for name in criteria:
            run = evaluate_corpus(
                selected,
                None,
                None,
                name,
                judge_config,
                client=client,
                counter=counter,
                cache=cache,
                include_references=include_references,
                parallel=parallel,
            )
            if run.failures:
                failed = ", ".join(i for i, _ in run.failures)
                raise EvaluationError(f"full-document cell had failures: {failed}")
            scores = [r.verdict.score for r in run.records]
            correlations[name] = correlate(scores, human[name])
            verdicts.extend(r.verdict for r in run.records)
            if token_counts is None:
                token_counts = [r.article_tokens for r in run.records]
        stats = _cell_stats(token_counts, verdicts, price)
        full_cell = SweepCell(method=None, budget=None, correlations=correlations, **stats)

    best = {}
    pareto = {}
    for name in criteria:
        top = select_best(cells, name, selector)
        best[name] = {"method": top.method_name, "budget": top.budget_tokens} if top else None
        cheap = select_pareto(cells, name, selector)
        pareto[name] = (
            {"method": cheap.method_name, "budget": cheap.budget_tokens} if cheap else None
        )

    return SweepReport(
        criteria=criteria,
        cells=cells,
        full_document_cell=full_cell,
        best=best,
        pareto=pareto,
        selector=selector,
        extractions=extractions_by_cell,
    )


def position_distribution(extractions, docs, bins: int = 20) -> list[tuple[float, int]]:
    """Histogram of selected sentence positions, normalized by document length.

    Returns (bin lower edge, count) pairs covering [0, 1) in equal bins.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if hasattr(docs, "values"):
        doc_map = dict(docs)
    else:
        doc_map = {d.id: d for d in docs}
    counts = [0] * bins
    for ext in extractions:
        doc = doc_map.get(ext.source_id)
        if doc is None:
            raise ValueError(f"no document for extraction source {ext.source_id!r}")
        n_sent = len(doc.sentences)
        if n_sent == 0:
            raise ValueError(f"document {doc.id!r} is not segmented")
        for index in ext.sentence_indices:
            position = index / n_sent
            counts[min(bins - 1, int(position * bins))] += 1
    return [(i / bins, counts[i]) for i in range(bins)]


@dataclass(frozen=True)
class LengthStats:
    mean: float
    p25: float
    p75: float
    n: int


def length_distribution(extractions) -> dict[tuple[str, int], LengthStats]:
    """Per (method, budget) token-length stats with nearest-rank percentiles."""
    extractions = list(extractions)
    if not extractions:
        raise ValueError("no extractions")
    groups: dict[tuple[str, int], list[int]] = {}
    for ext in extractions:
        groups.setdefault((ext.method.kind, ext.budget.max_tokens), []).append(ext.token_count)
    return {
        key: LengthStats(
            mean=sum(values) / len(values),
            p25=nearest_rank(values, 0.25),
            p75=nearest_rank(values, 0.75),
            n=len(values),
        )
        for key, values in groups.items()
    }


def _cell_payload(cell: SweepCell) -> dict:
    return {
        "method": cell.method_name,
        "budget": cell.budget_tokens,
        "correlations": {
            name: {
                "pearson_r": res.pearson_r,
                "spearman_rho": res.spearman_rho,
                "n": res.n,
            }
            for name, res in cell.correlations.items()
        },
        "avg_cost": str(cell.avg_cost),
        "total_cost": str(cell.total_cost),
        "avg_extracted_tokens": cell.avg_extracted_tokens,
        "p25_extracted_tokens": cell.p25_extracted_tokens,
        "p75_extracted_tokens": cell.p75_extracted_tokens,
        "n_instances": cell.n_instances,
    }


def sweep_to_dict(report: SweepReport) -> dict:
    return {
        "criteria": report.criteria,
        "selector": report.selector,
        "cells": [_cell_payload(c) for c in report.cells],
        "full_document": _cell_payload(report.full_document_cell)
        if report.full_document_cell
        else None,
        "best": report.best,
        "pareto": report.pareto,
    }


def write_sweep_json(report: SweepReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(sweep_to_dict(report), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def read_sweep_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


_SWEEP_COLUMNS = [
    "method",
    "budget",
    "criterion",
    "pearson_r",
    "spearman_rho",
    "n",
    "avg_cost",
    "avg_extracted_tokens",
    "p25_extracted_tokens",
    "p75_extracted_tokens",
]


def write_sweep_csv(report: SweepReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SWEEP_COLUMNS)
        all_cells = list(report.cells)
        if report.full_document_cell:
            all_cells.append(report.full_document_cell)
        for cell in all_cells:
            for name in report.criteria:
                res = cell.correlations[name]
                writer.writerow(
                    [
                        cell.method_name,
                        "" if cell.budget_tokens is None else cell.budget_tokens,
                        name,
                        res.pearson_r,
                        res.spearman_rho,
                        res.n,
                        str(cell.avg_cost),
                        cell.avg_extracted_tokens,
                        cell.p25_extracted_tokens,
                        cell.p75_extracted_tokens,
                    ]
                )


def write_positions_csv(report: SweepReport, docs, path, bins: int = 20) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "budget", "bin_low", "bin_high", "count"])
        for (method, budget), extractions in sorted(report.extractions.items()):
            if not extractions:
                continue
            for low, count in position_distribution(extractions, docs, bins):
                writer.writerow([method, budget, low, low + 1.0 / bins, count])


def write_lengths_csv(report: SweepReport, path) -> None:
    all_extractions = [e for group in report.extractions.values() for e in group]
    if not all_extractions:
        return
    stats = length_distribution(all_extractions)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "budget", "mean", "p25", "p75", "n"])
        for (method, budget), s in sorted(stats.items()):
            writer.writerow([method, budget, s.mean, s.p25, s.p75, s.n])
