"""Command-line pipeline: fixtures, extract, judge, sweep, report.

Exit codes: 0 success, 1 partial results (some instances failed or cells are
missing), 2 configuration error. Every command captures its resolved options
next to its output so a run can be replayed from the capture alone.
"""

from __future__ import annotations

import json
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import metaeval
from .extraction import (
    LEAD_MODES,
    METHOD_KINDS,
    PRESET_BUDGETS,
    Budget,
    ExtractionMethod,
    extract,
)
from .judge import (
    CRITERIA,
    HttpChatClient,
    JudgeConfig,
    MissingApiKeyError,
    MockJudgeClient,
    VerdictCache,
    assemble_prompt,
    cost_of,
    get_criterion,
    judge as judge_one,
    prompt_digest,
)
from .semantic import make_provider
from .textproc import BpeCounter, WhitespaceCounter, annotate_corpus, count_tokens

DEFAULT_BUDGETS = PRESET_BUDGETS


def _apply_config_file(ctx: click.Context, config_path: str | None) -> None:
    """Fill parameters from a JSON config file; explicit flags win."""
    if not config_path:
        return
    try:
        with open(config_path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config file: {exc}")
    if not isinstance(data, dict):
        raise click.UsageError("config file must hold a JSON object")
    for key, value in data.items():
        name = key.replace("-", "_")
        if name in ("config", "command"):
            continue  # captures carry these; they are not parameters
        if name not in ctx.params:
            raise click.UsageError(f"unknown config key {key!r}")
        source = ctx.get_parameter_source(name)
        if source is not None and source.name == "COMMANDLINE":
            continue
        if isinstance(ctx.params[name], tuple) and isinstance(value, list):
            value = tuple(value)
        ctx.params[name] = value


def _capture_config(params: dict, command: str, out_path: Path) -> None:
    payload = {"command": command}
    for key, value in sorted(params.items()):
        if key == "config":
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, Decimal):
            value = str(value)
        elif isinstance(value, tuple):
            value = list(value)
        payload[key] = value
    out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _make_counter(tokenizer: str, bpe_merges: str | None):
    if tokenizer == "whitespace":
        return WhitespaceCounter()
    if not bpe_merges:
        raise click.UsageError("--tokenizer bpe needs --bpe-merges")
    return BpeCounter(bpe_merges)


def _make_judge_client(endpoint: str, noise: int, seed: int):
    if endpoint == "mock":
        return MockJudgeClient(noise=noise, seed=seed)
    try:
        return HttpChatClient(endpoint)
    except MissingApiKeyError as exc:
        raise click.UsageError(str(exc))


def _judge_config(model, context_limit, completion_reserve, temperature, n, price) -> JudgeConfig:
    try:
        return JudgeConfig(
            model=model,
            context_limit=context_limit,
            completion_reserve=completion_reserve,
            temperature=temperature,
            n=n,
            price_per_1k_input=Decimal(str(price)),
        )
    except (ValueError, InvalidOperation) as exc:
        raise click.UsageError(str(exc))


def _load(corpus_path: str):
    try:
        return corpus_mod.load_corpus(corpus_path)
    except corpus_mod.CorpusError as exc:
        raise click.UsageError(str(exc))


@click.group()
def main():
    """Budget-aware evaluation of machine summaries against long documents."""


@main.command()
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--docs", "n_docs", default=5, show_default=True, type=int)
@click.option("--levels", default=3, show_default=True, type=int, help="Corruption levels per document.")
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def fixtures(ctx, seed, n_docs, levels, out, config):
    """Write a deterministic synthetic corpus as JSONL."""
    _apply_config_file(ctx, config)
    seed, n_docs, levels, out = ctx.params["seed"], ctx.params["n_docs"], ctx.params["levels"], Path(ctx.params["out"])
    try:
        instances = corpus_mod.generate_synthetic_corpus(seed, n_docs, levels)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    out.parent.mkdir(parents=True, exist_ok=True)
    corpus_mod.write_corpus(instances, out)
    _capture_config(ctx.params, "fixtures", out.with_suffix(out.suffix + ".config.json"))
    click.echo(f"wrote {len(instances)} instances to {out}")


@main.command(name="extract")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", default="rouge1", show_default=True, type=click.Choice(METHOD_KINDS))
@click.option("--budget", default=512, show_default=True, type=int)
@click.option("--lead-mode", default="sentence_boundary", show_default=True, type=click.Choice(LEAD_MODES))
@click.option("--tokenizer", default="whitespace", show_default=True, type=click.Choice(["whitespace", "bpe"]))
@click.option("--bpe-merges", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--provider", default="mock", show_default=True, help="Semantic scorer endpoint or 'mock'.")
@click.option("--provider-timeout", default=30.0, show_default=True, type=float)
@click.option("--max-parallel", default=4, show_default=True, type=int, help="In-flight provider requests.")
@click.option("--with-scores", is_flag=True, help="Include per-sentence scores in the output.")
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def extract_cmd(ctx, corpus_path, method, budget, lead_mode, tokenizer, bpe_merges, provider,
                provider_timeout, max_parallel, with_scores, out, config):
    """Extract a budgeted sentence subset for every corpus instance."""
    _apply_config_file(ctx, config)
    p = ctx.params
    instances = _load(p["corpus_path"])
    counter = _make_counter(p["tokenizer"], p["bpe_merges"])
    try:
        budget_obj = Budget(p["budget"])
        method_obj = ExtractionMethod(p["method"], p["lead_mode"])
    except ValueError as exc:
        raise click.UsageError(str(exc))
    provider_obj = None
    if method_obj.needs_provider:
        provider_obj = make_provider(
            p["provider"], timeout=p["provider_timeout"], max_parallel=p["max_parallel"]
        )
    annotate_corpus(instances, counter)

    out_path = Path(p["out"])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    failures = []
    written = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for inst in instances:
            try:
                ext = extract(inst.document, inst.summary, method_obj, budget_obj, counter, provider_obj)
            except Exception as exc:
                failures.append((inst.id, str(exc)))
                continue
            row = {
                "id": inst.id,
                "method": method_obj.kind,
                "budget": budget_obj.max_tokens,
                "sentence_indices": list(ext.sentence_indices),
                "token_count": ext.token_count,
                "text": ext.text,
            }
            if p["with_scores"]:
                row["sentence_scores"] = {str(k): v for k, v in sorted(ext.sentence_scores.items())}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
            written += 1
    _capture_config(ctx.params, "extract", out_path.with_suffix(out_path.suffix + ".config.json"))
    for inst_id, message in failures:
        click.echo(f"failed {inst_id}: {message}", err=True)
    click.echo(f"wrote {written} extractions to {out_path}")
    if failures:
        if written == 0:
            raise click.ClickException("all instances failed")
        sys.exit(1)


def _judge_options(fn):
    fn = click.option("--judge-endpoint", default="mock", show_default=True,
                      help="OpenAI-compatible base URL or 'mock'.")(fn)
    fn = click.option("--model", default="gpt-4", show_default=True)(fn)
    fn = click.option("--context-limit", default=8192, show_default=True, type=int)(fn)
    fn = click.option("--completion-reserve", default=16, show_default=True, type=int)(fn)
    fn = click.option("--temperature", default=0.0, show_default=True, type=float)(fn)
    fn = click.option("--n-samples", "n_samples", default=1, show_default=True, type=int)(fn)
    fn = click.option("--price-per-1k", default="0.03", show_default=True,
                      help="Input token price in dollars per 1000 tokens.")(fn)
    fn = click.option("--cache-dir", type=click.Path(file_okay=False), default=None)(fn)
    fn = click.option("--mock-noise", default=0, show_default=True, type=int,
                      help="Jitter for the mock judge.")(fn)
    fn = click.option("--mock-seed", default=0, show_default=True, type=int)(fn)
    fn = click.option("--parallel", default=1, show_default=True, type=int,
                      help="Concurrent judge requests.")(fn)
    return fn


@main.command(name="judge")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", default="full", show_default=True,
              type=click.Choice(("full",) + METHOD_KINDS))
@click.option("--budget", default=512, show_default=True, type=int)
@click.option("--lead-mode", default="sentence_boundary", show_default=True, type=click.Choice(LEAD_MODES))
@click.option("--criterion", "criteria", multiple=True, default=("consistency",),
              show_default=True, type=click.Choice(sorted(CRITERIA)))
@click.option("--tokenizer", default="whitespace", show_default=True, type=click.Choice(["whitespace", "bpe"]))
@click.option("--bpe-merges", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--provider", default="mock", show_default=True)
@click.option("--include-references", is_flag=True, help="Keep human-written reference rows.")
@click.option("--max-spend", default=None, help="Refuse to dispatch if the projected cost exceeds this.")
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@_judge_options
@click.pass_context
def judge_cmd(ctx, **_kwargs):
    """Judge summaries with an LLM and record scores, tokens, and cost."""
    _apply_config_file(ctx, ctx.params["config"])
    p = ctx.params
    instances = metaeval.select_instances(_load(p["corpus_path"]), p["include_references"])
    if not instances:
        raise click.UsageError("no usable instances in corpus")
    counter = _make_counter(p["tokenizer"], p["bpe_merges"])
    config = _judge_config(p["model"], p["context_limit"], p["completion_reserve"],
                           p["temperature"], p["n_samples"], p["price_per_1k"])
    client = _make_judge_client(p["judge_endpoint"], p["mock_noise"], p["mock_seed"])
    cache = VerdictCache(p["cache_dir"]) if p["cache_dir"] else None
    annotate_corpus(instances, counter)

    method_obj = None
    budget_obj = None
    if p["method"] != "full":
        try:
            method_obj = ExtractionMethod(p["method"], p["lead_mode"])
            budget_obj = Budget(p["budget"])
        except ValueError as exc:
            raise click.UsageError(str(exc))
    provider_obj = make_provider("mock") if p["provider"] == "mock" else make_provider(p["provider"])

    # Assemble every prompt up front so spend can be projected before any
    # network call. Cached prompts do not count toward projected spend.
    articles = {}
    for inst in instances:
        if method_obj is None:
            articles[inst.id] = inst.document
        else:
            articles[inst.id] = extract(
                inst.document, inst.summary, method_obj, budget_obj, counter, provider_obj
            )

    jobs = []
    projected = Decimal("0")
    for inst in instances:
        for name in p["criteria"]:
            criterion = get_criterion(name)
            prompt = assemble_prompt(articles[inst.id].text, inst.summary.text, criterion, config, counter)
            digest = prompt_digest(config.model, config.temperature, prompt)
            is_cached = cache is not None and cache.get(digest) is not None
            if not is_cached:
                projected += cost_of(count_tokens(prompt, counter), config)
            jobs.append((inst, name))

    if p["max_spend"] is not None:
        try:
            cap = Decimal(str(p["max_spend"]))
        except InvalidOperation:
            raise click.UsageError(f"bad --max-spend value {p['max_spend']!r}")
        if projected > cap:
            raise click.ClickException(
                f"projected cost ${projected} exceeds --max-spend ${cap}; nothing dispatched"
            )

    out_path = Path(p["out"])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    total = Decimal("0")
    failures = []
    written = 0
    cap = Decimal(str(p["max_spend"])) if p["max_spend"] is not None else None
    with open(out_path, "w", encoding="utf-8") as fh:
        for inst, name in jobs:
            if cap is not None and total > cap:
                failures.append((inst.id, "spend cap reached, skipped"))
                continue
            try:
                verdict = judge_one(
                    articles[inst.id], inst.summary, name, config, client, counter, cache
                )
            except Exception as exc:
                failures.append((inst.id, str(exc)))
                continue
            total += Decimal("0") if verdict.cached else verdict.cost
            row = {
                "id": inst.id,
                "criterion": name,
                "method": p["method"],
                "budget": None if method_obj is None else budget_obj.max_tokens,
                "score": verdict.score,
                "prompt_tokens": verdict.prompt_tokens,
                "cost": str(verdict.cost),
                "prompt_hash": verdict.prompt_hash,
                "cached": verdict.cached,
                "model": config.model,
                "raw_response": verdict.raw_response,
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
            written += 1
            click.echo(f"{inst.id} {name}: score={verdict.score} cost=${verdict.cost} total=${total}")
    _capture_config(ctx.params, "judge", out_path.with_suffix(out_path.suffix + ".config.json"))
    click.echo(f"wrote {written} verdicts to {out_path}; spent ${total}")
    if failures:
        for inst_id, message in failures:
            click.echo(f"failed {inst_id}: {message}", err=True)
        if written == 0:
            raise click.ClickException("all judge calls failed")
        sys.exit(1)


@main.command(name="sweep")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", "methods", multiple=True, default=METHOD_KINDS, show_default=True,
              type=click.Choice(METHOD_KINDS))
@click.option("--budget", "budgets", multiple=True, default=DEFAULT_BUDGETS, show_default=True, type=int)
@click.option("--criterion", "criteria", multiple=True, default=tuple(sorted(CRITERIA)),
              show_default=True, type=click.Choice(sorted(CRITERIA)))
@click.option("--tokenizer", default="whitespace", show_default=True, type=click.Choice(["whitespace", "bpe"]))
@click.option("--bpe-merges", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--provider", default="mock", show_default=True)
@click.option("--include-references", is_flag=True)
@click.option("--selector", default="pearson", show_default=True, type=click.Choice(["pearson", "spearman"]))
@click.option("--skip-full-document", is_flag=True, help="Skip the no-extraction baseline cell.")
@click.option("--bins", default=20, show_default=True, type=int, help="Position histogram bins.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@_judge_options
@click.pass_context
def sweep_cmd(ctx, **_kwargs):
    """Run the full method x budget grid and write correlation reports."""
    _apply_config_file(ctx, ctx.params["config"])
    p = ctx.params
    instances = _load(p["corpus_path"])
    counter = _make_counter(p["tokenizer"], p["bpe_merges"])
    config = _judge_config(p["model"], p["context_limit"], p["completion_reserve"],
                           p["temperature"], p["n_samples"], p["price_per_1k"])
    client = _make_judge_client(p["judge_endpoint"], p["mock_noise"], p["mock_seed"])
    cache = VerdictCache(p["cache_dir"]) if p["cache_dir"] else None
    provider_obj = make_provider("mock") if p["provider"] == "mock" else make_provider(p["provider"])

    try:
        report = metaeval.run_sweep(
            instances,
            methods=list(p["methods"]),
            budgets=[int(b) for b in p["budgets"]],
            criteria=list(p["criteria"]),
            judge_config=config,
            client=client,
            counter=counter,
            provider=provider_obj,
            cache=cache,
            include_references=p["include_references"],
            selector=p["selector"],
            parallel=p["parallel"],
            include_full_document=not p["skip_full_document"],
        )
    except (ValueError, metaeval.EvaluationError) as exc:
        raise click.ClickException(str(exc))

    out_dir = Path(p["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    metaeval.write_sweep_json(report, out_dir / "sweep.json")
    metaeval.write_sweep_csv(report, out_dir / "sweep.csv")
    docs = {inst.id: inst.document for inst in instances}
    metaeval.write_positions_csv(report, docs, out_dir / "positions.csv", bins=p["bins"])
    metaeval.write_lengths_csv(report, out_dir / "lengths.csv")
    _capture_config(ctx.params, "sweep", out_dir / "run_config.json")

    for name in report.criteria:
        click.echo(f"{name}: best={report.best[name]} pareto={report.pareto[name]}")
    click.echo(f"wrote reports to {out_dir}")


@main.command(name="report")
@click.option("--dir", "report_dir", required=True, type=click.Path(file_okay=False, exists=True))
@click.option("--method", "methods", multiple=True, help="Expected methods; missing cells are gaps.")
@click.option("--budget", "budgets", multiple=True, type=int, help="Expected budgets; missing cells are gaps.")
def report_cmd(report_dir, methods, budgets):
    """Render stored sweep results as tables, without recomputing."""
    path = Path(report_dir) / "sweep.json"
    if not path.exists():
        raise click.UsageError(f"no sweep.json under {report_dir}")
    data = metaeval.read_sweep_json(path)

    cells = {(c["method"], c["budget"]): c for c in data["cells"]}
    seen_methods = sorted({m for m, _ in cells})
    seen_budgets = sorted({b for _, b in cells})
    expect_methods = list(methods) or seen_methods
    expect_budgets = [int(b) for b in budgets] or seen_budgets

    gaps = [
        (m, b)
        for m in expect_methods
        for b in expect_budgets
        if (m, b) not in cells
    ]

    for criterion in data["criteria"]:
        click.echo(f"\ncriterion: {criterion} (selector: {data['selector']})")
        header = "method".ljust(12) + "".join(str(b).rjust(16) for b in expect_budgets)
        click.echo(header)
        for m in expect_methods:
            row = m.ljust(12)
            for b in expect_budgets:
                cell = cells.get((m, b))
                if cell is None:
                    row += "-".rjust(16)
                else:
                    res = cell["correlations"][criterion]
                    row += f"{res['pearson_r']:.3f}/{res['spearman_rho']:.3f}".rjust(16)
            click.echo(row)
        if data.get("full_document"):
            res = data["full_document"]["correlations"][criterion]
            click.echo(
                f"full document: r={res['pearson_r']:.3f} rho={res['spearman_rho']:.3f} "
                f"avg_cost=${data['full_document']['avg_cost']}"
            )
        click.echo(f"best: {data['best'].get(criterion)}  pareto: {data['pareto'].get(criterion)}")

    if gaps:
        click.echo("\nmissing cells:", err=True)
        for m, b in gaps:
            click.echo(f"  {m} @ {b}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
