"""LLM judging: prompt assembly, score parsing, caching, and cost accounting.

A judge call renders one criterion template around an article (usually an
extract) and a summary, sends it as a single user message to an
OpenAI-compatible chat endpoint, and parses an integer score back. Costs are
tracked on input tokens only, in Decimal so that totals and averages are
exact. Prompts that would overflow the context window are shrunk by
truncating the article, never the summary or the instructions.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from decimal import Decimal
from importlib import resources
from pathlib import Path

import requests

from .corpus import CRITERION_SCALES, MARKER_RE
from .textproc import count_tokens, truncate_to_tokens


class JudgeError(Exception):
    """Base class for judging failures."""


class ScoreParseError(JudgeError):
    def __init__(self, message: str, raw_response: str):
        super().__init__(message)
        self.raw_response = raw_response


class PromptBudgetError(JudgeError):
    """Even an empty article cannot fit the prompt into the context limit."""


class MissingApiKeyError(JudgeError):
    pass


class JudgeTransportError(JudgeError):
    pass


@dataclass(frozen=True)
class Criterion:
    name: str
    scale_min: int
    scale_max: int
    template: str

    def __post_init__(self):
        if self.scale_min >= self.scale_max:
            raise ValueError("scale_min must be below scale_max")
        for placeholder in ("{{article}}", "{{summary}}"):
            if self.template.count(placeholder) != 1:
                raise ValueError(f"template must contain {placeholder} exactly once")
        if not self.template.endswith("# Evaluation Form (scores ONLY):"):
            raise ValueError("template must end with the score request line")


def _load_template(name: str) -> str:
    return (
        resources.files("extracteval")
        .joinpath("templates", f"{name}.txt")
        .read_text(encoding="utf-8")
    )


CRITERIA: dict[str, Criterion] = {
    name: Criterion(name, lo, hi, _load_template(name))
    for name, (lo, hi) in CRITERION_SCALES.items()
}


def get_criterion(name: str) -> Criterion:
    try:
        return CRITERIA[name]
    except KeyError:
        known = ", ".join(sorted(CRITERIA))
        raise ValueError(f"unknown criterion {name!r} (known: {known})") from None


@dataclass(frozen=True)
class JudgeConfig:
    model: str = "gpt-4"
    context_limit: int = 8192
    completion_reserve: int = 16
    temperature: float = 0.0
    n: int = 1
    price_per_1k_input: Decimal = Decimal("0.03")

    def __post_init__(self):
        if self.completion_reserve < 1:
            raise ValueError("completion_reserve must be >= 1")
        if self.context_limit <= self.completion_reserve:
            raise ValueError("context_limit must exceed completion_reserve")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not isinstance(self.price_per_1k_input, Decimal):
            object.__setattr__(self, "price_per_1k_input", Decimal(str(self.price_per_1k_input)))
        if self.price_per_1k_input < 0:
            raise ValueError("price_per_1k_input must be >= 0")


@dataclass(frozen=True)
class JudgeVerdict:
    score: int
    criterion: str
    prompt_tokens: int
    cost: Decimal
    raw_response: str
    prompt_hash: str
    cached: bool = False


def cost_of(prompt_tokens: int, config: JudgeConfig) -> Decimal:
    """Input-token cost: price per 1k tokens times thousands of tokens."""
    if prompt_tokens < 0:
        raise ValueError("prompt_tokens must be >= 0")
    return config.price_per_1k_input * prompt_tokens / 1000


def assemble_prompt(article: str, summary: str, criterion: Criterion, config: JudgeConfig, counter) -> str:
    """Render the criterion template, truncating the article to fit.

    The target is context_limit - completion_reserve tokens for the whole
    prompt. Only the article is ever cut, at token boundaries, keeping the
    longest prefix that fits.
    """
    limit = config.context_limit - config.completion_reserve

    def build(article_text: str) -> str:
        return criterion.template.replace("{{article}}", article_text).replace(
            "{{summary}}", summary
        )

    prompt = build(article)
    if count_tokens(prompt, counter) <= limit:
        return prompt
    if count_tokens(build(""), counter) > limit:
        raise PromptBudgetError(
            f"prompt exceeds {limit} tokens even with an empty article"
        )

    lo, hi = 0, count_tokens(article, counter)
    best = build("")
    while lo <= hi:
        mid = (lo + hi) // 2
        candidate = build(truncate_to_tokens(article, mid, counter))
        if count_tokens(candidate, counter) <= limit:
            best = candidate
            lo = mid + 1
        else:
            hi = mid - 1
    return best


_INT_RE = re.compile(r"-?\d+")


def parse_score(raw: str, criterion: Criterion, strict: bool = False) -> int:
    """Read the first integer in a judge reply and check it against the scale.

    strict mode requires the reply to be a bare integer, nothing else.
    """
    if strict:
        if not _INT_RE.fullmatch(raw.strip()):
            raise ScoreParseError(f"reply is not a bare integer: {raw!r}", raw)
        value = int(raw.strip())
    else:
        m = _INT_RE.search(raw)
        if m is None:
            raise ScoreParseError(f"no integer in judge reply: {raw!r}", raw)
        value = int(m.group())
    if not criterion.scale_min <= value <= criterion.scale_max:
        raise ScoreParseError(
            f"score {value} outside scale {criterion.scale_min}-{criterion.scale_max}", raw
        )
    return value


def prompt_digest(model: str, temperature: float, prompt: str) -> str:
    key = f"{model}\x00{temperature!r}\x00{prompt}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()


class VerdictCache:
    """Content-addressed on-disk verdict store.

    One JSON file per (model, temperature, prompt) digest. Writes go through
    a temp file and rename, and each key takes a process-local lock, so
    concurrent readers see either nothing or a complete record.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, digest: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(digest, threading.Lock())

    def _path(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def get(self, digest: str) -> JudgeVerdict | None:
        path = self._path(digest)
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError):
            return None  # unreadable entries are treated as misses
        try:
            return JudgeVerdict(
                score=record["score"],
                criterion=record["criterion"],
                prompt_tokens=record["prompt_tokens"],
                cost=Decimal(record["cost"]),
                raw_response=record["raw_response"],
                prompt_hash=record["prompt_hash"],
                cached=True,
            )
        except (KeyError, TypeError, ArithmeticError):
            return None

    def put(self, verdict: JudgeVerdict) -> None:
        digest = verdict.prompt_hash
        record = {
            "score": verdict.score,
            "criterion": verdict.criterion,
            "prompt_tokens": verdict.prompt_tokens,
            "cost": str(verdict.cost),
            "raw_response": verdict.raw_response,
            "prompt_hash": verdict.prompt_hash,
        }
        payload = json.dumps(record, ensure_ascii=False, sort_keys=True)
        path = self._path(digest)
        tmp = path.with_suffix(".tmp")
        with self._lock_for(digest):
            tmp.write_text(payload, encoding="utf-8")
            os.replace(tmp, path)


class HttpChatClient:
    """Minimal OpenAI-compatible chat completions client."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 120.0,
        max_retries: int = 3,
        session=None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key or os.environ.get(api_key_env)
        if not self.api_key:
            raise MissingApiKeyError(
                f"no API key: pass api_key or set {api_key_env}"
            )
        self.timeout = timeout
        self.max_retries = max_retries
        self._session = session or requests.Session()

    def complete(self, prompt: str, config: JudgeConfig) -> list[str]:
        payload = {
            "model": config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "n": config.n,
            "max_tokens": config.completion_reserve,
        }
        url = self.base_url + "/v1/chat/completions"
        headers = {"Authorization": f"Bearer {self.api_key}"}
        delay = 1.0
        last_error = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(delay + random.uniform(0, delay / 4))
                delay *= 2
            try:
                resp = self._session.post(url, json=payload, headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = JudgeTransportError(f"{url} answered {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise JudgeError(f"{url} answered {resp.status_code}: {resp.text[:200]}")
            try:
                choices = resp.json()["choices"]
                return [c["message"]["content"] for c in choices]
            except (ValueError, KeyError, TypeError) as exc:
                raise JudgeError(f"malformed chat completion response: {exc}") from exc
        raise JudgeTransportError(
            f"{url} unreachable after {self.max_retries + 1} attempts"
        ) from (last_error if isinstance(last_error, Exception) else None)


_SCALE_RE = re.compile(r"scale of (\d+)-(\d+)")
_SUMMARY_HEAD = "\n# Generated Summary:\n"
_SUMMARY_TAIL = "\n\n# Evaluation Form (scores ONLY):"


class MockJudgeClient:
    """Offline judge for fixtures and tests.

    Recovers the corruption level from the marker tokens that the synthetic
    corpus plants in summaries and maps it linearly onto the criterion scale
    read off the prompt. With noise > 0, a jitter seeded by (seed, prompt) is
    added, so reruns reproduce the same scores.
    """

    def __init__(self, noise: int = 0, seed: int = 0):
        self.noise = noise
        self.seed = seed
        self.calls = 0

    def complete(self, prompt: str, config: JudgeConfig) -> list[str]:
        self.calls += 1
        m = _SCALE_RE.search(prompt)
        lo, hi = (int(m.group(1)), int(m.group(2))) if m else (1, 5)

        head = prompt.rfind(_SUMMARY_HEAD)
        tail = prompt.rfind(_SUMMARY_TAIL)
        summary = prompt[head + len(_SUMMARY_HEAD) : tail] if 0 <= head < tail else prompt

        q = 0.0
        for level, denom in MARKER_RE.findall(summary):
            if int(denom) > 0:
                q = max(q, int(level) / int(denom))
        score = round(hi - q * (hi - lo))
        if self.noise:
            rng = random.Random(f"{self.seed}:{hashlib.sha256(prompt.encode()).hexdigest()}")
            score += rng.randint(-self.noise, self.noise)
        score = max(lo, min(hi, score))
        return [str(score)] * config.n


def judge(
    source,
    summary,
    criterion: Criterion | str,
    config: JudgeConfig,
    client,
    counter,
    cache: VerdictCache | None = None,
) -> JudgeVerdict:
    """Score one summary against one article (or extract) on one criterion."""
    if isinstance(criterion, str):
        criterion = get_criterion(criterion)
    article_text = source if isinstance(source, str) else source.text
    summary_text = summary if isinstance(summary, str) else summary.text

    prompt = assemble_prompt(article_text, summary_text, criterion, config, counter)
    digest = prompt_digest(config.model, config.temperature, prompt)

    if cache is not None:
        hit = cache.get(digest)
        if hit is not None:
            return hit

    contents = client.complete(prompt, config)
    if not contents:
        raise JudgeError("chat endpoint returned no choices")
    scores = [parse_score(c, criterion) for c in contents]
    score = scores[0] if len(scores) == 1 else round(sum(scores) / len(scores))
    raw = contents[0] if len(contents) == 1 else json.dumps(contents, ensure_ascii=False)

    prompt_tokens = count_tokens(prompt, counter)
    verdict = JudgeVerdict(
        score=score,
        criterion=criterion.name,
        prompt_tokens=prompt_tokens,
        cost=cost_of(prompt_tokens, config),
        raw_response=raw,
        prompt_hash=digest,
    )
    if cache is not None:
        cache.put(verdict)
    return verdict
