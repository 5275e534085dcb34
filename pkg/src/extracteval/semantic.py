"""Clients for model-backed sentence scorers.

Two operations are exposed: a soft-token recall in [0, 1] and a three-way
entail/contradict/neutral distribution. The ``mock`` endpoint computes cheap
lexical stand-ins in process; any other endpoint is treated as an HTTP
service speaking the JSON contract below.

    POST {endpoint}/v1/bertscore_recall   {"candidate": c, "reference": r} -> {"recall": x}
    POST {endpoint}/v1/nli                {"premise": p, "hypothesis": h}
                                          -> {"entail": e, "contradict": c, "neutral": n}

Batch calls send parallel arrays in the same fields and get arrays back in
request order. An optional boolean "idf" field (default off) asks the recall
scorer for rarity weighting.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass

import requests

from .ngrams import normalize_tokens, rouge_recall

SIMPLEX_TOLERANCE = 1e-6


class ProviderError(Exception):
    """Base class for scorer failures."""


class ProviderTransportError(ProviderError):
    """Could not reach the scoring service after retries."""


class ProviderResponseError(ProviderError):
    """The service answered with an invalid or out-of-range payload."""


@dataclass(frozen=True)
class NliProbs:
    entail: float
    contradict: float
    neutral: float

    def __post_init__(self):
        for name, value in (
            ("entail", self.entail),
            ("contradict", self.contradict),
            ("neutral", self.neutral),
        ):
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise ProviderResponseError(f"nli probability {name}={value!r} outside [0, 1]")
        total = self.entail + self.contradict + self.neutral
        if abs(total - 1.0) > SIMPLEX_TOLERANCE:
            raise ProviderResponseError(f"nli probabilities sum to {total}, not 1")


def _check_recall(value) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not 0.0 <= value <= 1.0:
        raise ProviderResponseError(f"recall value {value!r} outside [0, 1]")
    return float(value)


class MockSemanticProvider:
    """Deterministic in-process scorer.

    Recall is unigram overlap recall; the NLI triple puts unigram Jaccard
    similarity j on entail, 0 on contradict, and 1 - j on neutral.
    """

    endpoint = "mock"
    max_parallel = 1

    def bertscore_recall(self, candidate: str, reference: str, idf: bool = False) -> float:
        return rouge_recall(normalize_tokens(candidate), normalize_tokens(reference), 1)

    def nli(self, premise: str, hypothesis: str) -> NliProbs:
        a = set(normalize_tokens(premise))
        b = set(normalize_tokens(hypothesis))
        union = a | b
        j = len(a & b) / len(union) if union else 1.0
        return NliProbs(entail=j, contradict=0.0, neutral=1.0 - j)

    def bertscore_recall_batch(self, pairs, idf: bool = False) -> list[float]:
        return [self.bertscore_recall(c, r, idf) for c, r in pairs]

    def nli_batch(self, pairs) -> list[NliProbs]:
        return [self.nli(p, h) for p, h in pairs]


class HttpSemanticProvider:
    """HTTP client for the scoring contract, with bounded retries.

    Transport failures and 429/5xx answers are retried up to ``max_retries``
    times with doubled backoff and jitter; validation failures are not.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        max_parallel: int = 4,
        max_retries: int = 3,
        idf: bool = False,
        session=None,
    ):
        if max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_parallel = max_parallel
        self.max_retries = max_retries
        self.idf = idf
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(max_parallel)

    def _post(self, path: str, payload: dict) -> dict:
        url = self.endpoint + path
        delay = 0.5
        last_error = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(delay + random.uniform(0, delay / 4))
                delay *= 2
            try:
                with self._gate:
                    resp = self._session.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = ProviderTransportError(f"{url} answered {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise ProviderResponseError(
                    f"{url} answered {resp.status_code}: {resp.text[:200]}"
                )
            try:
                body = resp.json()
            except ValueError as exc:
                raise ProviderResponseError(f"{url} returned non-JSON body") from exc
            if not isinstance(body, dict):
                raise ProviderResponseError(f"{url} returned non-object body")
            return body
        raise ProviderTransportError(f"{url} unreachable after {self.max_retries + 1} attempts") from (
            last_error if isinstance(last_error, Exception) else None
        )

    def bertscore_recall(self, candidate: str, reference: str, idf: bool | None = None) -> float:
        payload = {"candidate": candidate, "reference": reference}
        if self.idf if idf is None else idf:
            payload["idf"] = True
        return _check_recall(self._post("/v1/bertscore_recall", payload).get("recall"))

    def nli(self, premise: str, hypothesis: str) -> NliProbs:
        body = self._post("/v1/nli", {"premise": premise, "hypothesis": hypothesis})
        return self._triple(body)

    @staticmethod
    def _triple(body: dict) -> NliProbs:
        try:
            return NliProbs(
                entail=body["entail"], contradict=body["contradict"], neutral=body["neutral"]
            )
        except KeyError as exc:
            raise ProviderResponseError(f"nli response missing field {exc}") from exc

    def bertscore_recall_batch(self, pairs, idf: bool | None = None) -> list[float]:
        pairs = list(pairs)
        if not pairs:
            return []
        payload = {
            "candidate": [c for c, _ in pairs],
            "reference": [r for _, r in pairs],
        }
        if self.idf if idf is None else idf:
            payload["idf"] = True
        values = self._post("/v1/bertscore_recall", payload).get("recall")
        if not isinstance(values, list) or len(values) != len(pairs):
            raise ProviderResponseError("batch recall response shape mismatch")
        return [_check_recall(v) for v in values]

    def nli_batch(self, pairs) -> list[NliProbs]:
        pairs = list(pairs)
        if not pairs:
            return []
        body = self._post(
            "/v1/nli",
            {"premise": [p for p, _ in pairs], "hypothesis": [h for _, h in pairs]},
        )
        fields = []
        for key in ("entail", "contradict", "neutral"):
            values = body.get(key)
            if not isinstance(values, list) or len(values) != len(pairs):
                raise ProviderResponseError("batch nli response shape mismatch")
            fields.append(values)
        return [
            self._triple({"entail": e, "contradict": c, "neutral": n})
            for e, c, n in zip(*fields)
        ]


def make_provider(endpoint: str, **kwargs):
    """Return the mock provider for the 'mock' sentinel, else an HTTP client."""
    if endpoint == "mock":
        return MockSemanticProvider()
    return HttpSemanticProvider(endpoint, **kwargs)
