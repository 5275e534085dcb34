"""HTTP endpoints implementing the sentence-scoring wire contract.

    POST /v1/bertscore_recall  {"candidate": c, "reference": r[, "idf": true]}
                               -> {"recall": x}
    POST /v1/nli               {"premise": p, "hypothesis": h}
                               -> {"entail": e, "contradict": c, "neutral": n}

Batch requests put parallel arrays in the same fields and get arrays back
in request order. NLI responses gain a "warning" (scalar) or "warnings"
(batch) field when a hypothesis had to be truncated. Texts the models
cannot fit at all are answered 413 with the limit stated. GET /healthz
reports readiness.
"""

from __future__ import annotations

from dataclasses import dataclass

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, model_validator

from .scoring import WIRE_FIELDS, NliScorer, OversizeTextError, RecallScorer


@dataclass(frozen=True)
class ServiceConfig:
    """Startup settings: which checkpoints to serve, where, and how."""

    nli_model: str
    embedding_model: str
    device: str = "cpu"
    batch_size: int = 8
    host: str = "127.0.0.1"
    port: int = 8760

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _paired(a, b, a_name: str, b_name: str) -> None:
    if isinstance(a, list) != isinstance(b, list):
        raise ValueError(f"{a_name} and {b_name} must both be strings or both arrays")
    if isinstance(a, list) and len(a) != len(b):
        raise ValueError(f"{a_name} has {len(a)} items but {b_name} has {len(b)}")


class RecallRequest(BaseModel):
    candidate: str | list[str]
    reference: str | list[str]
    idf: bool = False

    @model_validator(mode="after")
    def _shapes_match(self):
        _paired(self.candidate, self.reference, "candidate", "reference")
        return self


class NliRequest(BaseModel):
    premise: str | list[str]
    hypothesis: str | list[str]

    @model_validator(mode="after")
    def _shapes_match(self):
        _paired(self.premise, self.hypothesis, "premise", "hypothesis")
        return self


def create_app(nli: NliScorer, recall: RecallScorer) -> FastAPI:
    """Wire two loaded scorers into the HTTP app."""
    app = FastAPI(title="semantic-sidecar")

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "nli_max_tokens": nli.max_tokens,
            "recall_max_tokens": recall.max_tokens,
        }

    @app.post("/v1/bertscore_recall")
    def bertscore_recall(req: RecallRequest):
        batched = isinstance(req.candidate, list)
        candidates = req.candidate if batched else [req.candidate]
        references = req.reference if batched else [req.reference]
        try:
            values = recall.score(candidates, references, idf=req.idf)
        except OversizeTextError as exc:
            raise HTTPException(status_code=413, detail=str(exc)) from exc
        return {"recall": values if batched else values[0]}

    @app.post("/v1/nli")
    def nli_probs(req: NliRequest):
        batched = isinstance(req.premise, list)
        premises = req.premise if batched else [req.premise]
        hypotheses = req.hypothesis if batched else [req.hypothesis]
        try:
            triples, warnings = nli.score(premises, hypotheses)
        except OversizeTextError as exc:
            raise HTTPException(status_code=413, detail=str(exc)) from exc
        if not batched:
            body = dict(triples[0])
            if warnings[0]:
                body["warning"] = warnings[0]
            return body
        body = {field: [t[field] for t in triples] for field in WIRE_FIELDS}
        if any(warnings):
            body["warnings"] = warnings
        return body

    return app


def app_from_config(config: ServiceConfig) -> FastAPI:
    """Load both checkpoints, failing fast, and return the ready app."""
    return create_app(
        NliScorer(config.nli_model, device=config.device, batch_size=config.batch_size),
        RecallScorer(config.embedding_model, device=config.device, batch_size=config.batch_size),
    )
