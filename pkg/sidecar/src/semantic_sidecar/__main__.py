"""Command-line entry point: load the checkpoints and serve the API."""

from __future__ import annotations

import argparse
import os

import uvicorn

from .service import ServiceConfig, app_from_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semantic-sidecar",
        description="Serve NLI and token-embedding scorers over a JSON wire contract.",
    )
    parser.add_argument(
        "--nli-model",
        default=os.environ.get("SIDECAR_NLI_MODEL"),
        help="path or hub id of a 3-way NLI checkpoint (env SIDECAR_NLI_MODEL)",
    )
    parser.add_argument(
        "--embedding-model",
        default=os.environ.get("SIDECAR_EMBEDDING_MODEL"),
        help="path or hub id of a token-embedding checkpoint (env SIDECAR_EMBEDDING_MODEL)",
    )
    parser.add_argument(
        "--device",
        default=os.environ.get("SIDECAR_DEVICE", "cpu"),
        help="torch device string (env SIDECAR_DEVICE)",
    )
    parser.add_argument(
        "--batch-size",
        type=int,
        default=int(os.environ.get("SIDECAR_BATCH_SIZE", "8")),
        help="max pairs per forward pass (env SIDECAR_BATCH_SIZE)",
    )
    parser.add_argument("--host", default=os.environ.get("SIDECAR_HOST", "127.0.0.1"))
    parser.add_argument("--port", type=int, default=int(os.environ.get("SIDECAR_PORT", "8760")))
    return parser


def main(argv=None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.nli_model or not args.embedding_model:
        parser.error("--nli-model and --embedding-model are required (flags or SIDECAR_* env vars)")
    config = ServiceConfig(
        nli_model=args.nli_model,
        embedding_model=args.embedding_model,
        device=args.device,
        batch_size=args.batch_size,
        host=args.host,
        port=args.port,
    )
    uvicorn.run(app_from_config(config), host=config.host, port=config.port)


if __name__ == "__main__":
    main()
