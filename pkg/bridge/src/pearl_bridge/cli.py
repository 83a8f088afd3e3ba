"""Bridge CLI: validate the registry config and serve it."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .models import ModelConfigError
from .recording import Recorder
from .registry import ModelRegistry
from .server import create_app


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pearl-bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="serve the configured endpoints")
    p.add_argument("--config", required=True, help="registry config JSON")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8800)
    p.add_argument("--record", help="append a replayable fixture line per served call")
    p.add_argument("--eager", action="store_true", help="load every model at startup")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    registry = ModelRegistry.from_config(config)
    try:
        registry.startup_check(eager=args.eager)
    except ModelConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    recorder = Recorder(args.record) if args.record else None
    app = create_app(registry, recorder=recorder)

    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
