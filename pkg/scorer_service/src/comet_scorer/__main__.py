"""Run the scorer service: python -m comet_scorer [--model stub|wmt22-comet-da]"""

from __future__ import annotations

import argparse

import uvicorn

from .app import DEFAULT_BATCH_CAP, create_app
from .models import COMET_MODEL_ID, CometModel, StubModel


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="comet-scorer-service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8100)
    parser.add_argument("--model", default="stub", help=f"stub or {COMET_MODEL_ID}")
    parser.add_argument("--stub-kind", default="length", choices=["length", "constant"])
    parser.add_argument("--batch-cap", type=int, default=DEFAULT_BATCH_CAP)
    parser.add_argument("--gpus", type=int, default=0)
    args = parser.parse_args(argv)

    if args.model == "stub":
        factory = lambda: StubModel(kind=args.stub_kind)  # noqa: E731
    else:
        factory = lambda: CometModel(model_id=args.model, gpus=args.gpus)  # noqa: E731

    app = create_app(model_factory=factory, batch_cap=args.batch_cap)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
