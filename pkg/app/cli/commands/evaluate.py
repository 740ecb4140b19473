from __future__ import annotations

import argparse
import logging
from pathlib import Path

from app.cli.dependencies import dep_observability, dep_run_id, dep_settings
from app.core import runner
from app.models.dataset import Split
from app.models.evaluation import Guidance

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("eval", help="Score a checkpoint on a manifest split")
    parser.add_argument("--checkpoint", help="Training checkpoint")
    parser.add_argument("--manifest", required=True, help="manifest.jsonl or its directory")
    parser.add_argument("--split", default=Split.VAL.value, choices=[s.value for s in Split])
    parser.add_argument("--out", help="Where to write the CSV and grids (default: $OUTPUT_ROOT/eval)")
    parser.add_argument("--guidance", default=Guidance.REFINED.value, choices=[g.value for g in Guidance])
    parser.add_argument("--oracle", action="store_true", help="Score ground truth as the prediction")
    parser.add_argument("--no-grids", action="store_true", dest="no_grids")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    settings = dep_settings()
    out_dir = Path(args.out) if args.out else Path(settings.output_root) / "eval"
    table = runner.evaluate(
        args.checkpoint,
        args.manifest,
        split=args.split,
        guidance=Guidance(args.guidance),
        oracle=args.oracle,
        out_dir=out_dir,
        grids=not args.no_grids,
        settings=settings,
        observability=dep_observability(settings),
        run_id=dep_run_id(),
    )
    print(table.render())
    print(f"Metrics written to {out_dir}")
    return 0
