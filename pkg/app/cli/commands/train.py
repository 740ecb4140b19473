from __future__ import annotations

import argparse
import logging
from pathlib import Path

from app.cli.dependencies import dep_observability, dep_run_id, dep_settings
from app.core import runner
from app.core.pipeline_config import dump_pipeline_config, load_pipeline_config
from app.models.training import AdversarialForm, TVVariant

logger = logging.getLogger(__name__)

OPTIMIZER_SECTIONS = ("g1_optimizer", "g2_optimizer", "d1_optimizer", "d2_optimizer")


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("train", help="Run the three-stage cooperative training")
    parser.add_argument("--config", help="YAML pipeline config")
    parser.add_argument("--manifest", required=True, help="manifest.jsonl or its directory")
    parser.add_argument("--out", help="Run directory (default: $OUTPUT_ROOT/train)")
    parser.add_argument("--n1", type=int)
    parser.add_argument("--n2", type=int)
    parser.add_argument("--n3", type=int)
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--lr", type=float, help="Learning rate for all four networks")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--checkpoint-interval", type=int, dest="checkpoint_interval")
    parser.add_argument("--tv-variant", choices=[v.value for v in TVVariant], dest="tv_variant")
    parser.add_argument("--adversarial", choices=[f.value for f in AdversarialForm])
    parser.add_argument("--resume", help="Checkpoint to continue from")
    parser.set_defaults(handler=run)


def overrides_from_args(args: argparse.Namespace) -> dict:
    overrides = {
        "training.n1": args.n1,
        "training.n2": args.n2,
        "training.n3": args.n3,
        "training.batch_size": args.batch_size,
        "training.seed": args.seed,
        "training.checkpoint_interval": args.checkpoint_interval,
        "training.tv_variant": args.tv_variant,
        "training.adversarial_form": args.adversarial,
    }
    for section in OPTIMIZER_SECTIONS:
        overrides[f"training.{section}.lr"] = args.lr
    return overrides


def run(args: argparse.Namespace) -> int:
    settings = dep_settings()
    obs = dep_observability(settings)
    run_id = dep_run_id()
    cfg = load_pipeline_config(args.config, overrides_from_args(args))
    cfg = cfg.model_copy(update={"run_id": run_id})
    out_dir = Path(args.out) if args.out else Path(settings.output_root) / "train"
    dump_pipeline_config(cfg, out_dir)

    result = runner.run(
        cfg.training,
        args.manifest,
        out_dir,
        resume=args.resume,
        settings=settings,
        observability=obs,
        run_id=run_id,
    )
    print(f"Finished at iteration {result.state.iteration}; stage boundaries {result.state.boundaries}")
    if result.metrics is not None:
        print(result.metrics.render())
    print(f"Checkpoint: {result.checkpoint_path}")
    print(f"Log: {result.log_path}")
    return 0
