from __future__ import annotations

import argparse
import logging
from pathlib import Path

from app.cli.dependencies import dep_observability, dep_run_id, dep_settings
from app.core.dataset_builder import build_dataset
from app.core.errors import ConfigError
from app.core.metrics import ConfusionMatrix, confusion_matrix, seg_scores
from app.core.pipeline_config import dump_pipeline_config, load_pipeline_config
from app.core.segmenter import train_clean_segmenter
from app.core.shapes import generate_toy_dataset
from app.models.dataset import Split

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("gen-data", help="Build a toy quadruple dataset")
    parser.add_argument("--config", help="YAML pipeline config")
    parser.add_argument("--out", help="Output directory (default: $OUTPUT_ROOT/data)")
    parser.add_argument("--n-samples", type=int, dest="n_samples")
    parser.add_argument("--image-size", type=int, dest="image_size")
    parser.add_argument("--num-classes", type=int, dest="num_classes")
    parser.add_argument("--n-val", type=int, dest="n_val")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--segmenter-epochs", type=int, dest="segmenter_epochs")
    parser.add_argument(
        "--degradation",
        action="append",
        metavar="CODE:SEVERITY",
        help="Degradation to apply, e.g. gb:1 (repeatable)",
    )
    parser.set_defaults(handler=run)


def parse_degradations(items: list[str] | None) -> list[dict] | None:
    if not items:
        return None
    recipes = []
    for j, item in enumerate(items):
        code, _, severity = item.partition(":")
        try:
            recipes.append({"family": code, "severity": int(severity or 0), "seed": 11 + j})
        except ValueError as e:
            raise ConfigError(f"Bad --degradation {item!r}; expected CODE:SEVERITY") from e
    return recipes


def overrides_from_args(args: argparse.Namespace) -> dict:
    return {
        "dataset.toy.n_samples": args.n_samples,
        "dataset.toy.image_size": args.image_size,
        "dataset.toy.num_classes": args.num_classes,
        "dataset.toy.n_val": args.n_val,
        "dataset.toy.seed": args.seed,
        "dataset.segmenter_epochs": args.segmenter_epochs,
        "dataset.degradations": parse_degradations(args.degradation),
    }


def run(args: argparse.Namespace) -> int:
    settings = dep_settings()
    obs = dep_observability(settings)
    run_id = dep_run_id()
    cfg = load_pipeline_config(args.config, overrides_from_args(args))
    cfg = cfg.model_copy(update={"run_id": run_id})
    toy = cfg.dataset.toy
    out_dir = Path(args.out) if args.out else Path(settings.output_root) / "data"

    pairs = generate_toy_dataset(toy)
    train_pairs = [p for i, p in enumerate(pairs) if toy.split_of(i) == Split.TRAIN]
    val_pairs = [p for i, p in enumerate(pairs) if toy.split_of(i) == Split.VAL]
    print(f"Training clean segmenter on {len(train_pairs)} images for {cfg.dataset.segmenter_epochs} epochs...")
    segmenter = train_clean_segmenter(
        train_pairs,
        epochs=cfg.dataset.segmenter_epochs,
        seed=cfg.dataset.segmenter_seed,
        batch_size=cfg.dataset.segmenter_batch_size,
        lr=cfg.dataset.segmenter_lr,
        observability=obs,
        run_id=run_id,
    )
    if val_pairs:
        cm = ConfusionMatrix.empty(toy.num_classes)
        for image, labels in val_pairs:
            cm = cm + confusion_matrix(segmenter.predict(image), labels, toy.num_classes)
        print(f"Clean val mIoU: {seg_scores(cm).miou:.4f}")

    manifest = build_dataset(toy, cfg.dataset.specs(), segmenter, out_dir, pairs=pairs, observability=obs, run_id=run_id)
    dump_pipeline_config(cfg, out_dir)
    for split in Split:
        count = len(manifest.split(split))
        if count:
            print(f"  {split.value}: {count} records")
    print(f"Dataset written to {out_dir}")
    return 0
