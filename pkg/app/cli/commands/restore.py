from __future__ import annotations

import argparse
import logging
from pathlib import Path

from app.cli.dependencies import dep_settings
from app.core.checkpoint import load_checkpoint, state_from_payload
from app.core.errors import ArgumentError
from app.core.pipeline import CooperativePipeline
from app.core.samples import encode_labels
from app.utils.image_io import load_image, load_label_map, save_image, save_label_map

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("restore", help="Restore a single degraded image")
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--image", required=True, help="Degraded RGB image")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--seg", help="Segmentation label map of the image")
    source.add_argument("--auto", action="store_true", help="Segment with the bundled segmenter")
    parser.add_argument(
        "--skip-refine",
        action="store_true",
        dest="skip_refine",
        help="Feed --seg straight to the restoration network",
    )
    parser.add_argument("--out", help="Output directory (default: $OUTPUT_ROOT/restore)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    settings = dep_settings()
    out_dir = Path(args.out) if args.out else Path(settings.output_root) / "restore"
    state = state_from_payload(load_checkpoint(args.checkpoint), settings.device)
    pipeline = CooperativePipeline.from_state(state)
    image = load_image(args.image)

    if args.auto:
        if not pipeline.has_segmenter:
            raise ArgumentError("--auto needs a checkpoint with a bundled segmenter; pass --seg instead")
        degraded_seg = pipeline.auto_segment(image)
    else:
        degraded_seg = load_label_map(args.seg, state.num_classes).validate()

    stem = Path(args.image).stem
    if args.skip_refine:
        restored = pipeline.restore(encode_labels(degraded_seg, state.num_classes), image)
    else:
        output = pipeline.run(image, degraded_seg)
        restored = output.restored
        seg_path = save_label_map(output.refined_seg, out_dir / f"{stem}_refined_seg.png")
        print(f"Saved: {seg_path}")
    image_path = save_image(restored, out_dir / f"{stem}_restored.png")
    print(f"Saved: {image_path}")
    return 0
