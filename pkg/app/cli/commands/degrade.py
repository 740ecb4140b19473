from __future__ import annotations

import argparse
import logging

from pydantic import ValidationError

from app.core import degradations
from app.core.errors import ArgumentError
from app.models.degradation import FAMILY_CODES, NUM_SEVERITIES, DegradationFamily, DegradationSpec
from app.utils.image_io import load_image, save_image

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("degrade", help="Apply one degradation to an image")
    parser.add_argument("--input", required=True, help="Input RGB image")
    parser.add_argument("--family", required=True, choices=sorted(FAMILY_CODES.values()))
    parser.add_argument("--severity", type=int, default=0, choices=range(NUM_SEVERITIES))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", required=True, help="Where to write the degraded image")
    parser.add_argument("--reflection", help="Reflection layer image (reflect family only)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    try:
        spec = DegradationSpec(
            family=DegradationFamily.from_code(args.family),
            severity_index=args.severity,
            seed=args.seed,
        )
    except ValidationError as e:
        raise ArgumentError(f"Invalid degradation arguments: {e}") from e
    image = load_image(args.input)
    aux = None
    if spec.family == DegradationFamily.REFLECTION:
        if not args.reflection:
            raise ArgumentError("--reflection is required for the reflect family")
        aux = load_image(args.reflection)
    out = degradations.apply(spec, image, aux)
    save_image(out, args.output)
    print(spec.describe())
    print(f"Saved: {args.output}")
    return 0
