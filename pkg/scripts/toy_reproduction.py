"""Toy-scale reproduction: refinement/restoration gains and the cooperative benefit, over several seeds."""

import sys
import json
import statistics
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from app.config import get_settings
from app.core import runner
from app.core.checkpoint import stage_end_name
from app.core.dataset_builder import build_dataset
from app.core.pipeline_config import load_pipeline_config
from app.core.segmenter import train_clean_segmenter
from app.core.shapes import generate_toy_dataset
from app.models.dataset import Split
from app.models.evaluation import Guidance, MetricsTable
from app.models.training import Stage

MIOU_MARGIN = 0.05
PSNR_MARGIN_DB = 1.0
COOPERATIVE_MARGIN_DB = 0.2


@dataclass
class SeedResult:
    seed: int
    miou_degraded: float
    miou_refined: float
    psnr_degraded: float
    psnr_restored: float
    psnr_stage2_degraded_guidance: float


@dataclass
class ReproductionReport:
    timestamp: str
    seeds: list[int]
    median_miou_gain: float
    median_psnr_gain_db: float
    median_cooperative_gain_db: float
    refinement_passed: bool
    restoration_passed: bool
    cooperative_passed: bool
    results: list[dict] = field(default_factory=list)


def _mean_over_families(table: MetricsTable, refined: bool) -> tuple[float, float]:
    rows = [
        r for r in table.rows
        if r.family != "Original" and r.family.endswith("_Re") == refined
    ]
    miou = statistics.fmean(r.scores.miou for r in rows)
    psnr = statistics.fmean(r.psnr for r in rows)
    return miou, psnr


def run_seed(seed: int, config_path: str | None, out_root: Path) -> SeedResult:
    settings = get_settings()
    cfg = load_pipeline_config(config_path, {
        "dataset.toy.seed": 7 + seed,
        "dataset.segmenter_seed": seed,
        "training.seed": seed,
    })
    data_dir = out_root / f"seed_{seed}" / "data"
    run_dir = out_root / f"seed_{seed}" / "train"

    print(f"\n>>> Seed {seed}: building dataset in {data_dir}")
    toy = cfg.dataset.toy
    pairs = generate_toy_dataset(toy)
    train_pairs = [p for i, p in enumerate(pairs) if toy.split_of(i) == Split.TRAIN]
    segmenter = train_clean_segmenter(
        train_pairs, cfg.dataset.segmenter_epochs, cfg.dataset.segmenter_seed,
        batch_size=cfg.dataset.segmenter_batch_size, lr=cfg.dataset.segmenter_lr,
    )
    build_dataset(toy, cfg.dataset.specs(), segmenter, data_dir, pairs=pairs)

    print(f">>> Seed {seed}: training (N1={cfg.training.n1}, N2={cfg.training.n2}, N3={cfg.training.n3})")
    result = runner.run(cfg.training, data_dir, run_dir, settings=settings)
    miou_d, psnr_d = _mean_over_families(result.metrics, refined=False)
    miou_r, psnr_r = _mean_over_families(result.metrics, refined=True)

    stage2 = runner.evaluate(
        run_dir / stage_end_name(Stage.RESTORATION), data_dir, Split.VAL,
        guidance=Guidance.DEGRADED, settings=settings,
    )
    _, psnr_stage2 = _mean_over_families(stage2, refined=True)

    return SeedResult(seed, miou_d, miou_r, psnr_d, psnr_r, psnr_stage2)


def print_report(report: ReproductionReport):
    print("\n" + "=" * 60)
    print("TOY REPRODUCTION REPORT")
    print("=" * 60)
    print(f"{'seed':>6} {'mIoU S_d':>10} {'mIoU S_r':>10} {'PSNR I_d':>10} {'PSNR I_r':>10} {'PSNR st2':>10}")
    print("-" * 60)
    for r in report.results:
        print(
            f"{r['seed']:>6} {r['miou_degraded']:>10.4f} {r['miou_refined']:>10.4f} "
            f"{r['psnr_degraded']:>10.2f} {r['psnr_restored']:>10.2f} {r['psnr_stage2_degraded_guidance']:>10.2f}"
        )
    print("-" * 60)
    print(f"Median mIoU gain:        {report.median_miou_gain:+.4f}  (need >= {MIOU_MARGIN})  {'PASS' if report.refinement_passed else 'FAIL'}")
    print(f"Median PSNR gain:        {report.median_psnr_gain_db:+.2f} dB (need >= {PSNR_MARGIN_DB})  {'PASS' if report.restoration_passed else 'FAIL'}")
    print(f"Median cooperative gain: {report.median_cooperative_gain_db:+.2f} dB (need >= {COOPERATIVE_MARGIN_DB})  {'PASS' if report.cooperative_passed else 'FAIL'}")
    print("=" * 60)


def main():
    import argparse

    parser = argparse.ArgumentParser(description="Toy-scale reproduction over several seeds")
    parser.add_argument("--config", default="configs/default.yaml", help="Pipeline config")
    parser.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    parser.add_argument("--out", default=None, help="Output root (default: $OUTPUT_ROOT/toy_reproduction)")
    args = parser.parse_args()

    out_root = Path(args.out) if args.out else Path(get_settings().output_root) / "toy_reproduction"
    results = [run_seed(seed, args.config, out_root) for seed in args.seeds]

    miou_gain = statistics.median(r.miou_refined - r.miou_degraded for r in results)
    psnr_gain = statistics.median(r.psnr_restored - r.psnr_degraded for r in results)
    coop_gain = statistics.median(r.psnr_restored - r.psnr_stage2_degraded_guidance for r in results)
    report = ReproductionReport(
        timestamp=datetime.now().isoformat(),
        seeds=args.seeds,
        median_miou_gain=miou_gain,
        median_psnr_gain_db=psnr_gain,
        median_cooperative_gain_db=coop_gain,
        refinement_passed=miou_gain >= MIOU_MARGIN,
        restoration_passed=psnr_gain >= PSNR_MARGIN_DB,
        cooperative_passed=coop_gain >= COOPERATIVE_MARGIN_DB,
        results=[asdict(r) for r in results],
    )
    print_report(report)

    filepath = out_root / f"toy_reproduction_{datetime.now():%Y%m%d_%H%M%S}.json"
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(asdict(report), f, indent=2)
    print(f"\nReport saved to: {filepath}")
    all_passed = report.refinement_passed and report.restoration_passed and report.cooperative_passed
    return 0 if all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
