"""Command-line interface.

Exit codes: 0 success, 2 validation/usage error, 3 infeasible design.
"""

from __future__ import annotations

import argparse
import json
import shlex
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from .dataset import DatasetManifest
from .harness import (
    ExperimentConfig,
    counterfactual_sweep,
    evaluate_generated,
    load_generated_dir,
    run_experiment_one,
    run_experiment_two,
    write_predictions,
    FcPredictor,
)
from .metrics import MetricConfig, MetricsRow, compute_all, write_metrics_csv
from .mlp import TrainConfig, load_fc_model, predict_image, save_fc_model, train_fc
from .raster import (
    RasterFormatError,
    RasterValidationError,
    read_raster_file,
    write_raster_file,
)
from .report import write_report_svg
from .segmentation import KMeansModel, fit_kmeans, sample_pixels
from .splits import (
    SplitAssignment,
    SplitError,
    split_buffered,
    split_holdout_region,
    split_random,
)
from .stats import read_report_csv
from .synthworld import DEFAULT_PREDICTORS, WorldConfig, gen_dataset

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=_int_list, default=(8, 20, 60), help="K list, e.g. 8,20,60")
    p.add_argument("--replicates", type=int, default=8)
    p.add_argument("--threshold-cells", type=float, default=5.0)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--fit-images", type=int, default=None)
    p.add_argument("--fit-pixels", type=int, default=None)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--pixels-per-image", type=int, default=768)
    p.add_argument(
        "--layer-sizes",
        type=_int_list,
        default=None,
        help="full layer list including input/output, e.g. 8,64,256,364,4",
    )


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=seed,
        pixels_per_image=args.pixels_per_image,
    )


def _experiment_config(args) -> ExperimentConfig:
    external = {}
    for spec in args.external or ():
        if "=" not in spec:
            raise ValueError(f"--external expects name=directory, got {spec!r}")
        name, directory = spec.split("=", 1)
        external[name] = Path(directory)
    return ExperimentConfig(
        seed=args.seed,
        test_frac=args.test_frac,
        k_list=args.k,
        replicates=args.replicates,
        threshold_cells=args.threshold_cells,
        connectivity=args.connectivity,
        models=tuple(args.models.split(",")) if args.models else (),
        external=external,
        train=_train_config(args, args.seed),
        layer_sizes=args.layer_sizes,
        fit_images=args.fit_images,
        fit_pixels=args.fit_pixels,
        d_min_km=getattr(args, "d_min_km", 100.0),
        holdout_region=getattr(args, "holdout_region", "west"),
    )


def cmd_synth(args) -> int:
    cfg = WorldConfig(
        seed=args.seed,
        n_samples=args.n_samples,
        width=args.width,
        height=args.height,
        cell_size_m=args.cell_size,
        noise_octaves=args.noise_octaves,
        sea_level=args.sea_level,
        latent_noise_weight=args.latent_noise_weight,
        west_temperature_offset=args.west_temperature_offset,
    )
    manifest = gen_dataset(cfg, args.out)
    print(f"wrote {len(manifest)} samples to {args.out}")
    return EXIT_OK


def cmd_split(args) -> int:
    manifest = DatasetManifest.load(args.dataset)
    if args.design == "random":
        split = split_random(manifest, args.test_frac, args.seed)
    elif args.design == "buffered":
        split = split_buffered(manifest, args.d_min_km, args.test_frac, args.seed)
    elif args.design == "holdout_region":
        split = split_holdout_region(manifest, args.region)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(args.design)
    split.save(args.out)
    print(
        f"{split.design}: {len(split.train)} train / {len(split.test)} test"
        f" / {len(split.quarantined)} quarantined -> {args.out}"
    )
    return EXIT_OK


def cmd_train_fc(args) -> int:
    manifest = DatasetManifest.load(args.dataset)
    split = SplitAssignment.load(args.split)
    cfg = _train_config(args, args.seed)
    params, stats, losses = train_fc(manifest, split, cfg, args.layer_sizes)
    save_fc_model(params, stats, cfg, args.out, losses)
    print(
        f"trained fc {list(params.layer_sizes)} ({params.param_count} parameters), "
        f"final loss {losses[-1] if losses else float('nan'):.6f} -> {args.out}"
    )
    return EXIT_OK


def cmd_predict(args) -> int:
    manifest = DatasetManifest.load(args.dataset)
    params, stats, _ = load_fc_model(args.model)
    if args.split:
        ids = sorted(SplitAssignment.load(args.split).test)
    elif args.ids:
        ids = args.ids.split(",")
    else:
        ids = manifest.ids()
    write_predictions(
        FcPredictor(params, stats).predict, manifest, ids, Path(args.out)
    )
    print(f"wrote {len(ids)} predictions to {args.out}")
    return EXIT_OK


def cmd_segment(args) -> int:
    manifest = DatasetManifest.load(args.dataset)
    split = SplitAssignment.load(args.split) if args.split else None
    pool = list(split.test) if split else manifest.ids()
    n_images = args.fit_images or max(1, round(0.08 * len(pool)))
    first = manifest.load_imagery(pool[0])
    n_pixels = args.fit_pixels or max(
        round(0.03 * n_images * first.width * first.height), 20 * args.k_value
    )
    pixels = sample_pixels(manifest, split, n_pixels, n_images, args.seed, ids=pool)
    model = fit_kmeans(pixels, args.k_value, args.seed)
    model.save(args.out)
    print(
        f"k={model.k}: inertia {model.inertia:.6f} after "
        f"{model.iterations_run} iterations -> {args.out}"
    )
    return EXIT_OK


def cmd_metrics(args) -> int:
    manifest = DatasetManifest.load(args.dataset)
    model = KMeansModel.load(args.kmeans)
    metric_cfg = MetricConfig(
        connectivity=args.connectivity, threshold_cells=args.threshold_cells
    )
    ids = args.ids.split(",") if args.ids else manifest.ids()
    rows = []
    for sid in ids:
        if args.imagery_dir:
            stack = read_raster_file(Path(args.imagery_dir) / f"{sid}.lscp")
            source, name = "generated", args.model_name
        else:
            stack = manifest.load_imagery(sid)
            source, name = "target", ""
        rows.append(
            MetricsRow.build(
                sid, source, name, model.k, args.replicate,
                compute_all(stack, model, metric_cfg), metric_cfg,
            )
        )
    write_metrics_csv(rows, args.out)
    print(f"wrote {len(rows)} metric rows -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    manifest = DatasetManifest.load(args.dataset)
    split = SplitAssignment.load(args.split) if args.split else None
    ids = sorted(split.test) if split else manifest.ids()
    targets = {sid: manifest.load_imagery(sid) for sid in ids}
    generated = {}
    for spec in args.generated:
        if "=" not in spec:
            raise ValueError(f"--generated expects name=directory, got {spec!r}")
        name, directory = spec.split("=", 1)
        generated[name] = load_generated_dir(directory, ids)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig(
        seed=args.seed,
        k_list=args.k,
        replicates=args.replicates,
        threshold_cells=args.threshold_cells,
        connectivity=args.connectivity,
        fit_images=args.fit_images,
        fit_pixels=args.fit_pixels,
    ).eval_config()
    result = evaluate_generated(
        targets, generated, cfg, args.design_label, out_dir / "kmeans"
    )
    write_metrics_csv(result.metric_rows, out_dir / "metrics.csv")
    from .stats import write_report_csv

    write_report_csv(result.report_rows, out_dir / "report.csv")
    write_report_svg(result.report_rows, out_dir / "report.svg")
    if result.missing:
        for name, lost in sorted(result.missing.items()):
            print(f"warning: {name}: {len(lost)} target ids without generated imagery")
    print(f"evaluated {len(generated)} model(s) on {len(ids)} targets -> {out_dir}")
    return EXIT_OK


def cmd_exp1(args) -> int:
    manifest = DatasetManifest.load(args.dataset)
    run_experiment_one(manifest, args.out, _experiment_config(args))
    print(f"experiment one complete -> {args.out}")
    return EXIT_OK


def cmd_exp2(args) -> int:
    manifest = DatasetManifest.load(args.dataset)
    _, skipped = run_experiment_two(manifest, args.out, _experiment_config(args))
    for notice in skipped:
        print(f"notice: skipped design {notice}")
    print(f"experiment two complete -> {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    manifest = DatasetManifest.load(args.dataset)
    sample = manifest.load_sample(args.sample_id)
    if args.model.startswith("fc:"):
        params, stats, _ = load_fc_model(args.model[3:])
        predict = lambda cond: predict_image(params, cond, stats)  # noqa: E731
    elif args.model.startswith("cmd:"):
        template = args.model[4:]

        def predict(cond, _template=template):
            with tempfile.TemporaryDirectory() as tmp:
                in_path = Path(tmp) / "conditions.lscp"
                out_path = Path(tmp) / "imagery.lscp"
                write_raster_file(cond, in_path)
                cmdline = [
                    part.replace("{in}", str(in_path)).replace("{out}", str(out_path))
                    for part in shlex.split(_template)
                ]
                subprocess.run(cmdline, check=True)
                return read_raster_file(out_path)

    else:
        raise ValueError(f"--model must be fc:<dir> or cmd:<template>, got {args.model!r}")
    result = counterfactual_sweep(
        predict, sample, args.d_temp, args.d_precip, args.out,
        temp_channel=args.temp_channel, precip_channel=args.precip_channel,
    )
    print(f"sweep mosaic -> {result.mosaic_path}, table -> {result.table_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = read_report_csv(args.report)
    write_report_svg(rows, args.out)
    print(f"rendered {len(rows)} rows -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landkit",
        description="Synthetic landscapes, baseline models, and patch-metric evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-samples", type=int, default=16)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--cell-size", type=float, default=43.0)
    p.add_argument("--noise-octaves", type=int, default=4)
    p.add_argument("--sea-level", type=float, default=0.15)
    p.add_argument("--latent-noise-weight", type=float, default=0.25)
    p.add_argument("--west-temperature-offset", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="produce a train/test split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--design", choices=("random", "buffered", "holdout_region"), required=True)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--d-min-km", type=float, default=100.0)
    p.add_argument("--region", default="west")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train-fc", help="train the per-pixel baseline")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train_fc)

    p = sub.add_parser("predict", help="write fc predictions for test samples")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True, help="directory with fc_model.bin/json")
    p.add_argument("--split", default=None)
    p.add_argument("--ids", default=None, help="comma-separated sample ids")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("segment", help="fit a K-means segmentation model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--k", dest="k_value", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fit-images", type=int, default=None)
    p.add_argument("--fit-pixels", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("metrics", help="compute landscape metrics into a CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kmeans", required=True)
    p.add_argument("--ids", default=None)
    p.add_argument("--imagery-dir", default=None, help="generated imagery directory")
    p.add_argument("--model-name", default="external")
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--threshold-cells", type=float, default=5.0)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("evaluate", help="evaluate generated directories against targets")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default=None)
    p.add_argument(
        "--generated", action="append", required=True, help="name=directory (repeatable)"
    )
    p.add_argument("--design-label", default="random")
    p.add_argument("--seed", type=int, default=0)
    _add_eval_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("exp1", help="random-split model comparison")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--models", default="fc,mean-predictor,identity")
    p.add_argument("--external", action="append", default=None, help="name=directory")
    _add_eval_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_exp1)

    p = sub.add_parser("exp2", help="spatial-design comparison")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--models", default="fc")
    p.add_argument("--external", action="append", default=None)
    p.add_argument("--d-min-km", type=float, default=100.0)
    p.add_argument("--holdout-region", default="west")
    _add_eval_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_exp2)

    p = sub.add_parser("sweep", help="counterfactual climate sweep mosaic")
    p.add_argument("--dataset", required=True)
    p.add_argument("--sample-id", required=True)
    p.add_argument("--model", required=True, help="fc:<dir> or cmd:<template>")
    p.add_argument("--d-temp", type=_float_list, default=(0.0,))
    p.add_argument("--d-precip", type=_float_list, default=(0.0,))
    p.add_argument("--temp-channel", default="temperature_mean")
    p.add_argument("--precip-channel", default="precipitation_annual")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="re-render an SVG from a report CSV")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SplitError as err:
        print(f"error: infeasible design: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (
        RasterValidationError,
        RasterFormatError,
        ValueError,
        KeyError,
        FileNotFoundError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
