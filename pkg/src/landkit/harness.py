"""Experiment orchestration: evaluation harness, experiments, sweeps.

Any generator, internal or external, interacts with the harness the same
way: a directory of generated ``<sample_id>.lscp`` imagery keyed by the
target sample ids. Internal reference models (fc, mean-predictor,
identity) are materialized into such directories too, so every model
flows through one code path. K-means segmentation models are always
fitted on target imagery and applied to both members of each pair.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dataset import DatasetManifest
from .metrics import (
    LandscapeMetrics,
    MetricConfig,
    MetricsRow,
    compute_all,
    ndvi_mean,
    write_metrics_csv,
)
from .mlp import (
    MlpParams,
    NormStats,
    TrainConfig,
    load_fc_model,
    predict_image,
    save_fc_model,
    shuffle_pixels,
    train_fc,
)
from .raster import RasterStack, Sample, read_raster_file, write_raster_file
from .report import write_report_svg
from .rng import hash_string, hash_words
from .segmentation import KMeansModel, fit_kmeans, pixels_from_stacks
from .splits import (
    SplitAssignment,
    SplitError,
    haversine_km,
    split_buffered,
    split_holdout_region,
    split_random,
)
from .stats import CorrelationRow, correlation_table, write_report_csv

INTERNAL_MODELS = ("fc", "mean-predictor", "identity")


@dataclass(frozen=True)
class EvalConfig:
    k_list: tuple[int, ...] = (8, 20, 60)
    replicates: int = 8
    seed: int = 0
    metric_cfg: MetricConfig = field(default_factory=MetricConfig)
    fit_images: int | None = None  # None -> ~8% of the target pool
    fit_pixels: int | None = None  # None -> ~3% of the selected images' pixels

    def resolve_fit_sizes(self, n_targets: int, pixels_per_image: int) -> tuple[int, int]:
        n_images = self.fit_images
        if n_images is None:
            n_images = max(1, round(0.08 * n_targets))
        n_images = min(n_images, n_targets)
        n_pixels = self.fit_pixels
        if n_pixels is None:
            # enough pixels to keep the largest K well-determined
            n_pixels = max(
                round(0.03 * n_images * pixels_per_image), 20 * max(self.k_list)
            )
        n_pixels = min(n_pixels, n_images * pixels_per_image)
        return n_images, n_pixels


@dataclass
class EvalResult:
    metric_rows: list[MetricsRow]
    report_rows: list[CorrelationRow]
    n_unpaired: int
    missing: dict[str, list[str]]  # model -> target ids without generated imagery


def evaluate_generated(
    targets: Mapping[str, RasterStack],
    generated: Mapping[str, Mapping[str, RasterStack]],
    cfg: EvalConfig,
    split_design: str,
    kmeans_out: Path | None = None,
) -> EvalResult:
    """Segment, measure, and correlate generated imagery against targets."""
    target_ids = sorted(targets)
    if not target_ids:
        raise ValueError("no target imagery to evaluate against")
    missing: dict[str, list[str]] = {}
    for model_name in sorted(generated):
        lost = [i for i in target_ids if i not in generated[model_name]]
        if len(lost) == len(target_ids):
            raise ValueError(f"model {model_name!r} pairs with no target sample")
        if lost:
            missing[model_name] = lost

    first = targets[target_ids[0]]
    n_images, n_pixels = cfg.resolve_fit_sizes(
        len(target_ids), first.width * first.height
    )
    target_stacks = [targets[i] for i in target_ids]
    metric_cfg = cfg.metric_cfg

    rows: list[MetricsRow] = []
    for k in cfg.k_list:
        for r in range(cfg.replicates):
            rep_seed = cfg.seed + r
            pixels = pixels_from_stacks(target_stacks, n_pixels, n_images, rep_seed)
            model = fit_kmeans(pixels, k, rep_seed)
            if kmeans_out is not None:
                kmeans_out.mkdir(parents=True, exist_ok=True)
                model.save(kmeans_out / f"kmeans_k{k}_r{r}.json")
            for sid in target_ids:
                rows.append(
                    MetricsRow.build(
                        sid, "target", "", k, r,
                        compute_all(targets[sid], model, metric_cfg), metric_cfg,
                    )
                )
            for model_name in sorted(generated):
                per_id = generated[model_name]
                for sid in target_ids:
                    if sid not in per_id:
                        continue
                    rows.append(
                        MetricsRow.build(
                            sid, "generated", model_name, k, r,
                            compute_all(per_id[sid], model, metric_cfg), metric_cfg,
                        )
                    )
    report_rows, n_unpaired = correlation_table(rows, split_design)
    return EvalResult(
        metric_rows=rows,
        report_rows=report_rows,
        n_unpaired=n_unpaired,
        missing=missing,
    )


# ---------------------------------------------------------------------------
# internal reference models


def _unit_from_hash(*words: int) -> float:
    return (hash_words(*words) >> 11) * 2.0**-53


@dataclass
class MeanPredictor:
    """Training-set mean reflectance with a per-sample dither.

    The dither (uniform, +-amplitude, keyed by sample id and band) keeps
    the floor model's metric vectors from being exactly constant, which
    would make every correlation undefined instead of near zero.
    """

    band_means: np.ndarray
    amplitude: float = 0.002

    @classmethod
    def fit(cls, imagery: Iterable[RasterStack]) -> "MeanPredictor":
        sums = np.zeros(4)
        count = 0
        for stack in imagery:
            sums += stack.data.reshape(4, -1).sum(axis=1)
            count += stack.width * stack.height
        if count == 0:
            raise ValueError("no training imagery")
        return cls(band_means=sums / count)

    def predict(self, sample: Sample) -> RasterStack:
        key = hash_string("mean-predictor-dither:" + sample.id)
        bands = np.empty((4, sample.imagery.height, sample.imagery.width), np.float64)
        for b in range(4):
            dither = (2.0 * _unit_from_hash(key, b) - 1.0) * self.amplitude
            bands[b] = np.clip(self.band_means[b] + dither, 0.0, 1.0)
        return RasterStack.from_array(
            ("blue", "green", "red", "nir"), bands, sample.imagery.cell_size_m
        )


@dataclass
class FcPredictor:
    params: MlpParams
    stats: NormStats

    def predict(self, sample: Sample) -> RasterStack:
        return predict_image(self.params, sample.conditions, self.stats)


def write_predictions(
    predict: Callable[[Sample], RasterStack],
    manifest: DatasetManifest,
    ids: Sequence[str],
    out_dir: Path,
) -> dict[str, RasterStack]:
    """Run a model over samples; write <id>.lscp files and return the stacks."""
    out_dir.mkdir(parents=True, exist_ok=True)
    out = {}
    for sid in ids:
        stack = predict(manifest.load_sample(sid))
        write_raster_file(stack, out_dir / f"{sid}.lscp")
        out[sid] = stack
    return out


def load_generated_dir(directory: str | Path, ids: Sequence[str]) -> dict[str, RasterStack]:
    """Read <id>.lscp files for the requested ids (missing files skipped)."""
    directory = Path(directory)
    out = {}
    for sid in ids:
        path = directory / f"{sid}.lscp"
        if path.exists():
            out[sid] = read_raster_file(path)
    return out


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    test_frac: float = 0.2
    k_list: tuple[int, ...] = (8, 20, 60)
    replicates: int = 8
    threshold_cells: float = 5.0
    connectivity: int = 8
    models: tuple[str, ...] = ("fc", "mean-predictor", "identity")
    external: dict = field(default_factory=dict)  # name -> directory
    train: TrainConfig = field(default_factory=TrainConfig)
    layer_sizes: tuple[int, ...] | None = None
    fit_images: int | None = None
    fit_pixels: int | None = None
    d_min_km: float = 100.0
    holdout_region: str = "west"

    def eval_config(self) -> EvalConfig:
        return EvalConfig(
            k_list=self.k_list,
            replicates=self.replicates,
            seed=self.seed,
            metric_cfg=MetricConfig(
                connectivity=self.connectivity, threshold_cells=self.threshold_cells
            ),
            fit_images=self.fit_images,
            fit_pixels=self.fit_pixels,
        )

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["external"] = {k: str(v) for k, v in sorted(self.external.items())}
        return d


def _train_and_predict_models(
    manifest: DatasetManifest,
    split: SplitAssignment,
    cfg: ExperimentConfig,
    out_dir: Path,
) -> dict[str, dict[str, RasterStack]]:
    """Fit requested internal models, materialize predictions for the test ids."""
    test_ids = sorted(split.test)
    generated: dict[str, dict[str, RasterStack]] = {}
    for model_name in cfg.models:
        pred_dir = out_dir / "predictions" / model_name
        if model_name == "fc":
            params, stats, losses = train_fc(manifest, split, cfg.train, cfg.layer_sizes)
            save_fc_model(params, stats, cfg.train, out_dir, losses)
            predictor = FcPredictor(params, stats).predict
        elif model_name == "mean-predictor":
            predictor = MeanPredictor.fit(
                manifest.load_imagery(sid) for sid in sorted(split.train)
            ).predict
        elif model_name == "identity":
            predictor = lambda sample: sample.imagery  # noqa: E731
        else:
            raise ValueError(f"unknown internal model {model_name!r}")
        generated[model_name] = write_predictions(
            predictor, manifest, test_ids, pred_dir
        )
    for name, directory in sorted(cfg.external.items()):
        generated[name] = load_generated_dir(directory, test_ids)
    return generated


def _write_bundle(
    out_dir: Path,
    metric_rows: list[MetricsRow],
    report_rows: list[CorrelationRow],
    run_info: dict,
) -> None:
    write_metrics_csv(metric_rows, out_dir / "metrics.csv")
    write_report_csv(report_rows, out_dir / "report.csv")
    write_report_svg(report_rows, out_dir / "report.svg")
    _write_ndvi_table(report_rows, out_dir / "ndvi_table.csv")
    (out_dir / "run.json").write_text(json.dumps(run_info, indent=2) + "\n")


def _write_ndvi_table(report_rows: Sequence[CorrelationRow], path: Path) -> None:
    """Design x model table of NDVI correlations (k-independent metric)."""
    from .metrics import format_value

    rows = [r for r in report_rows if r.metric_name == "ndvi_mean"]
    if not rows:
        return
    k0 = min(r.k for r in rows)
    rows = [r for r in rows if r.k == k0]
    models = sorted({r.model_name for r in rows})
    designs = sorted({r.split_design for r in rows})
    cell = {(r.split_design, r.model_name): r.bicor for r in rows}
    with open(path, "w") as f:
        f.write(",".join(["split_design"] + models) + "\n")
        for d in designs:
            vals = [format_value(cell.get((d, m))) for m in models]
            f.write(",".join([d] + vals) + "\n")


def run_experiment_one(
    manifest: DatasetManifest, out_dir: str | Path, cfg: ExperimentConfig
) -> EvalResult:
    """Random 80/20 design: train internal models, evaluate all models."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    split = split_random(manifest, cfg.test_frac, cfg.seed)
    split.save(out_dir / "split.json")
    generated = _train_and_predict_models(manifest, split, cfg, out_dir)
    targets = {sid: manifest.load_imagery(sid) for sid in split.test}
    result = evaluate_generated(
        targets, generated, cfg.eval_config(), "random", out_dir / "kmeans"
    )
    run_info = {
        "experiment": "one",
        "dataset": str(manifest.root),
        "config": cfg.to_json_dict(),
        "n_train": len(split.train),
        "n_test": len(split.test),
        "n_unpaired": result.n_unpaired,
        "missing": {k: v for k, v in sorted(result.missing.items())},
    }
    _write_bundle(out_dir, result.metric_rows, result.report_rows, run_info)
    return result


def run_experiment_two(
    manifest: DatasetManifest, out_dir: str | Path, cfg: ExperimentConfig
) -> tuple[list[CorrelationRow], list[str]]:
    """Random vs buffered vs region-holdout designs, retraining per design."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    designs: list[tuple[str, Callable[[], SplitAssignment]]] = [
        ("random", lambda: split_random(manifest, cfg.test_frac, cfg.seed)),
        (
            "buffered",
            lambda: split_buffered(manifest, cfg.d_min_km, cfg.test_frac, cfg.seed),
        ),
        (
            "holdout_region",
            lambda: split_holdout_region(manifest, cfg.holdout_region),
        ),
    ]
    all_metric_rows: list[MetricsRow] = []
    all_report_rows: list[CorrelationRow] = []
    skipped: list[str] = []
    for design_name, make_split in designs:
        try:
            split = make_split()
        except SplitError as err:
            skipped.append(f"{design_name}: {err}")
            continue
        design_dir = out_dir / design_name
        design_dir.mkdir(parents=True, exist_ok=True)
        split.save(design_dir / "split.json")
        generated = _train_and_predict_models(manifest, split, cfg, design_dir)
        targets = {sid: manifest.load_imagery(sid) for sid in split.test}
        result = evaluate_generated(
            targets, generated, cfg.eval_config(), design_name, design_dir / "kmeans"
        )
        all_metric_rows.extend(result.metric_rows)
        all_report_rows.extend(result.report_rows)
    if not all_report_rows:
        raise SplitError(
            "every design is infeasible on this dataset: " + "; ".join(skipped)
        )
    run_info = {
        "experiment": "two",
        "dataset": str(manifest.root),
        "config": cfg.to_json_dict(),
        "skipped_designs": skipped,
    }
    _write_bundle(out_dir, all_metric_rows, all_report_rows, run_info)
    return all_report_rows, skipped


def verify_buffered_distance(
    manifest: DatasetManifest, split: SplitAssignment
) -> float:
    """Exhaustive min great-circle distance over all (test, train) pairs."""
    best = float("inf")
    coords = {e.id: (e.lat, e.lon) for e in manifest}
    for t in split.test:
        for tr in split.train:
            d = haversine_km(*coords[t], *coords[tr])
            if d < best:
                best = d
    return best


# ---------------------------------------------------------------------------
# counterfactual sweep


@dataclass
class SweepResult:
    mosaic_path: Path
    table_path: Path
    ndvi: dict[tuple[float, float], float | None]  # (d_temp, d_precip) -> ndvi


def counterfactual_sweep(
    predict: Callable[[RasterStack], RasterStack],
    sample: Sample,
    d_temp: Sequence[float],
    d_precip: Sequence[float],
    out_dir: str | Path,
    temp_channel: str = "temperature_mean",
    precip_channel: str = "precipitation_annual",
) -> SweepResult:
    """Perturb temperature/precipitation on a grid and re-generate imagery.

    Produces a labeled PNG mosaic (temperature varies down the rows,
    precipitation across the columns, the unperturbed cell marked in red)
    plus a CSV of mean NDVI per grid cell.
    """
    for name in (temp_channel, precip_channel):
        if name not in sample.conditions.channel_names:
            raise ValueError(f"conditions stack has no channel {name!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    h, w = sample.conditions.height, sample.conditions.width
    gutter = 2
    mosaic = np.full(
        (
            len(d_temp) * h + gutter * (len(d_temp) + 1),
            len(d_precip) * w + gutter * (len(d_precip) + 1),
            3,
        ),
        255,
        dtype=np.uint8,
    )
    ndvi: dict[tuple[float, float], float | None] = {}
    for ti, dt in enumerate(d_temp):
        for pi, dp in enumerate(d_precip):
            conditions = sample.conditions
            conditions = conditions.with_channel(
                temp_channel, conditions.channel(temp_channel) + dt
            )
            conditions = conditions.with_channel(
                precip_channel, conditions.channel(precip_channel) + dp
            )
            imagery = predict(conditions)
            ndvi[(float(dt), float(dp))] = ndvi_mean(imagery)
            tile = _to_rgb8(imagery)
            if dt == 0.0 and dp == 0.0:
                tile[[0, 1, -2, -1], :, :] = (220, 30, 30)
                tile[:, [0, 1, -2, -1], :] = (220, 30, 30)
            y0 = gutter + ti * (h + gutter)
            x0 = gutter + pi * (w + gutter)
            mosaic[y0 : y0 + h, x0 : x0 + w] = tile

    from PIL import Image

    mosaic_path = out_dir / "mosaic.png"
    Image.fromarray(mosaic).save(mosaic_path)
    table_path = out_dir / "ndvi.csv"
    with open(table_path, "w") as f:
        from .metrics import format_value

        f.write("d_temp,d_precip,ndvi_mean\n")
        for (dt, dp), value in sorted(ndvi.items()):
            f.write(f"{format_value(dt)},{format_value(dp)},{format_value(value)}\n")
    return SweepResult(mosaic_path=mosaic_path, table_path=table_path, ndvi=ndvi)


def _to_rgb8(imagery: RasterStack) -> np.ndarray:
    """RGB uint8 rendering with a per-image 2nd-98th percentile stretch."""
    rgb = np.stack(
        [imagery.channel("red"), imagery.channel("green"), imagery.channel("blue")]
    ).astype(np.float64)
    lo, hi = np.percentile(rgb, (2.0, 98.0))
    if hi <= lo:
        hi = lo + 1e-9
    rgb = np.clip((rgb - lo) / (hi - lo), 0.0, 1.0)
    return (rgb * 255.0 + 0.5).astype(np.uint8).transpose(1, 2, 0)
