"""Inference: turn condition rasters into generated imagery files.

Outputs are 4-band LSCP files named ``<sample_id>.lscp`` (extra draws
get a ``.drawN`` infix) with reflectance mapped back to [0, 1], so the
evaluation harness consumes the directory as-is. With test-time dropout
enabled, repeated draws differ; with it disabled they are bit-identical.
A diversity probe (mean pairwise L1 distance between draws per sample)
is written alongside when more than one draw is requested.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import torch

from .data import read_catalog, read_split
from .lscp import Raster, read_lscp, write_lscp
from .models import GanConfig, build_models
from .train import load_checkpoint

IMAGERY_BANDS = ("blue", "green", "red", "nir")


def _conditions_source(conditions_dir: Path, split_path: str | Path | None):
    """Yield (sample_id, conditions Raster) from a dataset dir or flat dir."""
    if (conditions_dir / "dataset.json").exists():
        _, entries = read_catalog(conditions_dir)
        ids = None
        if split_path is not None:
            _, test_ids = read_split(split_path)
            ids = set(test_ids)
        for e in entries:
            if ids is None or e.id in ids:
                yield e.id, read_lscp(e.conditions_path)
    else:
        for path in sorted(conditions_dir.glob("*.lscp")):
            yield path.stem, read_lscp(path)


def generate(
    checkpoint_path: str | Path,
    conditions_dir: str | Path,
    out_dir: str | Path,
    n_draws: int = 1,
    split_path: str | Path | None = None,
    seed: int = 0,
) -> list[Path]:
    """Run the generator over every conditions raster; returns written paths."""
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    payload = load_checkpoint(checkpoint_path)
    cfg = GanConfig(**payload["config"])
    generator, _, _ = build_models(cfg)
    generator.load_state_dict(payload["generator_state"])
    generator.eval()
    mean = np.asarray(payload["cond_mean"])
    std = np.asarray(payload["cond_std"])

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(seed)

    written: list[Path] = []
    diversity_rows = []
    for sample_id, cond in _conditions_source(Path(conditions_dir), split_path):
        if cond.data.shape[0] != cfg.in_channels:
            raise ValueError(
                f"{sample_id}: {cond.data.shape[0]} condition channels, "
                f"checkpoint expects {cfg.in_channels}"
            )
        x = (cond.data.astype(np.float64) - mean[:, None, None]) / std[:, None, None]
        x = torch.from_numpy(x.astype(np.float32))[None]
        draws = []
        with torch.no_grad():
            for _ in range(n_draws):
                out = generator(x, active_dropout=cfg.test_time_dropout)
                draws.append(((out[0].numpy() + 1.0) / 2.0).clip(0.0, 1.0))
        for j, bands in enumerate(draws):
            name = f"{sample_id}.lscp" if j == 0 else f"{sample_id}.draw{j}.lscp"
            path = out_dir / name
            write_lscp(
                Raster(
                    channel_names=IMAGERY_BANDS,
                    data=bands.astype(np.float32),
                    cell_size_m=cond.cell_size_m,
                ),
                path,
            )
            written.append(path)
        if n_draws > 1:
            dists = [
                float(np.abs(a - b).mean())
                for i, a in enumerate(draws)
                for b in draws[i + 1 :]
            ]
            diversity_rows.append((sample_id, f"{np.mean(dists):.8f}"))
    if diversity_rows:
        with open(out_dir / "diversity.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(("sample_id", "mean_pairwise_l1"))
            writer.writerows(diversity_rows)
    return written
