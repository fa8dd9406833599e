"""Dataset access through the interchange files only.

Reads ``dataset.json`` + ``manifest.jsonl`` for the sample catalog,
``split.json`` for the train/test assignment, and the per-sample LSCP
rasters. Conditions are z-scored with statistics from the train split;
imagery is mapped from [0, 1] to [-1, 1] to match the tanh output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .lscp import read_lscp


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    conditions_path: Path
    imagery_path: Path


def read_catalog(dataset_dir: str | Path) -> tuple[dict, list[CatalogEntry]]:
    dataset_dir = Path(dataset_dir)
    info = json.loads((dataset_dir / "dataset.json").read_text())
    entries = []
    with open(dataset_dir / "manifest.jsonl") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            entries.append(
                CatalogEntry(
                    id=d["id"],
                    conditions_path=dataset_dir / d["conditions_path"],
                    imagery_path=dataset_dir / d["imagery_path"],
                )
            )
    return info, entries


def read_split(split_path: str | Path) -> tuple[list[str], list[str]]:
    d = json.loads(Path(split_path).read_text())
    return list(d["train"]), list(d["test"])


@dataclass
class PairedTensors:
    ids: list[str]
    conditions: torch.Tensor  # (n, Cin, H, W), z-scored
    imagery: torch.Tensor  # (n, 4, H, W), in [-1, 1]
    cond_mean: np.ndarray
    cond_std: np.ndarray
    cell_size_m: float


def load_pairs(
    entries: list[CatalogEntry],
    ids: list[str],
    cond_mean: np.ndarray | None = None,
    cond_std: np.ndarray | None = None,
) -> PairedTensors:
    by_id = {e.id: e for e in entries}
    conds, imgs = [], []
    cell = 43.0
    for sid in ids:
        e = by_id[sid]
        cond = read_lscp(e.conditions_path)
        img = read_lscp(e.imagery_path)
        cell = cond.cell_size_m
        conds.append(cond.data)
        imgs.append(img.data)
    cond_arr = np.stack(conds).astype(np.float64)
    img_arr = np.stack(imgs).astype(np.float64)
    if cond_mean is None:
        cond_mean = cond_arr.mean(axis=(0, 2, 3))
        cond_std = cond_arr.std(axis=(0, 2, 3))
        cond_std = np.where(cond_std == 0.0, 1.0, cond_std)
    cond_arr = (cond_arr - cond_mean[None, :, None, None]) / cond_std[None, :, None, None]
    img_arr = img_arr * 2.0 - 1.0
    return PairedTensors(
        ids=list(ids),
        conditions=torch.from_numpy(cond_arr.astype(np.float32)),
        imagery=torch.from_numpy(img_arr.astype(np.float32)),
        cond_mean=np.asarray(cond_mean),
        cond_std=np.asarray(cond_std),
        cell_size_m=cell,
    )
