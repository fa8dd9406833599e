"""Unsupervised pixel clustering of 4-band imagery into land-cover units.

Lloyd's algorithm with k-means++ seeding, run on band vectors (blue,
green, red, nir). All randomness flows through the shared splitmix64
stream, so a fitted model is a pure function of (pixels, k, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import DatasetManifest
from .raster import RasterStack
from .rng import Rng
from .splits import SplitAssignment


@dataclass(frozen=True)
class KMeansModel:
    k: int
    centroids: np.ndarray  # (k, bands) float64
    seed: int
    iterations_run: int
    inertia: float
    inertia_history: tuple[float, ...] = ()  # in-memory only, not serialized

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        if self.k < 1 or c.shape[0] != self.k:
            raise ValueError(f"need k >= 1 centroids, got k={self.k}, {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("centroids must be finite")

    def save(self, path: str | Path) -> None:
        payload = {
            "k": self.k,
            "seed": self.seed,
            "iterations_run": self.iterations_run,
            "inertia": self.inertia,
            "centroids": [[float(v) for v in row] for row in self.centroids],
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "KMeansModel":
        d = json.loads(Path(path).read_text())
        return cls(
            k=d["k"],
            centroids=np.array(d["centroids"], dtype=np.float64),
            seed=d["seed"],
            iterations_run=d["iterations_run"],
            inertia=d["inertia"],
        )


@dataclass(frozen=True)
class ClassRaster:
    """Per-pixel integer labels in [0, k)."""

    width: int
    height: int
    k: int
    labels: np.ndarray  # (height, width) int32

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int32).reshape(self.height, self.width)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        if lab.size and (lab.min() < 0 or lab.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")

    def to_raster(self, cell_size_m: float = 43.0) -> RasterStack:
        return RasterStack.from_array(
            ("class",), self.labels[np.newaxis].astype(np.float32), cell_size_m
        )

    @classmethod
    def from_raster(cls, r: RasterStack, k: int | None = None) -> "ClassRaster":
        labels = np.rint(r.data[0]).astype(np.int32)
        if k is None:
            k = int(labels.max()) + 1 if labels.size else 1
        return cls(width=r.width, height=r.height, k=k, labels=labels)


def sample_pixels(
    manifest: DatasetManifest,
    split: SplitAssignment | None,
    n_pixels: int,
    n_images: int,
    seed: int,
    ids: Sequence[str] | None = None,
) -> np.ndarray:
    """Seeded draw of band vectors: first images, then pixels.

    The candidate pool is ``ids`` if given, else the split's test side,
    else the whole manifest. Pixels are drawn without replacement from
    the union of the selected images' pixels. Returns (n_pixels, bands).
    """
    if ids is None:
        ids = list(split.test) if split is not None else manifest.ids()
    ids = list(ids)
    if n_images > len(ids):
        raise ValueError(f"n_images={n_images} exceeds {len(ids)} available images")
    if n_images < 1 or n_pixels < 1:
        raise ValueError("n_images and n_pixels must be >= 1")
    rng = Rng(seed)
    chosen = [ids[int(j)] for j in rng.sample_indices(len(ids), n_images)]
    stacks = [manifest.load_imagery(sid) for sid in chosen]
    return _draw_pixels(stacks, n_pixels, rng)


def pixels_from_stacks(
    stacks: Sequence[RasterStack], n_pixels: int, n_images: int, seed: int
) -> np.ndarray:
    """As sample_pixels, but over already-loaded imagery stacks."""
    if n_images > len(stacks):
        raise ValueError(f"n_images={n_images} exceeds {len(stacks)} available images")
    rng = Rng(seed)
    chosen = [stacks[int(j)] for j in rng.sample_indices(len(stacks), n_images)]
    return _draw_pixels(chosen, n_pixels, rng)


def _draw_pixels(stacks: Sequence[RasterStack], n_pixels: int, rng: Rng) -> np.ndarray:
    per_image = [s.width * s.height for s in stacks]
    total = int(np.sum(per_image))
    if n_pixels > total:
        raise ValueError(f"n_pixels={n_pixels} exceeds {total} available pixels")
    flat = rng.sample_indices(total, n_pixels)
    offsets = np.concatenate([[0], np.cumsum(per_image)])
    rows = np.empty((n_pixels, stacks[0].channels), dtype=np.float64)
    for i, f in enumerate(flat):
        img = int(np.searchsorted(offsets, f, side="right")) - 1
        pix = int(f - offsets[img])
        rows[i] = stacks[img].data[:, pix // stacks[img].width, pix % stacks[img].width]
    return rows


def fit_kmeans(
    pixels: np.ndarray, k: int, seed: int, max_iter: int = 100, tol: float = 1e-6
) -> KMeansModel:
    """k-means++ init then Lloyd iterations until the centroid shift < tol.

    Empty clusters are re-seeded to the point currently farthest from its
    assigned centroid, so the within-cluster sum of squares never
    increases between iterations.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[0] < 1:
        raise ValueError("pixels must be a non-empty (n, bands) matrix")
    n = pixels.shape[0]
    if n < k:
        raise ValueError(f"need at least k={k} pixels, got {n}")
    if np.unique(pixels, axis=0).shape[0] < k:
        raise ValueError(f"fewer than k={k} distinct pixels")

    rng = Rng(seed)
    centroids = _kmeanspp_init(pixels, k, rng)
    iterations = 0
    history: list[float] = []
    for iterations in range(1, max_iter + 1):
        d2 = _sq_distances(pixels, centroids)
        labels = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), labels]
        history.append(float(point_d2.sum()))

        new_centroids = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        for j in range(k):
            if counts[j] > 0:
                new_centroids[j] = pixels[labels == j].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            order = np.argsort(-point_d2, kind="stable")
            for idx, j in enumerate(empty):
                new_centroids[j] = pixels[order[idx]]
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break
    d2 = _sq_distances(pixels, centroids)
    inertia = float(d2[np.arange(n), np.argmin(d2, axis=1)].sum())
    history.append(inertia)
    return KMeansModel(
        k=k,
        centroids=centroids,
        seed=seed,
        iterations_run=iterations,
        inertia=inertia,
        inertia_history=tuple(history),
    )


def _kmeanspp_init(pixels: np.ndarray, k: int, rng: Rng) -> np.ndarray:
    n = pixels.shape[0]
    centroids = np.empty((k, pixels.shape[1]), dtype=np.float64)
    centroids[0] = pixels[rng.below(n)]
    d2 = ((pixels - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass on already-chosen points; spread over the rest
            centroids[j] = pixels[rng.below(n)]
            continue
        u = rng.next_float() * total
        idx = int(np.searchsorted(np.cumsum(d2), u, side="right"))
        idx = min(idx, n - 1)
        centroids[j] = pixels[idx]
        d2 = np.minimum(d2, ((pixels - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _sq_distances(pixels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # |x - c|^2 expanded; clip tiny negatives from cancellation
    d2 = (
        (pixels**2).sum(axis=1)[:, None]
        - 2.0 * pixels @ centroids.T
        + (centroids**2).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def assign(model: KMeansModel, imagery: RasterStack) -> ClassRaster:
    """Label each pixel with its nearest centroid (ties -> lowest index)."""
    if imagery.channels != model.centroids.shape[1]:
        raise ValueError(
            f"imagery has {imagery.channels} bands but model expects "
            f"{model.centroids.shape[1]}"
        )
    pixels = (
        imagery.data.reshape(imagery.channels, -1).T.astype(np.float64)
    )
    # direct differences (not the expanded form) so exact ties stay exact
    d2 = ((pixels[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return ClassRaster(
        width=imagery.width,
        height=imagery.height,
        k=model.k,
        labels=labels.reshape(imagery.height, imagery.width).astype(np.int32),
    )
