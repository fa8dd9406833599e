"""Connected-patch extraction and landscape-level metrics.

A patch is a maximal connected component of same-class cells (default
8-connectivity). Perimeters always count 4-adjacent cell edges that
border a different class or the raster boundary. On top of the patch
table the module computes:

* ``shdi``    Shannon diversity over class proportions.
* ``cohesion``  perimeter-area cohesion index, 0-100.
* ``connectance``  percentage of same-class patch pairs joined within a
  distance threshold (cell units, min cell-center distance).
* ``frac_mn``  mean patch fractal dimension ``2 ln(0.25 p) / ln(a)``
  with p, a in meters / square meters.
* ``mesh``    effective mesh size ``sum(a^2) / A`` in hectares.
* ``ndvi_mean``  mean of (nir - red) / (nir + red) over defined pixels.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .raster import RasterStack
from .segmentation import ClassRaster, KMeansModel, assign

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.int8)
_STRUCT_8 = np.ones((3, 3), dtype=np.int8)

M2_PER_HA = 10_000.0


@dataclass(frozen=True)
class Patch:
    patch_id: int
    class_id: int
    area_cells: int
    perimeter_edges: int
    cells: np.ndarray  # (area_cells, 2) int32 rows of (row, col)


@dataclass(frozen=True)
class PatchTable:
    patches: tuple[Patch, ...]
    total_cells: int
    cell_size_m: float
    width: int
    height: int


@dataclass(frozen=True)
class MetricConfig:
    connectivity: int = 8
    threshold_cells: float = 5.0

    def __post_init__(self):
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.threshold_cells <= 0:
            raise ValueError("threshold_cells must be positive")


@dataclass(frozen=True)
class LandscapeMetrics:
    shdi: float
    cohesion: float | None
    connect: float | None
    frac_mn: float | None
    mesh_ha: float
    ndvi_mean: float | None

    METRIC_NAMES = ("shdi", "cohesion", "connect", "frac_mn", "mesh_ha", "ndvi_mean")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.METRIC_NAMES}


def label_patches(
    cr: ClassRaster, connectivity: int = 8, cell_size_m: float = 43.0
) -> PatchTable:
    """Extract maximal connected same-class patches.

    Patch ids are assigned in raster scan order of each patch's first
    cell, which makes the numbering deterministic.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels = cr.labels
    h, w = labels.shape
    structure = _STRUCT_8 if connectivity == 8 else _STRUCT_4

    # global patch-id raster: per-class connected components, then renumber
    patch_ids = np.full((h, w), -1, dtype=np.int64)
    class_of = []
    offset = 0
    for c in np.unique(labels):
        comp, n = ndimage.label(labels == c, structure=structure)
        mask = comp > 0
        patch_ids[mask] = comp[mask] - 1 + offset
        class_of.extend([int(c)] * n)
        offset += n

    flat = patch_ids.ravel()
    uniq, first_idx, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(first_idx, kind="stable")
    remap = np.empty(uniq.size, dtype=np.int64)
    remap[order] = np.arange(uniq.size)
    flat = remap[inverse]
    patch_ids = flat.reshape(h, w)
    class_remapped = np.asarray(class_of, dtype=np.int64)[uniq[order]]
    n_patches = uniq.size

    areas = np.bincount(flat, minlength=n_patches)

    # 4-adjacent edges facing a different patch or the boundary
    perims = np.zeros(n_patches, dtype=np.int64)
    padded = np.pad(patch_ids, 1, constant_values=-1)
    for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        neighbor = padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
        edge = neighbor != patch_ids
        perims += np.bincount(patch_ids[edge], minlength=n_patches)

    by_patch = np.argsort(flat, kind="stable")
    bounds = np.searchsorted(flat[by_patch], np.arange(n_patches + 1))
    rows = (by_patch // w).astype(np.int32)
    cols = (by_patch % w).astype(np.int32)
    patches = []
    for p in range(n_patches):
        sl = slice(bounds[p], bounds[p + 1])
        cells = np.column_stack((rows[sl], cols[sl]))
        patches.append(
            Patch(
                patch_id=p,
                class_id=int(class_remapped[p]),
                area_cells=int(areas[p]),
                perimeter_edges=int(perims[p]),
                cells=cells,
            )
        )
    return PatchTable(
        patches=tuple(patches),
        total_cells=h * w,
        cell_size_m=float(cell_size_m),
        width=w,
        height=h,
    )


def shdi(pt: PatchTable) -> float:
    """Shannon diversity -sum(P_i ln P_i) over class cell proportions."""
    class_cells: dict[int, int] = {}
    for p in pt.patches:
        class_cells[p.class_id] = class_cells.get(p.class_id, 0) + p.area_cells
    total = pt.total_cells
    out = 0.0
    for cells in class_cells.values():
        prop = cells / total
        if prop > 0.0:
            out -= prop * math.log(prop)
    return out


def cohesion(pt: PatchTable) -> float | None:
    """Patch cohesion index in [0, 100]; None when the landscape is 1 cell.

    100 * [1 - sum(p) / sum(p sqrt(a))] / [1 - 1 / sqrt(Z)] with p, a in
    cell units and Z the landscape cell count.
    """
    z = pt.total_cells
    if z <= 1:
        return None
    sum_p = sum(p.perimeter_edges for p in pt.patches)
    sum_pa = sum(p.perimeter_edges * math.sqrt(p.area_cells) for p in pt.patches)
    value = 100.0 * (1.0 - sum_p / sum_pa) / (1.0 - 1.0 / math.sqrt(z))
    return min(100.0, max(0.0, value))


def connectance(pt: PatchTable, threshold_cells: float) -> float | None:
    """Joined same-class patch pairs as a percentage of all same-class pairs.

    A pair is joined when the minimum cell-center distance is at most
    ``threshold_cells`` (cell units). Classes with fewer than two patches
    contribute no pairs; None when no class has an evaluable pair.
    """
    by_class: dict[int, list[Patch]] = {}
    for p in pt.patches:
        by_class.setdefault(p.class_id, []).append(p)
    num = 0
    den = 0
    for group in by_class.values():
        n = len(group)
        if n < 2:
            continue
        den += n * (n - 1) // 2
        coords = np.concatenate([p.cells for p in group]).astype(np.float64)
        owner = np.concatenate(
            [np.full(p.area_cells, i, dtype=np.int64) for i, p in enumerate(group)]
        )
        pairs = cKDTree(coords).query_pairs(r=threshold_cells, output_type="ndarray")
        if pairs.size:
            joined = {
                (int(a), int(b))
                for a, b in zip(owner[pairs[:, 0]], owner[pairs[:, 1]])
                if a != b
            }
            num += len({(min(a, b), max(a, b)) for a, b in joined})
    if den == 0:
        return None
    return 100.0 * num / den


def frac_mn(pt: PatchTable) -> float | None:
    """Mean patch fractal dimension 2 ln(0.25 p) / ln(a), p/a in meters.

    Patches whose metric area is exactly 1 m^2 (ln a = 0) are excluded;
    None if that excludes everything.
    """
    s = pt.cell_size_m
    values = []
    for p in pt.patches:
        area_m2 = p.area_cells * s * s
        if area_m2 == 1.0:
            continue
        perim_m = p.perimeter_edges * s
        values.append(2.0 * math.log(0.25 * perim_m) / math.log(area_m2))
    if not values:
        return None
    return sum(values) / len(values)


def mesh(pt: PatchTable) -> float:
    """Effective mesh size sum(a^2)/A in hectares (a, A in square meters)."""
    cell_area = pt.cell_size_m**2
    total_m2 = pt.total_cells * cell_area
    sum_sq = sum((p.area_cells * cell_area) ** 2 for p in pt.patches)
    return sum_sq / total_m2 / M2_PER_HA


def ndvi_mean(imagery: RasterStack) -> float | None:
    """Mean (nir - red) / (nir + red); pixels with nir + red == 0 excluded."""
    nir = imagery.channel("nir").astype(np.float64)
    red = imagery.channel("red").astype(np.float64)
    denom = nir + red
    valid = denom != 0.0
    if not np.any(valid):
        return None
    return float(((nir[valid] - red[valid]) / denom[valid]).mean())


def compute_all(
    imagery: RasterStack, model: KMeansModel, cfg: MetricConfig = MetricConfig()
) -> LandscapeMetrics:
    """Segment with the fitted model, then evaluate every landscape metric."""
    cr = assign(model, imagery)
    pt = label_patches(cr, cfg.connectivity, imagery.cell_size_m)
    return LandscapeMetrics(
        shdi=shdi(pt),
        cohesion=cohesion(pt),
        connect=connectance(pt, cfg.threshold_cells),
        frac_mn=frac_mn(pt),
        mesh_ha=mesh(pt),
        ndvi_mean=ndvi_mean(imagery),
    )


# ---------------------------------------------------------------------------
# metrics.csv interchange


@dataclass(frozen=True)
class MetricsRow:
    sample_id: str
    source: str  # "target" | "generated"
    model_name: str  # empty for target rows
    k: int
    replicate: int
    shdi: float
    cohesion: float | None
    connect: float | None
    frac_mn: float | None
    mesh_ha: float
    ndvi_mean: float | None
    threshold_cells: float
    connectivity: int

    @classmethod
    def build(
        cls,
        sample_id: str,
        source: str,
        model_name: str,
        k: int,
        replicate: int,
        m: LandscapeMetrics,
        cfg: MetricConfig,
    ) -> "MetricsRow":
        return cls(
            sample_id=sample_id,
            source=source,
            model_name=model_name,
            k=k,
            replicate=replicate,
            shdi=m.shdi,
            cohesion=m.cohesion,
            connect=m.connect,
            frac_mn=m.frac_mn,
            mesh_ha=m.mesh_ha,
            ndvi_mean=m.ndvi_mean,
            threshold_cells=cfg.threshold_cells,
            connectivity=cfg.connectivity,
        )


METRICS_CSV_COLUMNS = tuple(f.name for f in fields(MetricsRow))


def format_value(v) -> str:
    """One canonical rendering shared by every CSV/SVG writer (NA -> '')."""
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_optional_float(s: str) -> float | None:
    return None if s == "" else float(s)


def write_metrics_csv(rows: Iterable[MetricsRow], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_CSV_COLUMNS)
        for r in rows:
            writer.writerow([format_value(getattr(r, c)) for c in METRICS_CSV_COLUMNS])


def read_metrics_csv(path: str | Path) -> list[MetricsRow]:
    out = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for d in reader:
            out.append(
                MetricsRow(
                    sample_id=d["sample_id"],
                    source=d["source"],
                    model_name=d["model_name"],
                    k=int(d["k"]),
                    replicate=int(d["replicate"]),
                    shdi=float(d["shdi"]),
                    cohesion=_parse_optional_float(d["cohesion"]),
                    connect=_parse_optional_float(d["connect"]),
                    frac_mn=_parse_optional_float(d["frac_mn"]),
                    mesh_ha=float(d["mesh_ha"]),
                    ndvi_mean=_parse_optional_float(d["ndvi_mean"]),
                    threshold_cells=float(d["threshold_cells"]),
                    connectivity=int(d["connectivity"]),
                )
            )
    return out
