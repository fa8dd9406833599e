"""Train/test split designs: random, distance-buffered, and region holdout."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import DatasetManifest
from .rng import Rng

EARTH_RADIUS_KM = 6371.0


class SplitError(ValueError):
    """The requested design is infeasible on this manifest."""


@dataclass(frozen=True)
class SplitAssignment:
    """Partition of manifest ids into train / test (/ quarantined)."""

    design: str
    params: dict
    seed: int
    train: tuple[str, ...]
    test: tuple[str, ...]
    quarantined: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))
        object.__setattr__(self, "quarantined", tuple(self.quarantined))
        groups = (self.train, self.test, self.quarantined)
        all_ids = [i for g in groups for i in g]
        if len(set(all_ids)) != len(all_ids):
            raise ValueError("train/test/quarantined must be pairwise disjoint")
        if not self.train or not self.test:
            raise SplitError("train and test must both be non-empty")

    def save(self, path: str | Path) -> None:
        payload = {
            "design": self.design,
            "params": self.params,
            "seed": self.seed,
            "train": list(self.train),
            "test": list(self.test),
            "quarantined": list(self.quarantined),
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SplitAssignment":
        d = json.loads(Path(path).read_text())
        return cls(
            design=d["design"],
            params=d["params"],
            seed=d["seed"],
            train=tuple(d["train"]),
            test=tuple(d["test"]),
            quarantined=tuple(d.get("quarantined", ())),
        )


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance between two lat/lon points in kilometers."""
    for lat in (lat1, lat2):
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude out of range: {lat}")
    for lon in (lon1, lon2):
        if not -180.0 <= lon <= 180.0:
            raise ValueError(f"longitude out of range: {lon}")
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(
        dlmb / 2.0
    ) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _shuffled_ids(manifest: DatasetManifest, seed: int) -> list[str]:
    ids = manifest.ids()
    Rng(seed).shuffle(ids)
    return ids


def split_random(
    manifest: DatasetManifest, test_frac: float, seed: int
) -> SplitAssignment:
    """Seeded shuffle; round(test_frac * N) samples become the test set."""
    if not 0.0 < test_frac < 1.0:
        raise ValueError(f"test_frac must lie in (0, 1), got {test_frac}")
    if len(manifest) == 0:
        raise SplitError("manifest is empty")
    ids = _shuffled_ids(manifest, seed)
    n_test = _round_half_up(test_frac * len(ids))
    if n_test == 0 or n_test == len(ids):
        raise SplitError(
            f"test_frac {test_frac} leaves an empty train or test set (N={len(ids)})"
        )
    return SplitAssignment(
        design="random",
        params={"test_frac": test_frac},
        seed=seed,
        train=tuple(sorted(ids[n_test:])),
        test=tuple(sorted(ids[:n_test])),
    )


def split_buffered(
    manifest: DatasetManifest, d_min_km: float, test_frac: float, seed: int
) -> SplitAssignment:
    """Random test set plus a quarantine buffer around it.

    Candidate train samples closer than ``d_min_km`` (great-circle, between
    sample centroids) to any test sample are assigned to neither set, so
    the minimum test-to-train distance is at least ``d_min_km``.
    """
    if not 0.0 < test_frac < 1.0:
        raise ValueError(f"test_frac must lie in (0, 1), got {test_frac}")
    if d_min_km < 0:
        raise ValueError(f"d_min_km must be nonnegative, got {d_min_km}")
    if len(manifest) == 0:
        raise SplitError("manifest is empty")
    ids = _shuffled_ids(manifest, seed)
    n_test = _round_half_up(test_frac * len(ids))
    if n_test == 0 or n_test == len(ids):
        raise SplitError(
            f"test_frac {test_frac} leaves an empty train or test set (N={len(ids)})"
        )
    test = ids[:n_test]
    test_coords = [(manifest.entry(i).lat, manifest.entry(i).lon) for i in test]
    train, quarantined = [], []
    for sid in ids[n_test:]:
        e = manifest.entry(sid)
        if any(
            haversine_km(e.lat, e.lon, tlat, tlon) < d_min_km
            for tlat, tlon in test_coords
        ):
            quarantined.append(sid)
        else:
            train.append(sid)
    if not train:
        raise SplitError(
            f"buffer of {d_min_km} km quarantines every candidate train sample"
        )
    return SplitAssignment(
        design="buffered",
        params={"d_min_km": d_min_km, "test_frac": test_frac},
        seed=seed,
        train=tuple(sorted(train)),
        test=tuple(sorted(test)),
        quarantined=tuple(sorted(quarantined)),
    )


def split_holdout_region(manifest: DatasetManifest, region: str) -> SplitAssignment:
    """Test on one region tag, train on everything else."""
    test = [e.id for e in manifest if e.region == region]
    train = [e.id for e in manifest if e.region != region]
    if not test:
        raise SplitError(f"no samples tagged with region {region!r}")
    if not train:
        raise SplitError(f"every sample is tagged {region!r}; train would be empty")
    return SplitAssignment(
        design="holdout_region",
        params={"region": region},
        seed=0,
        train=tuple(sorted(train)),
        test=tuple(sorted(test)),
    )
