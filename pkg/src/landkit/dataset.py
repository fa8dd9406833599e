"""Dataset catalog: dataset.json + manifest.jsonl + per-sample LSCP pairs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .raster import RasterStack, Sample, read_raster_file

GENERATOR_VERSION = "1.0.0"


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    lat: float
    lon: float
    region: str
    conditions_path: str
    imagery_path: str


@dataclass
class DatasetManifest:
    """Catalog of all samples in a dataset directory."""

    root: Path
    seed: int
    cell_size_m: float
    predictor_names: tuple[str, ...]
    n_samples: int
    entries: list[ManifestEntry] = field(default_factory=list)
    generator_version: str = GENERATOR_VERSION

    def __post_init__(self):
        self.root = Path(self.root)
        self._by_id = {e.id: e for e in self.entries}

    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def entry(self, sample_id: str) -> ManifestEntry:
        try:
            return self._by_id[sample_id]
        except KeyError:
            raise KeyError(f"sample {sample_id!r} not in manifest") from None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def load_conditions(self, sample_id: str) -> RasterStack:
        return read_raster_file(self.root / self.entry(sample_id).conditions_path)

    def load_imagery(self, sample_id: str) -> RasterStack:
        return read_raster_file(self.root / self.entry(sample_id).imagery_path)

    def load_sample(self, sample_id: str) -> Sample:
        e = self.entry(sample_id)
        return Sample(
            id=e.id,
            lat=e.lat,
            lon=e.lon,
            region=e.region,
            conditions=self.load_conditions(sample_id),
            imagery=self.load_imagery(sample_id),
        )

    def save(self) -> None:
        """Write dataset.json and manifest.jsonl under the root."""
        self.root.mkdir(parents=True, exist_ok=True)
        info = {
            "seed": self.seed,
            "cell_size_m": self.cell_size_m,
            "predictor_names": list(self.predictor_names),
            "generator_version": self.generator_version,
            "n_samples": self.n_samples,
        }
        (self.root / "dataset.json").write_text(json.dumps(info, indent=2) + "\n")
        with open(self.root / "manifest.jsonl", "w") as f:
            for e in self.entries:
                f.write(
                    json.dumps(
                        {
                            "id": e.id,
                            "lat": e.lat,
                            "lon": e.lon,
                            "region": e.region,
                            "conditions_path": e.conditions_path,
                            "imagery_path": e.imagery_path,
                        }
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, root: str | Path) -> "DatasetManifest":
        root = Path(root)
        info = json.loads((root / "dataset.json").read_text())
        entries = []
        with open(root / "manifest.jsonl") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                d = json.loads(line)
                entries.append(
                    ManifestEntry(
                        id=d["id"],
                        lat=d["lat"],
                        lon=d["lon"],
                        region=d["region"],
                        conditions_path=d["conditions_path"],
                        imagery_path=d["imagery_path"],
                    )
                )
        return cls(
            root=root,
            seed=info["seed"],
            cell_size_m=info["cell_size_m"],
            predictor_names=tuple(info["predictor_names"]),
            n_samples=info["n_samples"],
            entries=entries,
            generator_version=info.get("generator_version", GENERATOR_VERSION),
        )
