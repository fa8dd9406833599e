"""Robust correlation of generated-vs-target metric vectors.

The headline statistic is the biweight midcorrelation: observations are
centered on the median, downweighted by Tukey's biweight around
9 * MAD, and correlated after normalizing to unit Euclidean norm. When
the MAD of either vector is zero the biweight weights are undefined and
the function falls back to the Pearson correlation; zero-variance input
yields NA (None). Results are always clamped to [-1, 1].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .metrics import LandscapeMetrics, MetricsRow, format_value


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Product-moment correlation; None when either vector has no variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_lengths(x, y)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc**2).sum() * (yc**2).sum())
    if denom == 0.0:
        return None
    return float(np.clip((xc * yc).sum() / denom, -1.0, 1.0))


def bicor(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Biweight midcorrelation of two equal-length vectors (n >= 2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_lengths(x, y)
    xt = _biweight_normalized(x)
    yt = _biweight_normalized(y)
    if xt is None or yt is None:
        return pearson(x, y)
    return float(np.clip((xt * yt).sum(), -1.0, 1.0))


def _check_lengths(x: np.ndarray, y: np.ndarray) -> None:
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise ValueError(f"need equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ValueError("need at least two observations")


def _biweight_normalized(x: np.ndarray) -> np.ndarray | None:
    """Median-centered, biweighted copy of x scaled to unit norm.

    None signals that the caller must fall back to Pearson (MAD == 0) --
    the 9 * MAD denominator is undefined there.
    """
    med = np.median(x)
    dev = x - med
    mad = np.median(np.abs(dev))
    if mad == 0.0:
        return None
    u = dev / (9.0 * mad)
    w = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    w[inside] = (1.0 - u[inside] ** 2) ** 2
    t = dev * w
    norm = np.sqrt((t**2).sum())
    if norm == 0.0:
        return None
    return t / norm


@dataclass(frozen=True)
class CorrelationRow:
    """Replicate-aggregated correlation for one (model, design, k, metric)."""

    model_name: str
    split_design: str
    k: int
    metric_name: str
    bicor: float | None  # mean over non-NA replicates
    bicor_sd: float | None  # population sd over those replicates
    n_pairs: int  # min pair count among contributing replicates
    n_replicates: int  # replicates with a defined correlation


REPORT_CSV_COLUMNS = tuple(f.name for f in fields(CorrelationRow))


def correlation_table(
    metric_rows: Iterable[MetricsRow], split_design: str
) -> tuple[list[CorrelationRow], int]:
    """Correlate generated against target metric rows.

    Rows pair by (k, replicate, sample_id); per metric, pairs where
    either side is NA are dropped. The per-replicate correlations are
    aggregated to mean and population sd. Returns (rows, n_unpaired)
    where n_unpaired counts generated/target rows without a twin.
    """
    targets: dict[tuple[int, int, str], MetricsRow] = {}
    generated: dict[tuple[str, int, int], dict[str, MetricsRow]] = {}
    for row in metric_rows:
        if row.source == "target":
            targets[(row.k, row.replicate, row.sample_id)] = row
        elif row.source == "generated":
            generated.setdefault((row.model_name, row.k, row.replicate), {})[
                row.sample_id
            ] = row
        else:
            raise ValueError(f"unknown source {row.source!r}")

    unpaired = 0
    paired_target_keys = set()
    # per (model, k, metric): list over replicates of (bicor | None, n_pairs)
    cells: dict[tuple[str, int, str], list[tuple[float | None, int]]] = {}
    for (model_name, k, replicate), by_id in sorted(generated.items()):
        pairs = []
        for sid, grow in by_id.items():
            trow = targets.get((k, replicate, sid))
            if trow is None:
                unpaired += 1
                continue
            paired_target_keys.add((k, replicate, sid))
            pairs.append((trow, grow))
        for metric in LandscapeMetrics.METRIC_NAMES:
            xs = [
                (getattr(t, metric), getattr(g, metric))
                for t, g in pairs
                if getattr(t, metric) is not None and getattr(g, metric) is not None
            ]
            value: float | None
            if len(xs) < 2:
                value = None
            else:
                value = bicor([a for a, _ in xs], [b for _, b in xs])
            cells.setdefault((model_name, k, metric), []).append((value, len(xs)))
    unpaired += sum(1 for key in targets if key not in paired_target_keys)

    out = []
    for (model_name, k, metric), reps in sorted(cells.items()):
        defined = [(v, n) for v, n in reps if v is not None]
        if defined:
            values = np.array([v for v, _ in defined], dtype=np.float64)
            row = CorrelationRow(
                model_name=model_name,
                split_design=split_design,
                k=k,
                metric_name=metric,
                bicor=float(values.mean()),
                bicor_sd=float(values.std()),
                n_pairs=min(n for _, n in defined),
                n_replicates=len(defined),
            )
        else:
            row = CorrelationRow(
                model_name=model_name,
                split_design=split_design,
                k=k,
                metric_name=metric,
                bicor=None,
                bicor_sd=None,
                n_pairs=0,
                n_replicates=0,
            )
        out.append(row)
    return out, unpaired


def write_report_csv(rows: Iterable[CorrelationRow], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(REPORT_CSV_COLUMNS)
        for r in rows:
            writer.writerow([format_value(getattr(r, c)) for c in REPORT_CSV_COLUMNS])


def read_report_csv(path: str | Path) -> list[CorrelationRow]:
    out = []
    with open(path, newline="") as f:
        for d in csv.DictReader(f):
            out.append(
                CorrelationRow(
                    model_name=d["model_name"],
                    split_design=d["split_design"],
                    k=int(d["k"]),
                    metric_name=d["metric_name"],
                    bicor=None if d["bicor"] == "" else float(d["bicor"]),
                    bicor_sd=None if d["bicor_sd"] == "" else float(d["bicor_sd"]),
                    n_pairs=int(d["n_pairs"]),
                    n_replicates=int(d["n_replicates"]),
                )
            )
    return out
