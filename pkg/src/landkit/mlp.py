"""Per-pixel fully connected baseline: forward, exact backprop, Adam.

The network maps a vector of predictor values at one pixel to the four
reflectance bands (tanh hidden layers, identity output). Because it sees
single pixels it has no spatial context: permuting pixel positions of
the input permutes the prediction identically.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import DatasetManifest
from .raster import IMAGERY_BANDS, RasterStack, Sample
from .rng import Rng, hash_string, hash_words
from .splits import SplitAssignment

DEFAULT_HIDDEN = (64, 256, 364)

_MODEL_MAGIC = b"LSMP"
_MODEL_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class MlpParams:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]  # (fan_in, fan_out) per layer
    biases: list[np.ndarray]  # (fan_out,) per layer

    @property
    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class NormStats:
    """Per-channel z-score statistics, computed from the train split only."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 1024
    epochs: int = 8
    optimizer: str = "adam"  # "adam" | "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    pixels_per_image: int | None = 768  # None -> every pixel

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("invalid training hyperparameters")


def init_mlp(layer_sizes: Sequence[int], seed: int) -> MlpParams:
    """Glorot-uniform weights from the shared splitmix64 stream, zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output layer")
    if any(s < 1 for s in sizes):
        raise ValueError(f"layer sizes must be positive, got {sizes}")
    rng = Rng(hash_words(seed, hash_string("mlp-init")))
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        draws = rng.next_floats(fan_in * fan_out)
        weights.append(((draws * 2.0 - 1.0) * limit).reshape(fan_in, fan_out))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MlpParams(layer_sizes=sizes, weights=weights, biases=biases)


def forward(p: MlpParams, x: np.ndarray) -> np.ndarray:
    """Map inputs (n, P) or (P,) to outputs (n, 4) or (4,)."""
    single = np.ndim(x) == 1
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if a.shape[1] != p.layer_sizes[0]:
        raise ValueError(
            f"input width {a.shape[1]} != expected {p.layer_sizes[0]}"
        )
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        a = a @ w + b
        if i != last:
            a = np.tanh(a)
    return a[0] if single else a


def _forward_cached(p: MlpParams, x: np.ndarray) -> list[np.ndarray]:
    activations = [x]
    last = len(p.weights) - 1
    a = x
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        a = a @ w + b
        if i != last:
            a = np.tanh(a)
        activations.append(a)
    return activations


def backward(
    p: MlpParams, x: np.ndarray, target: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradients of the mean over examples of 0.5 * ||forward(x) - target||^2.

    Accepts a single example or a batch; a batch returns the mean of the
    per-example gradients.
    """
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t2 = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if x2.shape[0] != t2.shape[0] or t2.shape[1] != p.layer_sizes[-1]:
        raise ValueError(f"shape mismatch: inputs {x2.shape}, targets {t2.shape}")
    n = x2.shape[0]
    acts = _forward_cached(p, x2)
    delta = (acts[-1] - t2) / n
    d_weights = [np.empty(0)] * len(p.weights)
    d_biases = [np.empty(0)] * len(p.biases)
    for i in range(len(p.weights) - 1, -1, -1):
        d_weights[i] = acts[i].T @ delta
        d_biases[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ p.weights[i].T) * (1.0 - acts[i] ** 2)
    return d_weights, d_biases


def _gather_pixels(
    manifest: DatasetManifest,
    ids: Sequence[str],
    pixels_per_image: int | None,
    rng: Rng,
) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for sid in ids:
        sample = manifest.load_sample(sid)
        cond = sample.conditions.data.reshape(sample.conditions.channels, -1).T
        img = sample.imagery.data.reshape(4, -1).T
        if pixels_per_image is not None and pixels_per_image < cond.shape[0]:
            keep = rng.sample_indices(cond.shape[0], pixels_per_image)
            cond = cond[keep]
            img = img[keep]
        xs.append(cond.astype(np.float64))
        ys.append(img.astype(np.float64))
    return np.concatenate(xs), np.concatenate(ys)


def train_fc(
    manifest: DatasetManifest,
    split: SplitAssignment,
    cfg: TrainConfig,
    layer_sizes: Sequence[int] | None = None,
) -> tuple[MlpParams, NormStats, list[float]]:
    """Train on (pixel conditions -> pixel reflectance) from the train split.

    Returns (params, normalization stats, per-epoch loss curve); the loss
    is the mean squared error per band element. Deterministic in cfg.seed.
    """
    if not split.train:
        raise ValueError("train split is empty")
    rng = Rng(hash_words(cfg.seed, hash_string("fc-train")))
    x, y = _gather_pixels(manifest, split.train, cfg.pixels_per_image, rng)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    stats = NormStats(mean=mean, std=std)
    x = stats.apply(x)

    sizes = tuple(layer_sizes) if layer_sizes else (x.shape[1], *DEFAULT_HIDDEN, 4)
    if sizes[0] != x.shape[1] or sizes[-1] != 4:
        raise ValueError(f"layer_sizes {sizes} incompatible with data {x.shape[1]}->4")
    params = init_mlp(sizes, cfg.seed)

    adam_m = [np.zeros_like(w) for w in params.weights + params.biases]
    adam_v = [np.zeros_like(w) for w in params.weights + params.biases]
    step = 0
    losses: list[float] = []
    n = x.shape[0]
    for _epoch in range(cfg.epochs):
        order = rng.permutation(n)
        sq_err = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            xb, yb = x[batch], y[batch]
            acts = _forward_cached(params, xb)
            err = acts[-1] - yb
            sq_err += float((err**2).sum())
            delta = err / xb.shape[0]
            grads_w = [None] * len(params.weights)
            grads_b = [None] * len(params.biases)
            for i in range(len(params.weights) - 1, -1, -1):
                grads_w[i] = acts[i].T @ delta
                grads_b[i] = delta.sum(axis=0)
                if i > 0:
                    delta = (delta @ params.weights[i].T) * (1.0 - acts[i] ** 2)
            step += 1
            flat_params = params.weights + params.biases
            flat_grads = grads_w + grads_b
            if cfg.optimizer == "adam":
                for j, (theta, g) in enumerate(zip(flat_params, flat_grads)):
                    adam_m[j] = cfg.beta1 * adam_m[j] + (1 - cfg.beta1) * g
                    adam_v[j] = cfg.beta2 * adam_v[j] + (1 - cfg.beta2) * g**2
                    m_hat = adam_m[j] / (1 - cfg.beta1**step)
                    v_hat = adam_v[j] / (1 - cfg.beta2**step)
                    theta -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
            else:
                for theta, g in zip(flat_params, flat_grads):
                    theta -= cfg.learning_rate * g
        epoch_loss = sq_err / (n * 4)
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(
                f"epoch {_epoch}: loss {epoch_loss}; lower the learning rate"
            )
        losses.append(epoch_loss)
    return params, stats, losses


def predict_image(
    p: MlpParams, conditions: RasterStack, stats: NormStats
) -> RasterStack:
    """Per-pixel forward pass over a conditions stack, clamped to [0, 1]."""
    if conditions.channels != p.layer_sizes[0]:
        raise ValueError(
            f"conditions have {conditions.channels} channels, model expects "
            f"{p.layer_sizes[0]}"
        )
    x = conditions.data.reshape(conditions.channels, -1).T.astype(np.float64)
    out = forward(p, stats.apply(x))
    out = np.clip(out, 0.0, 1.0)
    bands = out.T.reshape(4, conditions.height, conditions.width)
    return RasterStack.from_array(IMAGERY_BANDS, bands, conditions.cell_size_m)


def shuffle_pixels(s: Sample, seed: int) -> Sample:
    """One seeded permutation of pixel positions, applied jointly.

    Conditions and imagery move together, so the per-pixel pairing (and
    any per-pixel statistic) is preserved while spatial structure is
    destroyed.
    """
    n = s.conditions.width * s.conditions.height
    perm = Rng(hash_words(seed, hash_string("pixel-shuffle"))).permutation(n)
    cond = s.conditions.data.reshape(s.conditions.channels, -1)[:, perm]
    img = s.imagery.data.reshape(4, -1)[:, perm]
    return Sample(
        id=s.id,
        lat=s.lat,
        lon=s.lon,
        region=s.region,
        conditions=RasterStack.from_array(
            s.conditions.channel_names,
            cond.reshape(s.conditions.channels, s.conditions.height, s.conditions.width),
            s.conditions.cell_size_m,
        ),
        imagery=RasterStack.from_array(
            IMAGERY_BANDS,
            img.reshape(4, s.imagery.height, s.imagery.width),
            s.imagery.cell_size_m,
        ),
    )


def save_fc_model(
    params: MlpParams,
    stats: NormStats,
    cfg: TrainConfig,
    out_dir: str | Path,
    losses: Sequence[float] = (),
) -> None:
    """Write fc_model.bin (flat f32 parameters) and fc_model.json metadata."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "fc_model.bin", "wb") as f:
        f.write(_MODEL_MAGIC)
        f.write(struct.pack("<HH", _MODEL_VERSION, len(params.layer_sizes)))
        f.write(struct.pack(f"<{len(params.layer_sizes)}I", *params.layer_sizes))
        for w, b in zip(params.weights, params.biases):
            f.write(w.astype("<f4").tobytes())
            f.write(b.astype("<f4").tobytes())
    meta = {
        "layer_sizes": list(params.layer_sizes),
        "normalization": {
            "mean": [float(v) for v in stats.mean],
            "std": [float(v) for v in stats.std],
        },
        "train_config": asdict(cfg),
        "loss_curve": [float(v) for v in losses],
    }
    (out_dir / "fc_model.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_fc_model(model_dir: str | Path) -> tuple[MlpParams, NormStats, dict]:
    model_dir = Path(model_dir)
    meta = json.loads((model_dir / "fc_model.json").read_text())
    raw = (model_dir / "fc_model.bin").read_bytes()
    if raw[:4] != _MODEL_MAGIC:
        raise ValueError("not an fc_model.bin file")
    version, n_layers = struct.unpack_from("<HH", raw, 4)
    if version != _MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    sizes = struct.unpack_from(f"<{n_layers}I", raw, 8)
    offset = 8 + 4 * n_layers
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(raw, dtype="<f4", count=fan_in * fan_out, offset=offset)
        offset += 4 * fan_in * fan_out
        b = np.frombuffer(raw, dtype="<f4", count=fan_out, offset=offset)
        offset += 4 * fan_out
        weights.append(w.reshape(fan_in, fan_out).astype(np.float64))
        biases.append(b.astype(np.float64))
    params = MlpParams(layer_sizes=tuple(sizes), weights=weights, biases=biases)
    stats = NormStats(
        mean=np.array(meta["normalization"]["mean"], dtype=np.float64),
        std=np.array(meta["normalization"]["std"], dtype=np.float64),
    )
    return params, stats, meta
