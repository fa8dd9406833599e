"""Training loop: alternating discriminator/generator updates.

Generator loss is adversarial + reconstruction-weighted L1 against the
target imagery; with the discriminator disabled the loop trains on mean
squared error alone and never touches the discriminator. Checkpoints
are written atomically (write to a temp file, then rename).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import load_pairs, read_catalog, read_split
from .models import GanConfig, build_models


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float = 2e-4
    beta1: float = 0.5
    batch_size: int = 8
    steps: int = 200
    seed: int = 0
    log_every: int = 1


class TrainingDiverged(RuntimeError):
    pass


def save_checkpoint(path: str | Path, payload: dict) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(path: str | Path) -> dict:
    return torch.load(Path(path), map_location="cpu", weights_only=False)


def reconstruction_loss(generator, conditions, imagery, batch_size=16) -> float:
    """Mean squared error of deterministic generations against targets."""
    generator.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for start in range(0, conditions.shape[0], batch_size):
            c = conditions[start : start + batch_size]
            y = imagery[start : start + batch_size]
            out = generator(c, active_dropout=False)
            total += float(((out - y) ** 2).sum())
            count += y.numel()
    generator.train()
    return total / count


def train(
    dataset_dir: str | Path,
    split_path: str | Path,
    cfg: GanConfig,
    hyper: HyperParams,
    out_dir: str | Path,
) -> Path:
    """Train on the split's train side; returns the checkpoint path.

    Writes ``checkpoint.pt`` and ``train_log.csv`` with columns
    (step, d_loss, g_adv, g_rec); adversarial columns stay empty when
    the discriminator is disabled.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(hyper.seed)

    info, entries = read_catalog(dataset_dir)
    train_ids, _ = read_split(split_path)
    pairs = load_pairs(entries, sorted(train_ids))
    n = pairs.conditions.shape[0]

    generator, discriminator, _ = build_models(cfg)
    generator.train()
    opt_g = torch.optim.Adam(
        generator.parameters(), lr=hyper.learning_rate, betas=(hyper.beta1, 0.999)
    )
    if cfg.use_discriminator:
        discriminator.train()
        opt_d = torch.optim.Adam(
            discriminator.parameters(), lr=hyper.learning_rate, betas=(hyper.beta1, 0.999)
        )
    bce = nn.BCELoss()
    l1 = nn.L1Loss()
    mse = nn.MSELoss()

    rng = np.random.default_rng(hyper.seed)
    log_rows = []
    for step in range(1, hyper.steps + 1):
        idx = torch.from_numpy(rng.integers(0, n, size=min(hyper.batch_size, n)))
        conditions = pairs.conditions[idx]
        target = pairs.imagery[idx]

        d_loss_val = ""
        g_adv_val = ""
        if cfg.use_discriminator:
            fake = generator(conditions)
            # discriminator update
            opt_d.zero_grad(set_to_none=True)
            p_real = discriminator(conditions, target)
            p_fake = discriminator(conditions, fake.detach())
            d_loss = 0.5 * (
                bce(p_real, torch.ones_like(p_real))
                + bce(p_fake, torch.zeros_like(p_fake))
            )
            d_loss.backward()
            opt_d.step()
            # generator update
            opt_g.zero_grad(set_to_none=True)
            p_fake = discriminator(conditions, fake)
            g_adv = bce(p_fake, torch.ones_like(p_fake))
            g_rec = l1(fake, target)
            g_loss = cfg.adversarial_weight * g_adv + cfg.reconstruction_weight * g_rec
            g_loss.backward()
            opt_g.step()
            d_loss_val = f"{float(d_loss.detach()):.6f}"
            g_adv_val = f"{float(g_adv.detach()):.6f}"
        else:
            opt_g.zero_grad(set_to_none=True)
            fake = generator(conditions)
            g_rec = mse(fake, target)
            g_rec.backward()
            opt_g.step()

        g_rec_val = float(g_rec.detach())
        if not np.isfinite(g_rec_val):
            raise TrainingDiverged(f"step {step}: reconstruction loss {g_rec_val}")
        if step % hyper.log_every == 0:
            log_rows.append((step, d_loss_val, g_adv_val, f"{g_rec_val:.6f}"))

    with open(out_dir / "train_log.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(("step", "d_loss", "g_adv", "g_rec"))
        writer.writerows(log_rows)

    checkpoint = out_dir / "checkpoint.pt"
    save_checkpoint(
        checkpoint,
        {
            "config": asdict(cfg),
            "hyper": asdict(hyper),
            "generator_state": generator.state_dict(),
            "discriminator_state": (
                discriminator.state_dict() if cfg.use_discriminator else None
            ),
            "cond_mean": pairs.cond_mean,
            "cond_std": pairs.cond_std,
            "predictor_names": info.get("predictor_names"),
        },
    )
    return checkpoint
