"""Command line for training, generation, and parameter audits."""

from __future__ import annotations

import argparse
import sys

from .models import GAN_1GB_FILTERS, GAN_7GB_FILTERS, GanConfig, build_models, gan_1gb, gan_7gb
from .train import HyperParams, train


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def cmd_train(args) -> int:
    cfg = GanConfig(
        generator_filters=args.generator_filters,
        discriminator_filters=args.discriminator_filters,
        in_channels=args.in_channels,
        reconstruction_weight=args.reconstruction_weight,
        use_discriminator=not args.no_discriminator,
        test_time_dropout=not args.no_test_time_dropout,
    )
    hyper = HyperParams(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        steps=args.steps,
        seed=args.seed,
    )
    checkpoint = train(args.dataset, args.split, cfg, hyper, args.out)
    print(f"checkpoint -> {checkpoint}")
    return 0


def cmd_generate(args) -> int:
    from .generate import generate

    written = generate(
        args.checkpoint,
        args.conditions,
        args.out,
        n_draws=args.n_draws,
        split_path=args.split,
        seed=args.seed,
    )
    print(f"wrote {len(written)} generated rasters -> {args.out}")
    return 0


def cmd_audit(args) -> int:
    for name, cfg in (("GAN 1 Gb", gan_1gb()), ("GAN 7 Gb", gan_7gb())):
        _, _, counts = build_models(cfg, device="meta")
        print(
            f"{name}: generator {counts['generator']:,} + discriminator "
            f"{counts['discriminator']:,} = {counts['total']:,} parameters"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgan-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a dataset directory + split file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--generator-filters", type=_int_list, default=(16, 32, 64, 64))
    p.add_argument("--discriminator-filters", type=_int_list, default=(16, 32, 1))
    p.add_argument("--in-channels", type=int, default=8)
    p.add_argument("--reconstruction-weight", type=float, default=100.0)
    p.add_argument("--no-discriminator", action="store_true")
    p.add_argument("--no-test-time-dropout", action="store_true")
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate imagery for condition rasters")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--conditions", required=True, help="dataset dir or dir of <id>.lscp")
    p.add_argument("--split", default=None, help="restrict a dataset dir to its test ids")
    p.add_argument("--out", required=True)
    p.add_argument("--n-draws", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("audit", help="print reference-size parameter counts")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
