"""Command-line surface.

Subcommands: gen-data, pretrain, linear-eval, semi-eval, ensemble-3s,
export-embeddings, lr-table.  Exit codes: 0 success, 2 configuration
error, 3 data error, 4 numerical fault.
"""

from __future__ import annotations

import argparse
import os
import sys

from .checkpoint import load_checkpoint
from .config import desk_preset, load_config
from .data import (
    SyntheticActionSpec,
    export_embeddings,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .errors import ConfigError, DataError, TrainingFault
from .evaluate import ensemble_3s, linear_eval, semi_supervised_finetune
from .optim import lr_schedule
from .training import encoder_from_checkpoint, pretrain

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _load_train_config(args):
    cfg = load_config(args.config) if args.config else desk_preset()
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "modality", None):
        from dataclasses import replace
        cfg = replace(cfg, modality=args.modality)
    return cfg


def cmd_gen_data(args):
    spec = SyntheticActionSpec(class_count=args.classes,
                               samples_per_class=args.per_class,
                               frame_count=args.frames,
                               noise_sigma=args.noise_sigma,
                               seed=args.seed if args.seed is not None else 0)
    ds = generate_synthetic(spec)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)) or ".", exist_ok=True)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} sequences "
          f"({spec.class_count} classes x {spec.samples_per_class}) to {args.out}")
    return 0


def cmd_pretrain(args):
    cfg = _load_train_config(args)
    dataset = load_dataset(args.data)
    records = []
    ckpt = pretrain(cfg, dataset, out_dir=args.out, epoch_records=records,
                    resume_from=args.checkpoint)
    final = records[-1] if records else {}
    print(f"pretrained {cfg.epochs} epochs (mode={cfg.loss_mode}, "
          f"modality={cfg.modality}); final loss "
          f"{final.get('loss', float('nan')):.4f}; "
          f"checkpoint at {os.path.join(args.out, 'checkpoint.skcp')}")
    return 0


def cmd_linear_eval(args):
    ckpt = load_checkpoint(args.checkpoint)
    train_set = load_dataset(args.train_data)
    test_set = load_dataset(args.test_data)
    acc = linear_eval(ckpt, train_set, test_set)
    print(f"linear evaluation top-1 accuracy: {acc:.4f}")
    return 0


def cmd_semi_eval(args):
    ckpt = load_checkpoint(args.checkpoint)
    train_set = load_dataset(args.train_data)
    test_set = load_dataset(args.test_data)
    acc = semi_supervised_finetune(ckpt, args.fraction, train_set, test_set,
                                   seed=args.seed if args.seed is not None else 0,
                                   from_random_init=args.from_random_init)
    init = "random-init" if args.from_random_init else "pretrained"
    print(f"semi-supervised ({args.fraction:.0%} labels, {init}) accuracy: {acc:.4f}")
    return 0


def cmd_ensemble_3s(args):
    ckpts = {"joint": load_checkpoint(args.joint),
             "bone": load_checkpoint(args.bone),
             "motion": load_checkpoint(args.motion)}
    train_set = load_dataset(args.train_data)
    test_set = load_dataset(args.test_data)
    acc = ensemble_3s(ckpts, train_set, test_set)
    print(f"three-stream ensemble accuracy: {acc:.4f}")
    return 0


def cmd_export_embeddings(args):
    ckpt = load_checkpoint(args.checkpoint)
    encoder = encoder_from_checkpoint(ckpt)
    ds = load_dataset(args.data)
    count = export_embeddings(encoder, ds, args.out)
    print(f"wrote {count} embedding rows to {args.out}")
    return 0


def cmd_lr_table(args):
    cfg = _load_train_config(args)
    step = max(1, cfg.epochs // args.rows)
    print("epoch\tlearning_rate")
    for epoch in range(0, cfg.epochs + 1, step):
        print(f"{epoch}\t{lr_schedule(epoch, cfg):.6g}")
    if cfg.epochs % step:
        print(f"{cfg.epochs}\t{lr_schedule(cfg.epochs, cfg):.6g}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="skelrep",
        description="Unsupervised skeleton action representation learning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic labeled dataset")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--per-class", type=int, default=150)
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--noise-sigma", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("pretrain", help="run unsupervised pretraining")
    p.add_argument("--config", help="JSON config file (defaults to the desk preset)")
    p.add_argument("--data", required=True, help="dataset .npz from gen-data")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--modality", choices=["joint", "bone", "motion"])
    p.add_argument("--checkpoint", help="resume from this checkpoint")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("linear-eval", help="frozen-encoder linear probe")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train-data", required=True)
    p.add_argument("--test-data", required=True)
    p.set_defaults(func=cmd_linear_eval)

    p = sub.add_parser("semi-eval", help="semi-supervised fine-tuning")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train-data", required=True)
    p.add_argument("--test-data", required=True)
    p.add_argument("--fraction", type=float, choices=[0.01, 0.10], default=0.10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--from-random-init", action="store_true",
                   help="baseline: ignore the pretrained weights")
    p.set_defaults(func=cmd_semi_eval)

    p = sub.add_parser("ensemble-3s", help="joint+bone+motion score fusion")
    p.add_argument("--joint", required=True, help="joint-stream checkpoint")
    p.add_argument("--bone", required=True, help="bone-stream checkpoint")
    p.add_argument("--motion", required=True, help="motion-stream checkpoint")
    p.add_argument("--train-data", required=True)
    p.add_argument("--test-data", required=True)
    p.set_defaults(func=cmd_ensemble_3s)

    p = sub.add_parser("export-embeddings", help="write per-sample embeddings CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_embeddings)

    p = sub.add_parser("lr-table", help="print the learning-rate schedule")
    p.add_argument("--config")
    p.add_argument("--rows", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_lr_table)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingFault as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
