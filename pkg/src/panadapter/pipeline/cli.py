"""Command-line entry point: ``panadapter <command> [--config F] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .checkpoint import CheckpointError, count_params, load_checkpoint
from .config import ConfigError, RunConfig, load_config

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
ABLATIONS = {
    "no-ctf": "no_ctf",
    "no-cti": "no_cti",
    "single-stage": "single_stage",
    "replace-inr": "replace_inr",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _add_globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="INI-style run configuration")
    parser.add_argument("--seed", type=int, default=default, help="run seed (u64)")
    parser.add_argument("--out", default=default, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="panadapter", description="Two-stage adapter pansharpening at desk scale")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _add_globals(p, suppress=True)
        return p

    command("gen-data", "synthesise the Wald-protocol dataset")
    command("pretrain", "pretrain and freeze the EDSR and ViT backbones")
    p = command("train", "train one stage")
    p.add_argument("--stage", type=int, choices=(1, 2), required=True)
    p = command("eval", "score a split and write a report")
    p.add_argument("--split", choices=("reduced", "full"), required=True)
    p.add_argument("--stage", type=int, choices=(1, 2), default=2)
    p.add_argument("--predictor", choices=("model", "gt", "bicubic"), default="model")
    command("gradcheck", "finite-difference check of every op and both stage graphs")
    p = command("params", "parameter accounting of a checkpoint")
    p.add_argument("--ckpt", help="checkpoint directory (default: <out>/ckpt/stage2)")
    p = command("ablate", "train and evaluate one ablation variant")
    p.add_argument("variant", choices=sorted(ABLATIONS))
    command("run", "gen-data, pretrain, train 1, train 2, eval reduced and full")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    return cfg.replace(**changes)


def _fmt_report(report) -> str:
    mean, std = report.mean(), report.std()
    return "  ".join(f"{c}={mean[c]:.4f}±{std[c]:.4f}" for c in report.columns)


def cmd_gen_data(cfg, args) -> int:
    manifest = generate_data(cfg)
    print(f"wrote {sum(manifest.splits.values())} samples to {cfg.data_path}")
    return EXIT_OK


def cmd_pretrain(cfg, args) -> int:
    hashes = pretrain(cfg)
    for part, digest in hashes.items():
        print(f"{part}: {digest}")
    return EXIT_OK


def cmd_train(cfg, args) -> int:
    ckpt = train_stage1(cfg) if args.stage == 1 else train_stage2(cfg)
    total, trainable, frac = count_params(ckpt)
    print(f"stage {args.stage} checkpoint {ckpt.hash} trainable {trainable}/{total} ({frac:.2%})")
    return EXIT_OK


def cmd_eval(cfg, args) -> int:
    report = evaluate(cfg, args.split, stage=args.stage, predictor=args.predictor)
    print(_fmt_report(report))
    return EXIT_OK


def cmd_gradcheck(cfg, args) -> int:
    from .gradsuite import GRAPH_TOLERANCE, OP_TOLERANCE, run_graph_checks, run_op_checks

    ok = True
    for results, tol in ((run_op_checks(cfg.seed), OP_TOLERANCE),
                         (run_graph_checks(seed=cfg.seed), GRAPH_TOLERANCE)):
        for name, err in results.items():
            passed = err < tol
            ok &= passed
            print(f"{name:24s} {err:.3e}  {'ok' if passed else 'FAIL'} (< {tol:g})")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_params(cfg, args) -> int:
    path = Path(args.ckpt) if args.ckpt else ckpt_dir(cfg.out_path, "stage2")
    total, trainable, frac = count_params(load_checkpoint(path))
    print(f"total {total}\ntrainable {trainable}\nfraction {frac:.6f}")
    return EXIT_OK


def cmd_ablate(cfg, args) -> int:
    out = cfg.out_path / "ablate" / args.variant
    variant = cfg.replace(**{ABLATIONS[args.variant]: True}, out_dir=str(out),
                          data_dir=str(cfg.data_path))
    pretrain_dir = ckpt_dir(cfg.out_path, "pretrain")
    if args.variant == "replace-inr":
        train_stage1(variant, pretrain_dir=pretrain_dir)
        train_stage2(variant, pretrain_dir=pretrain_dir)
    elif args.variant == "single-stage":
        train_stage2(variant, pretrain_dir=pretrain_dir)
    else:
        train_stage2(variant, stage1_dir=ckpt_dir(cfg.out_path, "stage1"),
                     pretrain_dir=pretrain_dir)
    report = evaluate(variant, "reduced", stage=2)
    print(f"{args.variant}: {_fmt_report(report)}")
    return EXIT_OK


def cmd_run(cfg, args) -> int:
    generate_data(cfg)
    pretrain(cfg)
    train_stage1(cfg)
    train_stage2(cfg)
    for split in ("reduced", "full"):
        print(f"{split}: {_fmt_report(evaluate(cfg, split, stage=2))}")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data, "pretrain": cmd_pretrain, "train": cmd_train, "eval": cmd_eval,
    "gradcheck": cmd_gradcheck, "params": cmd_params, "ablate": cmd_ablate, "run": cmd_run,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
    except UsageError:
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"panadapter: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](cfg, args)
    except (CheckpointError, ConfigError, OSError, RuntimeError, ValueError) as exc:
        print(f"panadapter: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


# imported late so `--help` stays fast
from .evaluate import evaluate  # noqa: E402
from .train import ckpt_dir, generate_data, pretrain, train_stage1, train_stage2  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
