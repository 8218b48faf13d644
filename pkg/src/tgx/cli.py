"""Command line interface.

    tgx generate|train|explain|evaluate|report|grid --config <path> [--seed N] [--out DIR]

Exit codes: 0 on success, 2 on configuration errors, 3 on missing or stale
artifacts.  All artifact paths are relative to --out.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .data import ConfigurationError

COMMANDS = ("generate", "train", "explain", "evaluate", "report", "grid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tgx",
        description="dissemination-graph classifier with DMD/SINDy explanations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=Path, default=None,
                         help="flat key-value config file (defaults apply otherwise)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the global seed")
        cmd.add_argument("--out", type=Path, default=Path("run"),
                         help="run directory for all artifacts (default: ./run)")
    return parser


def _dispatch(args) -> int:
    overrides = {} if args.seed is None else {"seed": args.seed}
    cfg = load_config(args.config, overrides=overrides,
                      allow_lists=args.command == "grid")
    out = args.out
    # stage modules are imported lazily so that evaluate/report runs never
    # load any model code
    if args.command == "generate":
        from .pipeline import stage_generate
        stage_generate(cfg, out)
        print(f"wrote {out / 'dataset.jsonl'}")
    elif args.command == "train":
        from .pipeline import stage_train
        summary = stage_train(cfg, out, log=lambda rec: print(
            f"epoch {rec['epoch']:3d}  loss {rec['train_loss']:.4f}  "
            f"train_acc {rec['train_acc']:.3f}  val_acc {rec['val_acc']:.3f}"))
        print(f"best validation accuracy: {summary['accuracy']:.3f}")
    elif args.command == "explain":
        from .pipeline import stage_explain
        counts = stage_explain(cfg, out)
        print(f"wrote {counts['explanations']} explanation records and "
              f"{counts['edge_records']} edge-weight records")
    elif args.command == "evaluate":
        from .evaluate import stage_evaluate
        table = stage_evaluate(cfg, out)
        for key, row in table.items():
            print(f"{key}: {row['mean']:.4f} +/- {row['std']:.4f} (n={row['count']})")
    elif args.command == "report":
        from .evaluate import stage_report
        info = stage_report(cfg, out)
        print(f"report data for {len(info['graphs'])} graphs in {info['report_dir']}")
    elif args.command == "grid":
        from .pipeline import stage_grid
        result = stage_grid(cfg, out)
        print(f"best model: {result['best_model'] or 'defaults'}")
        print(f"best explainer: {result['best_explainer'] or 'defaults'}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, ConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - map artifact errors to exit codes
        from .artifacts import MissingArtifactError, StaleArtifactError
        if isinstance(exc, (MissingArtifactError, StaleArtifactError)):
            print(f"artifact error: {exc}", file=sys.stderr)
            return 3
        raise


if __name__ == "__main__":
    sys.exit(main())
