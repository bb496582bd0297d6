"""Command line entry point: ``amrlab {baseline,evolve,eval-genome,compare}``."""
import argparse
import json
import sys
from pathlib import Path

from . import harness
from .errors import ContractError


def _parser():
    p = argparse.ArgumentParser(prog="amrlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for mode in harness.MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", type=Path, help="YAML experiment config")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int, help="evaluation worker processes")
        if mode == "eval-genome":
            sp.add_argument("--genome", help="genome text file")
    sp = sub.add_parser("compare")
    sp.add_argument("baseline", type=Path, help="baseline run dir or episodes.csv")
    sp.add_argument("evolve", type=Path, help="evolve run dir or generations.csv")
    sp.add_argument("--out", type=Path, help="write comparison.json here")
    return p


def _compare(args):
    base = args.baseline / "episodes.csv" if args.baseline.is_dir() else args.baseline
    evo = args.evolve / "generations.csv" if args.evolve.is_dir() else args.evolve
    try:
        summary = harness.compare(base, evo)
    except (ContractError, OSError, KeyError) as exc:
        print(f"compare: {exc}", file=sys.stderr)
        return 2
    print(summary.table())
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "comparison.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "compare":
        return _compare(args)
    overrides = {"mode": args.command, "master_seed": args.seed, "out_dir": args.out,
                 "workers": args.workers, "genome": getattr(args, "genome", None)}
    try:
        cfg = harness.load_config(args.config, **overrides)
    except (harness.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return harness.run(cfg)


if __name__ == "__main__":
    sys.exit(main())
