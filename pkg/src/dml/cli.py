"""Command-line entry point.

    dml run --task bandit --backend spiking --seed 7 --out results/run1
    dml sweep --param T --values 8 16 32 64 --seeds 5 --out results/tsweep
    dml compare results/run_spiking results/run_cpu --out results/cmp

``--config FILE`` supplies an experiment config as JSON (keys: task,
backend, epochs, epsilon, window, theta, dq, seed, checkpoint_every, and
task sub-configs ``bandit``/``maze``); command-line flags override file
values. Exit codes: 2 invalid configuration, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .envs import EnvError
from .harness import (
    BACKENDS,
    SWEEP_PARAMS,
    TASKS,
    ConfigError,
    ExperimentConfig,
    compare,
    run,
    sweep,
)

EXIT_CONFIG = 2
EXIT_IO = 3


def _build_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json_file(args.config)
    else:
        if not args.task:
            raise ConfigError("either --config or --task is required")
        cfg = ExperimentConfig(task=args.task)
    overrides = {}
    for name in ("task", "backend", "epochs", "epsilon", "window", "theta",
                 "dq", "seed", "checkpoint_every"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    return replace(cfg, **overrides) if overrides else cfg


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--config", metavar="FILE", help="JSON experiment config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--window", "-T", dest="window", type=int,
                   help="rate-coding window length")
    p.add_argument("--theta", type=int)
    p.add_argument("--dq", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dml", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    _add_config_flags(p_run)
    p_run.add_argument("--out", required=True, metavar="DIR")
    p_run.add_argument("--force", action="store_true",
                       help="overwrite a non-empty output directory")

    p_sweep = sub.add_parser("sweep", help="sweep a parameter across seeds")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    p_sweep.add_argument("--values", required=True, nargs="+", type=float)
    p_sweep.add_argument("--seeds", type=int, default=5)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--out", required=True, metavar="DIR")
    p_sweep.add_argument("--force", action="store_true")

    p_cmp = sub.add_parser("compare", help="compare two run directories")
    p_cmp.add_argument("dir_a")
    p_cmp.add_argument("dir_b")
    p_cmp.add_argument("--out", metavar="DIR")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = _build_config(args)
            manifest = run(cfg, args.out, force=args.force)
            print(json.dumps(manifest["summary"], indent=1, sort_keys=True))
        elif args.command == "sweep":
            cfg = _build_config(args)
            values = [
                int(v) if args.param in ("T", "theta") else v for v in args.values
            ]
            sweep(cfg, args.param, values, args.out, seeds=args.seeds,
                  workers=args.workers, force=args.force)
            print(f"sweep complete: {args.out}/summary.csv")
        elif args.command == "compare":
            report = compare(args.dir_a, args.dir_b, out_dir=args.out)
            brief = {k: v for k, v in report.items()
                     if k in ("task", "jsd_bits", "policy_disagreement_fraction",
                              "spikes_per_epoch")}
            print(json.dumps(brief, indent=1, sort_keys=True))
    except (ConfigError, EnvError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
