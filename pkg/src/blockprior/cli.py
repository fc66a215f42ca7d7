"""Command line interface.

Subcommands: bounds, weights, sensitivity, recover, sweep. Global flags:
--config <json>, --seed, --out, --format. Exit codes: 0 success, 2 config
error, 3 numerical failure.
"""

import argparse
import sys

import numpy as np

from .errors import ConfigError, DomainError, NumericalError
from .harness import (ExperimentConfig, emit, run_bounds_table,
                      run_phase_transition, run_sensitivity_table,
                      run_weights_table)
from .model import (BlockStructure, derive_seed, expand_weights, make_ensemble,
                    sample_instance)
from .solver import recover, recovery_success
from .weights import optimal_weights

_DEFAULT_ALPHA_GRID = tuple(round(0.01 * i, 2) for i in range(1, 101))


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="blockprior",
        description="Measurement bounds, optimal weights and recovery "
                    "experiments for block-sparse signals")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "svg"), default="csv")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("bounds", parents=[common],
                   help="tabulate measurement bounds over an s grid")
    sub.add_parser("weights", parents=[common],
                   help="tabulate optimal weights over an accuracy grid")
    sub.add_parser("sensitivity", parents=[common],
                   help="tabulate weight sensitivity over an accuracy grid")
    sub.add_parser("recover", parents=[common],
                   help="run one recovery instance and print diagnostics")
    sub.add_parser("sweep", parents=[common],
                   help="run a Monte-Carlo phase-transition sweep")
    return parser


def _load_config(args, default_mode):
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
    else:
        cfg = ExperimentConfig.from_dict({
            "mode": default_mode,
            "alpha_grid": list(_DEFAULT_ALPHA_GRID),
        })
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _cmd_recover(args):
    if not args.config:
        raise ConfigError("recover needs --config")
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if len(cfg.m_grid) != 1:
        raise ConfigError("recover uses a single-entry m_grid")
    partition = cfg.partition()
    structure_seed = derive_seed(cfg.seed, 0, 0, 0, 0)
    operator_seed = derive_seed(cfg.seed, 0, 0, 0, 1)
    structure = BlockStructure(n=cfg.n, q=cfg.q, k=cfg.k)
    instance = sample_instance(structure, partition, structure_seed)
    ensemble = make_ensemble(instance.x, cfg.m_grid[0], operator_seed)
    programs = cfg.programs or ("optimal",)
    if programs[0] == "unit":
        omega = np.ones(partition.L)
    elif programs[0] == "optimal":
        omega = np.array(optimal_weights(partition, cfg.k).omega_normalized)
    else:
        omega = np.asarray(programs[0], dtype=float)
    w = expand_weights(partition, omega)
    outcome = recover(ensemble, w, cfg.solver_config())
    solver_cfg = cfg.solver_config()
    lines = [
        f"m={cfg.m_grid[0]} n={cfg.n} q={cfg.q} k={cfg.k}",
        f"weights={','.join(format(o, 'g') for o in omega)}",
        f"iterations={outcome.iterations}",
        f"converged={outcome.converged}",
        f"certified={outcome.certified}",
        f"primal_residual={outcome.primal_residual:.6e}",
        f"objective={outcome.objective:.12g}",
        f"error_norm={np.linalg.norm(outcome.x_hat - instance.x):.6e}",
        f"success={recovery_success(outcome.x_hat, instance.x, solver_cfg.success_threshold)}",
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run(args):
    if args.command == "recover":
        _cmd_recover(args)
        return
    if args.command == "sweep":
        if not args.config:
            raise ConfigError("sweep needs --config")
        cfg = _load_config(args, None)
        result = run_phase_transition(cfg)
    elif args.command == "bounds":
        if not args.config:
            raise ConfigError("bounds needs --config (n, q, s_grid)")
        cfg = _load_config(args, "bounds-table")
        result = run_bounds_table(cfg)
    elif args.command == "weights":
        cfg = _load_config(args, "weights-table")
        result = run_weights_table(cfg.alpha_grid, cfg.k_list)
    else:  # sensitivity
        cfg = _load_config(args, "sensitivity-table")
        result = run_sensitivity_table(cfg.alpha_grid, cfg.k_list,
                                       cfg.flat_threshold or None)
    text = emit(result, args.format, args.out)
    if text is not None:
        sys.stdout.write(text)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        _run(args)
    except (ConfigError, DomainError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
