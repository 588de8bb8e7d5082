#!/usr/bin/env python3
"""
Command-line interface for the CNOMA-OAM capacity toolkit.

Exit codes: 0 on success, 2 for usage, configuration and infeasible
allocation errors, 3 for numeric failures (series truncation, overflow,
special-function domain errors).
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from splurge_cnoma_capacity.config import (
    FIGURE_PRESETS,
    METHODS,
    OAM_MODELS,
    SWEEP_CONSTRAINTS,
    SWEEP_VARIABLES,
    RunConfig,
    create_sample_config,
    load_config,
)
from splurge_cnoma_capacity.exceptions import (
    CapacityError,
    DomainError,
    InfeasibleAllocationError,
    NumericOverflowError,
    SeriesTruncationError,
)
from splurge_cnoma_capacity.experiments import (
    OptimumResult,
    ResultTable,
    SweepConstraint,
    SweepVariable,
    build_sweep_spec,
    find_optimal_pn2,
    summarize,
    sweep,
    write_csv,
)
from splurge_cnoma_capacity.mc_sim import BaselineSplit, Scheme
from splurge_cnoma_capacity.results_store import ResultStoreFactory

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

_DEFAULT_STORE = "./results"
_OPTIMIZE_STEP = 0.05

# RunConfig keys settable by flag; the argparse dest equals the key.
_FLAG_KEYS = (
    "figure", "rho_db", "p_f", "p_n1", "p_n2", "total_power",
    "k_bs_ccu", "k_bs_ceu", "k_ccu_ceu", "omega_bs_ccu", "omega_bs_ceu", "omega_ccu_ceu",
    "d_ccu", "d_ceu", "oam_mode", "antennas", "oam_model",
    "max_order", "tail_tolerance", "trials", "seed", "threads", "block_size",
    "baseline_split", "sweep_constraint", "sweep_variable", "grid_start", "grid_stop", "grid_step",
    "schemes", "methods", "output", "db", "verbose",
)

_LINK_LABELS = (("bs_ccu", "BS-CCU"), ("bs_ceu", "BS-CEU"), ("ccu_ceu", "CCU-CEU"))


def _scheme_choice(value: str) -> str:
    if value.strip().lower() == "all":
        return "all"
    try:
        return Scheme.parse(value).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _scheme_value(value: str) -> str:
    try:
        return Scheme.parse(value).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _common_options() -> argparse.ArgumentParser:
    defaults = RunConfig()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='JSON configuration file (flat RunConfig keys) (default: none)')
    common.add_argument(
        '--figure', type=int, choices=sorted(FIGURE_PRESETS), help='Apply a reference figure preset (default: none)'
    )

    point = common.add_argument_group('operating point')
    point.add_argument('--rho-db', dest='rho_db', type=float, help=f'Transmit SNR in dB (default: {defaults.rho_db})')
    point.add_argument('--pf', dest='p_f', type=float, help=f'CEU power fraction (default: {defaults.p_f})')
    point.add_argument('--pn1', dest='p_n1', type=float, help=f'CCU NOMA power fraction (default: {defaults.p_n1})')
    point.add_argument('--pn2', dest='p_n2', type=float, help=f'OAM power fraction (default: {defaults.p_n2})')
    point.add_argument(
        '--total-power', dest='total_power', type=float, help=f'Total power P (default: {defaults.total_power})'
    )

    channel = common.add_argument_group('channel')
    for link, label in _LINK_LABELS:
        flag = link.replace('_', '-')
        channel.add_argument(
            f'--k-{flag}', dest=f'k_{link}', type=float,
            help=f'Rician K-factor of the {label} link (default: {getattr(defaults, "k_" + link)})'
        )
        channel.add_argument(
            f'--omega-{flag}', dest=f'omega_{link}', type=float,
            help=f'Average power gain of the {label} link (default: {getattr(defaults, "omega_" + link)})'
        )
    channel.add_argument(
        '--d-ccu', dest='d_ccu', type=float, help=f'BS-CCU distance, recorded only (default: {defaults.d_ccu})'
    )
    channel.add_argument(
        '--d-ceu', dest='d_ceu', type=float, help=f'BS-CEU distance, recorded only (default: {defaults.d_ceu})'
    )
    channel.add_argument(
        '--oam-mode', dest='oam_mode', type=int, help=f'OAM mode number (default: {defaults.oam_mode})'
    )
    channel.add_argument('--antennas', type=int, help=f'OAM receive antennas M (default: {defaults.antennas})')
    channel.add_argument(
        '--oam-model', dest='oam_model', choices=list(OAM_MODELS),
        help=f'OAM channel model (default: {defaults.oam_model})'
    )

    numerics = common.add_argument_group('numerics')
    numerics.add_argument(
        '--max-order', dest='max_order', type=int, help=f'Series order cap (default: {defaults.max_order})'
    )
    numerics.add_argument(
        '--tail-tolerance', dest='tail_tolerance', type=float,
        help=f'Series tail bound relative to the running sum (default: {defaults.tail_tolerance})'
    )
    numerics.add_argument('--trials', type=int, help=f'Monte Carlo trials (default: {defaults.trials})')
    numerics.add_argument('--seed', type=int, help=f'Root random seed (default: {defaults.seed})')
    numerics.add_argument(
        '--threads', type=int, help=f'Worker cap; results do not depend on it (default: {defaults.threads})'
    )
    numerics.add_argument(
        '--block-size', dest='block_size', type=int, help=f'Trials per random block (default: {defaults.block_size})'
    )

    sweeps = common.add_argument_group('sweeps')
    sweeps.add_argument(
        '--baseline-split',
        dest='baseline_split',
        choices=[split.value for split in BaselineSplit],
        help=f'Conventional CNOMA power split (default: {defaults.baseline_split})'
    )
    sweeps.add_argument(
        '--sweep-constraint',
        dest='sweep_constraint',
        choices=list(SWEEP_CONSTRAINTS),
        help=f'How p_n1 and p_f follow p_n2 (default: {defaults.sweep_constraint})'
    )
    sweeps.add_argument(
        '--sweep-variable', dest='sweep_variable', choices=list(SWEEP_VARIABLES),
        help=f'Swept quantity (default: {defaults.sweep_variable})'
    )
    sweeps.add_argument(
        '--grid-start', dest='grid_start', type=float, help=f'First grid value (default: {defaults.grid_start})'
    )
    sweeps.add_argument(
        '--grid-stop', dest='grid_stop', type=float, help=f'Last grid value, inclusive (default: {defaults.grid_stop})'
    )
    sweeps.add_argument(
        '--grid-step', dest='grid_step', type=float,
        help=f'Grid spacing (default: {defaults.grid_step}; optimize: {_OPTIMIZE_STEP})'
    )
    sweeps.add_argument(
        '--schemes', nargs='+', type=_scheme_value,
        help=f'Schemes evaluated by sweep (default: {" ".join(defaults.schemes)})'
    )
    sweeps.add_argument(
        '--methods', nargs='+', choices=list(METHODS),
        help=f'Methods evaluated by sweep (default: {" ".join(defaults.methods)})'
    )

    common.add_argument('--output', help='CSV output file (default: none)')
    common.add_argument('--db', help='Directory of the SQLite result archive (default: none)')
    common.add_argument('--verbose', action='store_true', default=None, help='Enable verbose output (default: off)')
    return common


def _defaults_epilog() -> str:
    lines = ["", "Configuration keys (default):"]
    for key, value in RunConfig().to_dict().items():
        lines.append(f"  {key} = {json.dumps(value)}")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with all subcommands."""
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog='splurge-capacity',
        description="Ergodic capacities of CNOMA-OAM, conventional CNOMA and OMA-OAM over Rician fading",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Monte Carlo at one operating point
  splurge-capacity simulate --scheme cnoma-oam --rho-db 15 --pf 0.6 --pn1 0.2 --pn2 0.2 --trials 1000000 --seed 7

  # Closed form for all schemes
  splurge-capacity exact --scheme all --rho-db 20

  # Reproduce a figure as CSV
  splurge-capacity sweep --figure 3 --output fig3.csv

  # Optimum OAM power fraction
  splurge-capacity optimize --rho-db 15 --pf 0.6 --grid-step 0.05

  # Archive a CSV into SQLite
  splurge-capacity archive fig3.csv --db ./results

  # Create a sample configuration file
  splurge-capacity create-config sample_config.json

Run "splurge-capacity <command> --help" for the flag of each key.
""" + _defaults_epilog()
    )
    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    for name, help_text in (
            ('simulate', 'Monte Carlo ergodic capacities at one operating point'),
            ('exact', 'Closed-form ergodic capacities at one operating point'),
    ):
        point_parser = subparsers.add_parser(name, parents=[common], help=help_text)
        point_parser.add_argument(
            '--scheme',
            type=_scheme_choice,
            default='cnoma_oam',
            help='cnoma-oam, cnoma, oma-oam or all (default: cnoma-oam)'
        )

    subparsers.add_parser('sweep', parents=[common], help='Sweep p_n2 or the SNR over the configured grid')

    subparsers.add_parser(
        'optimize', parents=[common], help='Grid-search the p_n2 maximising the closed-form sum capacity'
    )

    archive_parser = subparsers.add_parser('archive', help='Load a result CSV into the SQLite archive')
    archive_parser.add_argument('csv_file', type=Path, help='CSV written by simulate, exact or sweep')
    archive_parser.add_argument('--db', default=_DEFAULT_STORE, help=f'Archive directory (default: {_DEFAULT_STORE})')
    archive_parser.add_argument('--verbose', action='store_true', help='Enable verbose output')

    config_parser = subparsers.add_parser('create-config', help='Create a sample configuration file')
    config_parser.add_argument('output_file', type=Path, help='Path where to save the sample configuration file')

    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Layer defaults, the figure preset, the configuration file and flags.

    Raises:
        FileNotFoundError: If the configuration file doesn't exist
        json.JSONDecodeError: If the configuration file is invalid JSON
        ValueError: If a key is unknown or a value is invalid
    """
    file_layer: Dict[str, Any] = {}
    if getattr(args, 'config', None) is not None:
        file_layer = load_config(args.config)
    flag_layer = {key: getattr(args, key, None) for key in _FLAG_KEYS}
    return RunConfig.from_layers(file_layer, flag_layer)


def _archive(table: ResultTable, config: RunConfig, name: str) -> None:
    if config.db is None:
        return
    store = ResultStoreFactory.from_table(table, store_path=config.db, name=name)
    print(f"Archived {len(table)} rows: {store.db_url} (table {store.db_table})")


def _emit(table: ResultTable, config: RunConfig, default_name: str) -> None:
    for line in summarize(table):
        print(line)
    if config.output is not None:
        path = write_csv(table, config.output)
        print(f"CSV written: {path}")
    _archive(table, config, Path(config.output).stem if config.output else default_name)


def _run_point(config: RunConfig, schemes: List[str], method: str) -> None:
    point_config = config.with_overrides(
        sweep_variable="rho_db",
        grid_start=config.rho_db,
        grid_stop=config.rho_db,
        schemes=schemes,
        methods=[method],
    )
    table = sweep(build_sweep_spec(point_config))
    _emit(table, point_config, method)


def _describe_optimum(result: OptimumResult) -> str:
    text = f"optimum p_n2*={result.p_n2:g} C_sum*={result.c_sum:.6f} ({result.constraint.value})"
    if result.ties:
        text += f" ties={list(result.ties)}"
    if result.degenerate:
        text += " [degenerate grid]"
    return text


def _optimum_annotations(config: RunConfig, grid_step: float) -> List[OptimumResult]:
    point = config.operating_point()
    return [
        find_optimal_pn2(
            config.rho_db, config.p_f, grid_step, point, constraint=constraint, control=config.control()
        )
        for constraint in SweepConstraint
    ]


def _run_sweep(config: RunConfig) -> None:
    spec = build_sweep_spec(config)
    table = sweep(spec)
    if spec.variable is SweepVariable.P_N2:
        for result in _optimum_annotations(config, config.grid_step):
            table.annotations[result.constraint.value] = _describe_optimum(result)

    if config.output is None:
        sys.stdout.write(table.to_csv_text())
        for note in table.annotations.values():
            print(note, file=sys.stderr)
        _archive(table, config, f"figure{config.figure}" if config.figure else "sweep")
        return
    _emit(table, config, "sweep")
    for note in table.annotations.values():
        print(note)


def _run_optimize(config: RunConfig, grid_step: float) -> None:
    result = find_optimal_pn2(
        config.rho_db,
        config.p_f,
        grid_step,
        config.operating_point(),
        constraint=SweepConstraint(config.sweep_constraint),
        control=config.control(),
    )
    print(_describe_optimum(result))
    for p_n2, c_sum in zip(result.grid, result.c_sum_values):
        print(f"  p_n2={p_n2:g} C_sum={c_sum:.6f}")


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s"
    )


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI and return the process exit code.

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:]
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE

    if args.command is None:
        parser.print_help()
        return EXIT_USAGE

    _configure_logging(bool(getattr(args, 'verbose', False)))

    try:
        if args.command == 'create-config':
            create_sample_config(args.output_file)
            print(f"Sample configuration created at: {args.output_file}")
            return EXIT_OK

        if args.command == 'archive':
            store = ResultStoreFactory.from_csv(args.csv_file, store_path=args.db)
            print(f"Archived {args.csv_file}: {store.db_url} (table {store.db_table})")
            return EXIT_OK

        config = resolve_config(args)
        logger.info("configuration: %s", json.dumps(config.to_dict(), sort_keys=True))

        if args.command in ('simulate', 'exact'):
            schemes = [scheme.value for scheme in Scheme] if args.scheme == 'all' else [args.scheme]
            _run_point(config, schemes, 'monte_carlo' if args.command == 'simulate' else 'closed_form')
        elif args.command == 'sweep':
            _run_sweep(config)
        elif args.command == 'optimize':
            _run_optimize(config, args.grid_step if args.grid_step is not None else _OPTIMIZE_STEP)
        return EXIT_OK

    except (SeriesTruncationError, NumericOverflowError, DomainError) as exc:
        print(f"Error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InfeasibleAllocationError as exc:
        print(f"Error: infeasible power allocation: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FileNotFoundError, json.JSONDecodeError, ValueError, RuntimeError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    """Main CLI entry point."""
    sys.exit(run(sys.argv[1:]))


if __name__ == '__main__':
    main()
