import argparse
import logging
import os
import sys

from src.core.app import EXIT_OK, EXIT_USAGE, LabApp, exit_code_for
from src.core.grids import set_fft_workers
from src.utils.config import load_config
from src.utils.errors import LabError
from src.utils.logger import configure_logging_format, enable_file_logging, set_logging_level, setup_logger

logger = setup_logger('Main')

DEFAULT_CONFIG = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'config', 'settings.json')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='dirac-lab',
        description='Magnetic Dirac quasimode lab: Landau modes, Strichartz scaling ladders and flow persistence.')
    parser.add_argument('--config', default=DEFAULT_CONFIG, help='run configuration (JSON)')
    parser.add_argument('--out', default=None, help='output directory (overrides output.directory)')
    parser.add_argument('--jobs', type=int, default=1, help='worker threads for FFTs')
    parser.add_argument('--seed', type=int, default=0, help='RNG seed recorded in manifests')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'])
    parser.add_argument('--log-file', default=None, help='also write a detailed log to this file')
    parser.add_argument('--simple-log', action='store_true', help='use the short console log format')

    commands = parser.add_subparsers(dest='command', required=True)

    eigen = commands.add_parser('eigen', help='solve or reuse the Landau mode cache')
    eigen.add_argument('--oracle', action='store_true',
                       help='compare with the extrapolated finite-difference sector oracle')

    scaling = commands.add_parser('scaling', help='run the R-ladder campaign and blow-up report')
    scaling.add_argument('--no-free-control', action='store_true', help='skip the free-flow control quotients')
    scaling.add_argument('--no-term-diagnostics', action='store_true', help='skip term-wise source norms')
    scaling.add_argument('--refine', action='store_true', help='grid-refinement check at the smallest R')

    commands.add_parser('evolve', help='magnetic vs free flow persistence experiment')

    exponents = commands.add_parser('exponents', help='closed-form exponents for (p, q, delta, gamma, beta)')
    exponents.add_argument('p', help="time exponent (number or 'inf')")
    exponents.add_argument('q', type=float)
    exponents.add_argument('delta', type=float)
    exponents.add_argument('gamma', type=float)
    exponents.add_argument('beta', type=float)

    report = commands.add_parser('report', help='list archived runs')
    report.add_argument('--export', default=None, help='CSV target for the listing or the selected table')
    report.add_argument('--run', default=None, help='run id (defaults to the latest run)')
    report.add_argument('--table', default=None, help='stored table to export (e.g. ladder, fits)')
    return parser


def _configure_logging(args):
    set_logging_level(getattr(logging, args.log_level))
    configure_logging_format(args.simple_log)
    if args.log_file:
        enable_file_logging(args.log_file)
        logger.info(f"File logging enabled: {args.log_file}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    set_fft_workers(args.jobs)

    if args.command == 'exponents':
        try:
            p = float(args.p)
        except ValueError:
            logger.error(f"Failed to parse p: {args.p!r} is not a number or 'inf'")
            return EXIT_USAGE
        try:
            LabApp.cmd_exponents(p, args.q, args.delta, args.gamma, args.beta)
        except LabError as e:
            logger.error(f"Failed to compute exponents: {e}")
            return exit_code_for(e)
        return EXIT_OK

    try:
        config, _ = load_config(args.config)
        if args.out is not None:
            config = config.with_overrides(output_directory=args.out)
    except LabError as e:
        logger.error(f"Failed to load config: {e}")
        return EXIT_USAGE

    app = LabApp(config, seed=args.seed)
    if args.command == 'eigen':
        return app.run('eigen', oracle=args.oracle)
    if args.command == 'scaling':
        return app.run('scaling', free_control=not args.no_free_control, refine=args.refine,
                       term_diagnostics=not args.no_term_diagnostics)
    if args.command == 'evolve':
        return app.run('evolve')
    return app.run('report', export=args.export, run_id=args.run, table=args.table)


if __name__ == '__main__':
    sys.exit(main())
