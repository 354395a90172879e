"""Command line interface ``foliapyn``.

Usage::

    foliapyn betti --config torus.ini --out reports/torus
    foliapyn witten-sweep --config circle.ini --seed 3
    foliapyn morse-scan --config birth_death.ini --quiet
    foliapyn hodge-check --config torus.ini
"""

import argparse
import logging
import pathlib
import sys

from . import __version__, githash
from .config import OUTPUT_DIR_DEFAULT, load_config
from .reports import COMMANDS, EXIT_ERROR, run_command, write_error

log = logging.getLogger(__name__)


def _parser():
    parser = argparse.ArgumentParser(prog='foliapyn',
                                     description='Tangential Hodge and Witten checks on model foliations')
    parser.add_argument('--version', action='version', version='%(prog)s {}'.format(__version__))
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True
    helps = {
        'betti': 'measured Betti numbers and their invariance under deformation',
        'witten-sweep': 'low lying Witten spectra along the epsilon list',
        'morse-scan': 'tangential singularities and Morse inequalities',
        'hodge-check': 'Hodge decomposition, transport identities and block structure',
    }
    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=helps[name])
        sub.add_argument('--config', required=True, type=pathlib.Path, help='run configuration file')
        sub.add_argument('--out', type=pathlib.Path, default=None, help='output directory for reports')
        sub.add_argument('--seed', type=int, default=None, help='overrides the seed of the configuration')
        sub.add_argument('--quiet', action='store_true', help='log warnings and errors only')
    return parser


def _setup_logging(quiet):
    logger = logging.getLogger()
    logger.setLevel(logging.WARNING if quiet else logging.INFO)
    if not any(getattr(h, '_foliapyn', False) for h in logger.handlers):
        handler = logging.StreamHandler(stream=sys.stderr)
        handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
        handler._foliapyn = True
        logger.addHandler(handler)


def main(argv=None):
    """Entry point of the ``foliapyn`` command.

    :param argv: Arguments without the program name, defaults to
                 ``sys.argv[1:]``.
    :return: Exit code, 0 pass, 1 operational error, 2 claim failure.
    """
    args = _parser().parse_args(argv)
    _setup_logging(args.quiet)
    log.info('Running foliapyn {} (git hash {}): {}'.format(__version__, githash(), args.command))

    try:
        config = load_config(args.config, seed=args.seed, output_dir=args.out)
    except ValueError as e:
        log.error('Invalid configuration {}: {}'.format(args.config, e))
        write_error(args.out or pathlib.Path(OUTPUT_DIR_DEFAULT), args.command, e)
        return EXIT_ERROR

    result = run_command(args.command, config)
    log.info('{} finished with exit code {}, files: {}'.format(
        args.command, result.exit_code, [str(f) for f in result.files]))
    return result.exit_code


if __name__ == '__main__':
    sys.exit(main())
