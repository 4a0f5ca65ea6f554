"""
Command-line entry point for the Grover decoherence perturbation toolkit.

    python app.py [--env NAME] [--log-level LEVEL] [--out DIR|-] <command> [options]

Commands: coeffs, pbar-grid, phase, mc, exact, validate, truncation.
On failure exactly one line ``error=<kind> reason=<message>`` goes to stderr.
"""

import argparse
import logging
import math
import sys

from backend.errors import GroverPTError, UsageError
from backend.models.domain_models import SWEEP_SCHEDULES
from backend.routes.commands import HANDLERS
from config import config, get_config

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(level: str):
    """Root handler on stderr so CSV written to stdout stays clean"""
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO),
                        format=LOG_FORMAT, stream=sys.stderr, force=True)


def _table_options(parser, cfg):
    parser.add_argument('--order', type=int, default=cfg.PERTURBATION_ORDER,
                        help='perturbation order K (default %(default)s)')
    parser.add_argument('--degree', type=int, default=cfg.POLYNOMIAL_DEGREE,
                        help='polynomial degree D of every C̄_k (default %(default)s)')


class CommandLineParser(argparse.ArgumentParser):
    """Argument parser that raises UsageError instead of printing usage and exiting"""

    def error(self, message):
        raise UsageError(' '.join(str(message).split()))


def build_parser(cfg) -> argparse.ArgumentParser:
    parser = CommandLineParser(prog='grover-pt', description=__doc__.split('\n\n')[0].strip())
    parser.add_argument('--env', choices=sorted(config), default=None,
                        help='configuration name (default: $GROVER_PT_ENV or "default")')
    parser.add_argument('--log-level', default=cfg.LOG_LEVEL, help='logging level (default %(default)s)')
    parser.add_argument('--out', default=cfg.OUTPUT_DIR,
                        help='output directory, or - for stdout (default %(default)s)')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    coeffs = sub.add_parser('coeffs', help='emit C_k (exact) and C̄_k (float)')
    _table_options(coeffs, cfg)
    coeffs.add_argument('--closed-form', action='store_true', help='also emit the F_k closed forms as JSON')

    grid = sub.add_parser('pbar-grid', help='emit ⟨P̄⟩ on a (Θ, x) grid')
    _table_options(grid, cfg)
    grid.add_argument('--theta', default=f'0:{math.pi / 2}:0.01', help='Θ range a:b:step')
    grid.add_argument('--x', default='0:10:0.5', help='x range a:b:step')
    grid.add_argument('--fixed-p', type=float, default=None,
                      help='emit the curve x = 2Θnp/arcsin(2^(-n/2)) for this p instead of a grid')
    grid.add_argument('--n', type=int, default=cfg.N_QUBITS, help='qubits for --fixed-p (default %(default)s)')

    phase = sub.add_parser('phase', help='emit the critical curve x_c(P_th)')
    _table_options(phase, cfg)
    phase.add_argument('--pth-start', type=float, default=1.0)
    phase.add_argument('--pth-end', type=float, default=cfg.PHASE_FINE_AT)
    phase.add_argument('--schedule', choices=SWEEP_SCHEDULES, default='refined',
                       help='fig2 is an alias of refined (default %(default)s)')
    phase.add_argument('--step', type=float, default=cfg.PHASE_STEP_COARSE, help='coarse P_th step')
    phase.add_argument('--parallel', action='store_true', help='solve points independently on a thread pool')
    phase.add_argument('--reference', action='store_true',
                       help='also emit the tangent and logarithmic reference lines')

    for name, help_text in (('mc', 'Monte Carlo trajectories'), ('exact', 'exact dephasing channel')):
        command = sub.add_parser(name, help=help_text)
        command.add_argument('--n', type=int, default=cfg.N_QUBITS)
        command.add_argument('--m', type=int, default=cfg.M_MAX, help='Grover iterations M_max')
        command.add_argument('--p', type=float, required=True, help='phase-flip probability per qubit')
        if name == 'mc':
            command.add_argument('--trials', type=int, default=cfg.TRIALS)
            command.add_argument('--seed', type=int, default=cfg.SEED)

    validate = sub.add_parser('validate', help='run the oracle suite and emit a JSON report')
    _table_options(validate, cfg)

    truncation = sub.add_parser('truncation', help='partial Taylor sums of C_k at several degrees')
    truncation.add_argument('--order', type=int, default=cfg.PERTURBATION_ORDER + 1, help='k of C_k')
    truncation.add_argument('--degrees', default='30,40,50')
    truncation.add_argument('--theta', default='0:6:0.01', help='Θ range a:b:step')
    truncation.add_argument('--threshold', type=float, default=1e-3)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = CommandLineParser(add_help=False)
    pre.add_argument('--env', default=None)
    try:
        known, _ = pre.parse_known_args(argv)
        try:
            cfg = get_config(known.env)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        args = build_parser(cfg).parse_args(argv)
    except UsageError as exc:
        print(f"error={exc.kind} reason={exc}", file=sys.stderr)
        return exc.exit_code
    configure_logging(args.log_level)
    logger.debug("configuration %s", cfg.__name__)
    try:
        return HANDLERS[args.command](args, cfg)
    except GroverPTError as exc:
        print(f"error={exc.kind} reason={exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - last-resort reporting
        logger.exception("unhandled failure in %s", args.command)
        print(f"error=internal reason={exc}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
