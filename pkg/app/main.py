"""
Command-line entry point for the Duality Tool.
Parses the global flags and subcommands, builds the run configuration
and dispatches to the experiment runners.
"""
import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

import numpy as np
import pandas as pd

from app.config.settings import (
    LOG_DATE_FORMAT,
    LOG_FORMAT,
    VERBOSITY_LEVELS,
    read_config_file,
)
from app.core.experiments import (
    ExperimentConfig,
    fresnel_angles,
    fresnel_summary,
    run_bagan_table,
    run_fresnel_scan,
    run_povm_comparison,
    run_sweep,
    run_tomography,
    write_run,
)
from app.core.state_prep import STATE_CLASS_LABELS

logger = logging.getLogger(__name__)

# CLI option -> config key, shared by the run subcommands
RUN_OVERRIDES = {
    'classes': 'classes',
    'theta_points': 'theta_points',
    'rounds': 'rounds',
    'exposure': 'exposure',
    'noise_weight': 'noise_weight',
}
FRESNEL_OVERRIDES = {
    'refractive_index': 'refractive_index',
    'start': 'fresnel_start',
    'stop': 'fresnel_stop',
    'step': 'fresnel_step',
    'surfaces': 'fresnel_surfaces',
}


class JsonErrorParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors also end with a JSON error line on stderr."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(_error_line("ArgumentError", message))
        self.exit(2)


def _error_line(name, message):
    return json.dumps({'error': name, 'message': message}) + "\n"


def _class_list(text):
    labels = tuple(part.strip() for part in text.split(',') if part.strip())
    for label in labels:
        if label not in STATE_CLASS_LABELS:
            raise argparse.ArgumentTypeError(f"unknown state class '{label}'")
    return labels


def build_parser():
    """Argument parser with the global flags accepted before or after the subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=argparse.SUPPRESS, help="Master seed of the run.")
    common.add_argument('--config', type=Path, default=argparse.SUPPRESS,
                        help="Flat key = value config file.")
    common.add_argument('--out-dir', type=Path, default=argparse.SUPPRESS, help="Directory for CSV/JSON outputs.")
    common.add_argument('--exact', action='store_true', default=argparse.SUPPRESS,
                        help="Feed exact Born probabilities to the reconstruction and skip Monte Carlo.")
    common.add_argument('--verbosity', choices=VERBOSITY_LEVELS, default=argparse.SUPPRESS,
                        help="Logging verbosity (default INFO).")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument('--classes', type=_class_list, help="Comma separated state classes, e.g. I,II,III.")
    run.add_argument('--theta-points', type=int, help="HWP angles in the sweep grid.")
    run.add_argument('--rounds', type=int, help="Monte Carlo rounds per point.")
    run.add_argument('--exposure', type=float, help="Expected pairs per tomography setting.")
    run.add_argument('--noise-weight', type=float, help="White-noise admixture of the source.")

    parser = JsonErrorParser(
        prog='duality-tool', parents=[common],
        description="Coherence / path-information duality simulation.",
    )
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('sweep', parents=[common, run], help="ζ sweep per state class.")
    commands.add_parser('bagan', parents=[common, run], help="C² + P² table of all generated states.")
    commands.add_parser('povm-compare', parents=[common, run],
                        help="Analytic versus direct-POVM success probability for class III.")

    fresnel = commands.add_parser('fresnel', parents=[common], help="Window transmission versus angle.")
    fresnel.add_argument('--refractive-index', type=float)
    fresnel.add_argument('--start', type=float, help="First angle in degrees.")
    fresnel.add_argument('--stop', type=float, help="Last angle in degrees.")
    fresnel.add_argument('--step', type=float, help="Angle step in degrees.")
    fresnel.add_argument('--surfaces', type=int, help="Interfaces crossed per window.")

    tomo = commands.add_parser('tomo', parents=[common, run], help="Tomography of a single state.")
    tomo.add_argument('--class', dest='state_class', choices=STATE_CLASS_LABELS, default='III')
    tomo.add_argument('--theta', type=float, default=np.pi / 8, help="HWP angle in radians.")
    tomo.add_argument('--counts', type=Path, help="Reconstruct this counts CSV instead of simulating.")
    return parser


def load_config(args):
    """
    Merge defaults, the config file and CLI flags (in increasing priority).

    Args:
        args (argparse.Namespace): Parsed command line

    Returns:
        ExperimentConfig: The run configuration
    """
    values = {}
    config_path = getattr(args, 'config', None)
    if config_path is not None:
        values.update(read_config_file(config_path))
    overrides = dict(RUN_OVERRIDES)
    if args.command == 'fresnel':
        overrides = dict(FRESNEL_OVERRIDES)
    for option, key in overrides.items():
        value = getattr(args, option, None)
        if value is not None:
            values[key] = value
    if getattr(args, 'seed', None) is not None:
        values['seed'] = args.seed
    if getattr(args, 'out_dir', None) is not None:
        values['out_dir'] = args.out_dir
    if getattr(args, 'exact', False):
        values['exact'] = True
    return ExperimentConfig.from_mapping(values)


def command_sweep(config, args):
    results = [run_sweep(config, label) for label in config.classes]
    frame = pd.concat([r.to_frame() for r in results], ignore_index=True)
    return write_run(config.out_dir, 'sweep', frame, 'sweep', config,
                     {'classes': [r.summary() for r in results]})


def command_bagan(config, args):
    frame = run_bagan_table(config)
    summary = {
        'rows': len(frame),
        'bound': 0.25,
        'max_abs_deviation_theory': float((frame['sum_theory'] - 0.25).abs().max()),
        'max_abs_deviation_tomography': float((frame['sum_tomography'] - 0.25).abs().max()),
        'max_abs_deviation_povm': float((frame['sum_povm'] - 0.25).abs().max()),
    }
    return write_run(config.out_dir, 'bagan', frame, 'bagan', config, summary)


def command_povm_compare(config, args):
    frame = run_povm_comparison(config)
    summary = {
        'rows': len(frame),
        'max_mismatch': float(frame['mismatch'].max()),
        'within_3_sigma': bool((frame['mismatch'] <= 3.0 * frame['combined_err']).all()),
    }
    return write_run(config.out_dir, 'povm_compare', frame, 'povm-compare', config, summary)


def command_fresnel(config, args):
    frame = run_fresnel_scan(fresnel_angles(config), config.refractive_index, surfaces=config.fresnel_surfaces)
    summary = fresnel_summary(frame, config.refractive_index, config.fresnel_surfaces)
    return write_run(config.out_dir, 'fresnel', frame, 'fresnel', config, summary)


def command_tomo(config, args):
    counts, summary = run_tomography(config, args.state_class, args.theta, args.counts)
    return write_run(config.out_dir, 'tomo', counts.to_frame(), 'tomo', config, summary)


COMMANDS = {
    'sweep': command_sweep,
    'bagan': command_bagan,
    'povm-compare': command_povm_compare,
    'fresnel': command_fresnel,
    'tomo': command_tomo,
}


def main(argv=None):
    """Run the CLI; returns the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(args, 'verbosity', 'INFO'), format=LOG_FORMAT, datefmt=LOG_DATE_FORMAT)

    try:
        config = load_config(args)
        logger.info(f"Running '{args.command}' with seed {config.seed}{' in exact mode' if config.exact else ''}")
        csv_path, json_path = COMMANDS[args.command](config, args)
        print(csv_path)
        print(json_path)
        return 0
    except Exception as e:
        logger.debug(traceback.format_exc())
        sys.stderr.write(_error_line(type(e).__name__, str(e)))
        return 1
