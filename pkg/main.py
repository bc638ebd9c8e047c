#!/usr/bin/env python3
"""
Digit-pair addition experiment

Generates 28x56 images of two side-by-side MNIST digits labelled with their
sum, trains a small convolutional regressor on 90 of the 100 ordered digit
pairs and evaluates it on the 10 held-out pairs, over a 10-fold
cross-validation of the pairs.

Usage:
  python main.py generate --mnist-dir data/mnist --out runs
  python main.py crossval --mnist-dir data/mnist --profile quick
  python main.py crossval --config experiment.yaml --parallel-folds 2
  python main.py eval runs/<run-id>/fold-1/checkpoint.npz runs/datasets/fold-1/test
  python main.py dump-samples runs/datasets/fold-1/test --count 5 --out samples

Exit codes: 0 success, 2 configuration, 3 data, 4 training, 130 interrupted
"""

import argparse
import sys
from pathlib import Path

from lib import __version__
from lib.commands import cmd_crossval, cmd_dump_samples, cmd_eval, cmd_generate
from lib.errors import ExperimentError, ConfigError, exit_code_for, EXIT_INTERRUPTED
from lib.models import Precision, Profile
from lib.rich_console import rich_output
from lib.run_config import build_run_config, load_config_file
from lib.run_control import setup_signal_handlers


def add_run_arguments(ap: argparse.ArgumentParser):
    """Flags shared by generate and crossval; unset flags leave config file values alone"""
    ap.add_argument('--config', type=Path, help='Flat YAML config file (overridden by flags)')
    ap.add_argument('--mnist-dir', type=Path, help='Directory with the four MNIST IDX files (plain or .gz)')
    ap.add_argument('--out', type=Path, help='Output directory (default: runs)')
    ap.add_argument('--profile', choices=[p.value for p in Profile],
                    help='quick: 3 folds, m=200, 6 epochs; paper: 10 folds, m=1000, 12 epochs (default)')
    ap.add_argument('--run-id', type=str, help='Run directory name (default: timestamp)')
    ap.add_argument('--seed', type=int, help='Master seed for split, data and initialization')
    ap.add_argument('--split-seed', type=int, help='Override the seed of the pair split')
    ap.add_argument('--data-seed', type=int, help='Override the seed of sample generation and shuffling')
    ap.add_argument('--init-seed', type=int, help='Override the seed of weight initialization')
    ap.add_argument('--samples-per-pair', type=int, help='Samples generated per digit pair (m)')
    ap.add_argument('--folds', type=int, help='Number of folds K (must divide 100)')
    ap.add_argument('--fold-limit', type=int, help='Only run the first N folds of the plan')
    ap.add_argument('--epochs', type=int, help='Training epochs per fold')
    ap.add_argument('--batch-size', type=int, help='Minibatch size')
    ap.add_argument('--rho', type=float, help='ADADELTA decay rate')
    ap.add_argument('--epsilon', type=float, help='ADADELTA conditioning constant')
    ap.add_argument('--precision', choices=[p.value for p in Precision], help='Parameter precision')
    ap.add_argument('--dropout', action='store_true', default=None, help='Enable dropout (0.25 / 0.5)')
    ap.add_argument('--no-shuffle', dest='shuffle', action='store_false', default=None,
                    help='Keep the training order fixed')
    ap.add_argument('--parallel-folds', type=int, help='Run N folds in parallel processes')
    ap.add_argument('--cache-datasets', action='store_true', default=None,
                    help='Export generated fold datasets to <out>/datasets for reuse')
    ap.add_argument('--format', dest='formats', type=str,
                    help='Report formats, comma separated: csv,markdown,json')


def parse_arguments(argv=None):
    """Parse command line arguments"""
    ap = argparse.ArgumentParser(description='Digit-pair addition: generalization to unseen digit pairs')
    ap.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = ap.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('generate', help='Export per-fold train/test datasets')
    add_run_arguments(gen)

    cv = sub.add_parser('crossval', help='Train and evaluate every fold, write reports')
    add_run_arguments(cv)

    ev = sub.add_parser('eval', help='Evaluate a checkpoint on an exported dataset')
    ev.add_argument('checkpoint', type=Path, help='checkpoint.npz of a fold')
    ev.add_argument('dataset', type=Path, help='Exported dataset directory')
    ev.add_argument('--predictions', type=Path, help='Predictions output file (default: next to the checkpoint)')

    dump = sub.add_parser('dump-samples', help='Write generated samples as PGM images')
    dump.add_argument('dataset', type=Path, help='Exported dataset directory')
    dump.add_argument('--count', type=int, default=10, help='Number of samples (default: 10)')
    dump.add_argument('--out', type=Path, default=Path('samples'), help='Target directory (default: samples)')
    dump.add_argument('--pair', type=str, help='Only samples of this pair, e.g. 9,9')

    return ap.parse_args(argv)


def run_config_from_args(args):
    """Merge profile, config file and flags"""
    file_values = load_config_file(args.config) if args.config else {}
    cli_values = {
        key: getattr(args, key) for key in (
            'mnist_dir', 'out', 'profile', 'run_id', 'seed', 'split_seed', 'data_seed', 'init_seed',
            'samples_per_pair', 'folds', 'fold_limit', 'epochs', 'batch_size', 'rho', 'epsilon',
            'precision', 'dropout', 'shuffle', 'parallel_folds', 'cache_datasets', 'formats',
        )
    }
    return build_run_config(file_values, cli_values)


def parse_pair(text):
    try:
        p1, p2 = (int(part) for part in text.split(','))
    except ValueError:
        raise ConfigError(f"--pair expects two digits like '9,9', got '{text}'")
    if not (0 <= p1 <= 9 and 0 <= p2 <= 9):
        raise ConfigError(f'--pair digits must lie in 0..9, got {text}')
    return p1, p2


def run_command(args):
    if args.command == 'generate':
        config = run_config_from_args(args)
        rich_output.print_config(config)
        cmd_generate(config)
    elif args.command == 'crossval':
        config = run_config_from_args(args)
        rich_output.print_config(config)
        cmd_crossval(config)
    elif args.command == 'eval':
        cmd_eval(args.checkpoint, args.dataset, args.predictions)
    elif args.command == 'dump-samples':
        pair = parse_pair(args.pair) if args.pair else None
        cmd_dump_samples(args.dataset, args.count, args.out, pair)


def main(argv=None):
    # Setup signal handlers for graceful shutdown
    setup_signal_handlers()

    args = parse_arguments(argv)
    rich_output.print_header(f"Digit-Pair Addition Experiment {__version__}")

    try:
        run_command(args)
    except ExperimentError as e:
        if exit_code_for(e) == EXIT_INTERRUPTED:
            rich_output.print_interrupted(str(e))
        else:
            rich_output.print_error(str(e), type(e).__name__)
        sys.exit(exit_code_for(e))
    except KeyboardInterrupt:
        rich_output.print_interrupted()
        sys.exit(EXIT_INTERRUPTED)


if __name__ == '__main__':
    main()
