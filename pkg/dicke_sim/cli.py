"""
Command-line entry point: dicke-sim <spectrum|decay|tomo> --config <path> --out <dir>.
"""

from typing import List, Optional
import argparse
import logging
import sys

from .exceptions import DickeSimError, ValidationError
from .runner import KINDS, ExperimentConfig, apply_overrides, exit_code_for, load_config, run, run_sweep


logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='dicke-sim',
        description="Two-qubit superradiance experiments: transmission spectra, decay traces and tomography.")
    parser.add_argument('kind', choices=KINDS, help="experiment kind")
    parser.add_argument('--config', required=True, help="JSON experiment config")
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help="override a config field; dotted keys reach nested sections (repeatable)")
    parser.add_argument('--out', required=True, help="output directory")
    parser.add_argument('--seed', type=int, default=None, help="random seed for record synthesis")
    parser.add_argument('--verbose', action='store_true', help="debug logging")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one experiment (or a sweep) and return the exit status.

    0 on success, 2 on validation errors, 3 on numerical non-convergence,
    1 on any other failure.
    """
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        data = load_config(args.config)
        if 'kind' not in data:
            data['kind'] = args.kind
        elif data['kind'] != args.kind:
            raise ValidationError(f"Config kind {data['kind']!r} does not match command {args.kind!r}",
                                  [('/kind', f'expected {args.kind!r}')])
        data = apply_overrides(data, args.overrides)
        if args.seed is not None:
            data = apply_overrides(data, {'detection.rng_seed': args.seed})
        config = ExperimentConfig.from_dict(data)

        if config.sweep:
            index = run_sweep(config, args.out)
            codes = [entry['exit_code'] for entry in index['runs']]
            failed = [c for c in codes if c]
            print(f"Sweep over {index['field']}: {len(codes) - len(failed)}/{len(codes)} runs completed")
            return max(failed) if failed else 0

        result = run(config, args.out)
        for key in sorted(result.summary):
            print(f"{key}: {result.summary[key]}")
        print(f"Manifest: {result.manifest}")
        return 0
    except DickeSimError as e:
        code = exit_code_for(e)
        logger.error(f"{type(e).__name__}: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return code


if __name__ == '__main__':
    sys.exit(main())
