"""
Command line entry point: ``motif-crf <stage> [--config PATH] [--in DIR] [--out DIR]``.
"""
import os
import sys
import json
import argparse

from .errors import MotifCrfError
from .task import RunConfig, MotifCrfTask, STAGES

__all__ = ["build_parser", "main"]


def build_parser():
    parser = argparse.ArgumentParser(
        prog='motif-crf',
        description='Motif transformation families in sonata movements: '
                    'segmentation, labelling, CRF fitting and permutation tests.')
    parser.add_argument('stage', choices=STAGES, help='pipeline stage to run')
    parser.add_argument('--config', default=None,
                        help='YAML or key=value file overriding the default settings')
    parser.add_argument('--in', dest='in_dir', default='.',
                        help='directory of notes.csv, harmony.csv, motifs.csv (or "toy")')
    parser.add_argument('--out', dest='out_dir', default='.', help='output directory')
    parser.add_argument('--seed', type=int, default=None, help='overrides the config seed')
    parser.add_argument('--period', default=None, help='keep only movements of this period')
    parser.add_argument('--quiet', action='store_true', help='no log output')
    return parser


def _error_record(stage, err, task=None):
    record = {'stage': stage,
              'error': type(err).__name__,
              'message': str(err),
              'artifact': getattr(err, 'path', None),
              'config': None,
              'input_hash': None}
    if task is not None:
        record['config'] = task.config.as_dict()
        try:
            record['input_hash'] = task.stage_input_hash(stage)
        except OSError:
            pass
    return record


def _emit_error(record, out_dir):
    text = json.dumps(record, indent=1, sort_keys=True)
    sys.stderr.write(text + '\n')
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, 'error.json'), 'w') as f:
            f.write(text + '\n')
    except OSError:
        pass


def main(argv=None):
    """
    Run one stage and return its exit status: 0 on success, the error's
    ``exit_code`` for a ``MotifCrfError`` and 1 otherwise.
    """
    args = build_parser().parse_args(argv)
    task = None
    try:
        config = RunConfig.from_file(args.config) if args.config else RunConfig()
        if args.seed is not None:
            config.seed = args.seed
        if args.period is not None:
            config.period = args.period
        task = MotifCrfTask(config, in_dir=args.in_dir, out_dir=args.out_dir)
        task.set_logger(verbose=not args.quiet)
        task.run_stage(args.stage)
    except MotifCrfError as err:
        stage = getattr(task, 'current_stage', args.stage)
        _emit_error(_error_record(stage, err, task), args.out_dir)
        return err.exit_code
    except Exception as err:
        stage = getattr(task, 'current_stage', args.stage)
        _emit_error(_error_record(stage, err, task), args.out_dir)
        return 1
    if os.path.isfile(os.path.join(args.out_dir, 'error.json')):
        os.remove(os.path.join(args.out_dir, 'error.json'))
    return 0


if __name__ == '__main__':
    sys.exit(main())
