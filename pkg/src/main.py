import os
import sys
# DON'T CHANGE THIS LINE - it's needed for deployment
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import argparse

from commands.metalp import DEMOS, cmd_analyze, cmd_demo, cmd_simulate
from runtime_config import RuntimeConfig


def positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog='metalp',
        description='Distributed LP variable selection with meta-combined confidence distributions')
    parser.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING or ERROR')
    commands = parser.add_subparsers(dest='command', required=True)

    analyze = commands.add_parser('analyze', help='rank predictors of a binary target')
    analyze.add_argument('--input', required=True, help='CSV file with a header row')
    analyze.add_argument('--schema', required=True, help='JSON schema describing the columns')
    partitioning = analyze.add_mutually_exclusive_group(required=True)
    partitioning.add_argument('--partitions', type=positive_int, help='number of random partitions')
    partitioning.add_argument('--gamma', type=float, help='k = floor(n^gamma + 0.5)')
    partitioning.add_argument('--partition-by', help='one partition per value of this column')
    analyze.add_argument('--group-by', help='keep rows sharing this key in one random partition')
    analyze.add_argument('--method', choices=['fixed', 'dl', 'reml'], default=None,
                         help='combining method (default reml)')
    analyze.add_argument('--seed', type=int, default=0)
    analyze.add_argument('--m', type=positive_int, default=None, help='LP orders per variable (default 4)')
    analyze.add_argument('--ci', type=float, default=0.95, help='confidence level')
    analyze.add_argument('--workers', type=positive_int, default=None,
                         help='map-stage processes (default METALP_WORKERS or CPU count)')
    analyze.add_argument('--output', default=None, help='directory for report.json and report.csv')
    analyze.add_argument('--top', type=positive_int, default=10, help='rows of the printed ranking')
    analyze.add_argument('--emit-plan', default=None, help='write the partition plan JSON here')
    analyze.set_defaults(handler=cmd_analyze)

    simulate = commands.add_parser('simulate', help='write synthetic logistic-model datasets')
    simulate.add_argument('--n', type=positive_int, required=True)
    simulate.add_argument('--seed', type=int, default=0)
    simulate.add_argument('--reps', type=positive_int, default=1)
    simulate.add_argument('--p', type=int, default=50, help='number of predictors (at least 3)')
    simulate.add_argument('--output', default=None)
    simulate.set_defaults(handler=cmd_simulate)

    demo = commands.add_parser('demo', help='run a built-in case study')
    demo.add_argument('name', choices=DEMOS)
    demo.add_argument('--method', choices=['fixed', 'dl', 'reml'], default=None)
    demo.add_argument('--output', default=None)
    demo.set_defaults(handler=cmd_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, 'partition_by', None) and args.group_by:
        parser.error('--group-by only applies to random partitions, not --partition-by')
    runtime = RuntimeConfig()
    runtime.setup_logging(args.log_level)
    return args.handler(args, runtime)


if __name__ == '__main__':
    sys.exit(main())
