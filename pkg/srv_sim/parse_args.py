"""Set up command line argument list"""

import argparse

from srv_sim.attacks.matrix import DEFAULT_MATRIX_SCENARIOS
from srv_sim.pipeline.config import MITIGATIONS, STRATEGIES

EMIT_CHOICES = ('report', 'csv', 'trace', 'mld')


def _common(parser):
    parser.add_argument('--save_path', '-o', type=str, default='srv_output',
                        help='Directory in which outputs are stored. If '
                             'wandb_run and wandb_project are specified, '
                             'save_path/wandb_project/wandb_run will be used '
                             'to store results.')
    parser.add_argument('--seed', type=int,
                        help='Seed for every random stream of the run. '
                             'Defaults to the scenario file, then to the '
                             'SRV_SIM_SEED environment variable.')
    parser.add_argument('--jitter', type=float,
                        help='Standard deviation of timer noise in ticks.')
    parser.add_argument('--granularity', type=int,
                        help='Timer granularity in ticks.')
    parser.add_argument('--verbose', '-v', action='store_true',
                        help='Log replay decisions and squashes.')
    parser.add_argument('--wandb_project', type=str,
                        help='Name of wandb project. If left blank, wandb '
                             'logging will not be used.')
    parser.add_argument('--wandb_run', type=str,
                        help='Name of run for wandb logging.')


def _machine(parser):
    parser.add_argument('--width', type=int,
                        help='Vector lanes per chunk.')
    parser.add_argument('--mitigation', '-m', type=str,
                        help='One of ' + ', '.join(MITIGATIONS))
    parser.add_argument('--strategy', type=str,
                        help='One of ' + ', '.join(STRATEGIES))
    parser.add_argument('--trials', type=int,
                        help='Armed runs (the secret is cycled).')
    parser.add_argument('--training_iterations', type=int,
                        help='Benign runs before every armed run.')


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        prog='srv_sim',
        description='Speculative vectorization side-channel simulator.')
    subparsers = parser.add_subparsers(dest='command', required=True)

    run = subparsers.add_parser('run', help='Run one scenario file.')
    run.add_argument('scenario', type=str,
                     help='Scenario YAML file (gadget path relative to it).')
    _machine(run)
    _common(run)
    run.add_argument('--emit', type=str, nargs='*', default=['report'],
                     help='Outputs to write: ' + ', '.join(EMIT_CHOICES))
    run.add_argument('--mld', type=str, nargs='*',
                     default=['dcache', 'branch', 'srv'],
                     help='Leakage descriptors evaluated with --emit mld.')
    run.add_argument('--load_args', type=str,
                     help='YAML file of overrides, as written to '
                          'run_config.yaml by an earlier run.')

    matrix = subparsers.add_parser(
        'matrix', help='Leak accuracy of scenarios under every mitigation.')
    matrix.add_argument('scenarios', type=str, nargs='*',
                        default=list(DEFAULT_MATRIX_SCENARIOS),
                        help='Shipped scenario names or scenario files.')
    matrix.add_argument('--mitigations', type=str, nargs='*',
                        default=list(MITIGATIONS),
                        help='Mitigations to evaluate.')
    matrix.add_argument('--n_jobs', '-j', type=int, default=1,
                        help='Matrix cells simulated in parallel.')
    matrix.add_argument('--min_trials', type=int, default=64,
                        help='Lower bound on armed runs per cell.')
    _machine(matrix)
    _common(matrix)

    sweep = subparsers.add_parser(
        'sweep', help='Latency versus working-set size and LLC estimate.')
    sweep.add_argument('--cache_config', type=str,
                       help='YAML file holding a cache section (defaults to '
                            'a 64KB L1 and a 32MB LLC).')
    sweep.add_argument('--sizes', type=str, nargs='*',
                       help='Ascending working-set sizes, e.g. 4KB 1MB. '
                            'Defaults to 4KB to 128MB in powers of two.')
    sweep.add_argument('--reps', type=int, default=1,
                       help='Repetitions per size.')
    _common(sweep)

    listing = subparsers.add_parser(
        'list-scenarios', help='Print the shipped scenarios.')
    listing.add_argument('--verbose', '-v', action='store_true')
    return parser.parse_args(argv)
