"""
srv_sim simulates speculative vectorization with selective replay and the
covert-channel attacks it enables. This is the main script, and can be used
like so:

python3 srv_sim.py run <scenario.yaml> --mitigation str --emit report csv

for example:
python3 srv_sim.py run scenarios/srv_leak.yaml --mitigation mem_fence
python3 srv_sim.py matrix srv_leak spectre_stl -o ~/srv_output
python3 srv_sim.py sweep --sizes 4KB 64KB 1MB 32MB 64MB 128MB
python3 srv_sim.py list-scenarios

Exit status is 0 whenever the simulation ran, whatever it leaked, and 2 when
the scenario or options were unusable.
"""
import logging
import sys
from pathlib import Path

from srv_sim.commands import COMMANDS, RunConfig
from srv_sim.errors import SrvSimError
from srv_sim.parse_args import parse_args
from srv_sim.utils import load_yaml

try:
    import wandb
except ImportError:
    print('Library wandb not available. --wandb_project and --wandb_run flags '
          'should not be used.')
    wandb = None


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s')

    # Overrides saved by an earlier run fill in flags left unset
    if getattr(args, 'load_args', None) is not None:
        loaded_args = load_yaml(Path(args.load_args).expanduser()) or {}
        overrides = loaded_args.get('run', loaded_args).get('overrides', {})
        for key, value in overrides.items():
            if hasattr(args, key) and getattr(args, key) is None:
                setattr(args, key, value)

    try:
        config = RunConfig.from_args(args)
    except SrvSimError as e:
        print('error: {}'.format(e), file=sys.stderr)
        return 2

    wandb_run = None
    if getattr(args, 'wandb_project', None) is not None:
        if wandb is None:
            print('wandb is not installed; continuing without it.')
        elif args.wandb_run is None:
            print('error: wandb_run must be specified if wandb_project is '
                  'specified.', file=sys.stderr)
            return 2
        else:
            wandb_run = wandb.init(project=args.wandb_project,
                                   name=args.wandb_run,
                                   config=config.to_dict())

    status = COMMANDS[args.command](config, wandb_run=wandb_run)
    if wandb_run is not None:
        wandb_run.finish()
    return status


if __name__ == '__main__':
    sys.exit(main())
