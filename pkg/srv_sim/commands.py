"""
Subcommands of the srv_sim driver.

Each command takes a RunConfig, writes its artifacts under the output
directory and returns the exit status: 0 when the tool ran (whether or not
anything leaked), 2 when the configuration or input was unusable.
"""

import functools
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import pandas as pd

from srv_sim import __version__
from srv_sim.attacks.amplification import scenario_replay_amplification
from srv_sim.attacks.leaks import SCENARIO_RUNNERS
from srv_sim.attacks.matrix import matrix_table, run_matrix
from srv_sim.attacks.scenario import SCENARIO_DIR, load_scenario, \
    shipped_scenarios
from srv_sim.attacks.timing import scenario_evict_time
from srv_sim.errors import ConfigError, NoKnee, SrvSimError
from srv_sim.memhier.cache import CacheConfig, CacheHierarchy
from srv_sim.memhier.sweep import DEFAULT_SWEEP_SIZES, estimate_llc_size, \
    sweep_latency
from srv_sim.memhier.timer import TimerModel
from srv_sim.mld.descriptors import builtin_predicates
from srv_sim.mld.engine import MLD_VERSION
from srv_sim.parse_args import EMIT_CHOICES
from srv_sim.pipeline.config import MITIGATIONS
from srv_sim.pipeline.trace import TRACE_VERSION, write_records
from srv_sim.utils import default_seed, format_size, load_yaml, mkdir, \
    parse_size, pretify_dict, print_with_overwrite, save_yaml

logger = logging.getLogger(__name__)

REPORT_VERSION = 'report_v1'
CSV_VERSION = 'csv_v1'
RUN_CONFIG_VERSION = 'run_config_v1'

_CORE_OVERRIDES = ('width', 'mitigation', 'strategy')
_SCENARIO_OVERRIDES = ('trials', 'training_iterations')


@dataclass
class RunConfig:
    """Resolved command-line request.

    overrides maps option names (width, mitigation, strategy, trials,
    training_iterations, seed, jitter, granularity) to values that replace
    those of the scenario file.
    """
    command: str
    save_path: Path
    scenario: Optional[str] = None
    scenarios: Tuple[str, ...] = ()
    mitigations: Tuple[str, ...] = MITIGATIONS
    overrides: dict = field(default_factory=dict)
    emit: Tuple[str, ...] = ('report',)
    mlds: Tuple[str, ...] = ('dcache', 'branch', 'srv')
    n_jobs: int = 1
    min_trials: int = 64
    cache_config: Optional[str] = None
    sizes: Optional[Tuple[str, ...]] = None
    reps: int = 1

    def __post_init__(self):
        emit = []
        for item in self.emit:
            emit.extend(e for e in item.split(',') if e)
        unknown = sorted(set(emit) - set(EMIT_CHOICES))
        if unknown:
            raise ConfigError('unknown --emit value(s) {0}; valid: {1}'.format(
                ', '.join(unknown), ', '.join(EMIT_CHOICES)))
        self.emit = tuple(emit)
        bad = [m for m in self.mitigations if m not in MITIGATIONS]
        if bad:
            raise ConfigError('unknown mitigation {0!r}; valid names: '
                              '{1}'.format(bad[0], ', '.join(MITIGATIONS)))
        mitigation = self.overrides.get('mitigation')
        if mitigation is not None and mitigation not in MITIGATIONS:
            raise ConfigError('unknown mitigation {0!r}; valid names: '
                              '{1}'.format(mitigation, ', '.join(MITIGATIONS)))

    @classmethod
    def from_args(cls, args):
        overrides = {}
        for key in _CORE_OVERRIDES + _SCENARIO_OVERRIDES + (
                'seed', 'jitter', 'granularity'):
            value = getattr(args, key, None)
            if value is not None:
                overrides[key] = value
        save_path = Path(
            getattr(args, 'save_path', 'srv_output')).expanduser()
        if getattr(args, 'wandb_project', None) is not None:
            save_path = save_path / args.wandb_project / (
                args.wandb_run or 'default')
        return cls(
            command=args.command, save_path=save_path,
            scenario=getattr(args, 'scenario', None),
            scenarios=tuple(getattr(args, 'scenarios', ()) or ()),
            mitigations=tuple(getattr(args, 'mitigations', MITIGATIONS)),
            overrides=overrides,
            emit=tuple(getattr(args, 'emit', ('report',))),
            mlds=tuple(getattr(args, 'mld', None) or ()),
            n_jobs=getattr(args, 'n_jobs', 1),
            min_trials=getattr(args, 'min_trials', 64),
            cache_config=getattr(args, 'cache_config', None),
            sizes=None if getattr(args, 'sizes', None) is None
            else tuple(args.sizes),
            reps=getattr(args, 'reps', 1))

    def apply(self, scenario):
        """Scenario with the command-line overrides applied."""
        core = {k: self.overrides[k] for k in _CORE_OVERRIDES
                if k in self.overrides}
        if core:
            scenario = scenario.with_core(**core)
        changes = {k: self.overrides[k] for k in _SCENARIO_OVERRIDES
                   if k in self.overrides}
        if 'seed' in self.overrides:
            changes['seed'] = self.overrides['seed']
            scenario = scenario.with_core(seed=self.overrides['seed'])
        if changes:
            scenario = scenario.replace(**changes)
        timer = {}
        if 'jitter' in self.overrides:
            timer['jitter_stddev'] = float(self.overrides['jitter'])
        if 'granularity' in self.overrides:
            timer['granularity'] = self.overrides['granularity']
        if timer:
            scenario = scenario.with_timer(**timer)
        return scenario

    def to_dict(self):
        return {'command': self.command, 'save_path': str(self.save_path),
                'scenario': self.scenario, 'scenarios': list(self.scenarios),
                'mitigations': list(self.mitigations),
                'overrides': dict(self.overrides), 'emit': list(self.emit),
                'mlds': list(self.mlds), 'n_jobs': self.n_jobs,
                'min_trials': self.min_trials,
                'cache_config': self.cache_config,
                'sizes': None if self.sizes is None else list(self.sizes),
                'reps': self.reps, 'version': __version__}


def _write_text(path, version, lines):
    with open(path, 'w') as f:
        f.write('# {}\n'.format(version))
        for line in lines:
            f.write(line + '\n')


def _write_csv(path, df):
    with open(path, 'w') as f:
        f.write('# {}\n'.format(CSV_VERSION))
        df.to_csv(f, index=False)


def read_csv(path):
    """Read a CSV written by the commands, skipping its version header."""
    return pd.read_csv(path, comment='#')


def _write_run_config(save_path, config, resolved=None):
    d = {'run': config.to_dict()}
    if resolved is not None:
        d['scenario'] = resolved
    path = save_path / 'run_config.yaml'
    save_yaml(d, path)
    text = path.read_text()
    path.write_text('# {}\n'.format(RUN_CONFIG_VERSION) + text)


def _guarded(func):
    @functools.wraps(func)
    def wrapper(config, *args, **kwargs):
        try:
            return func(config, *args, **kwargs)
        except (SrvSimError, ValueError) as e:
            print('error: {}'.format(e), file=sys.stderr)
            return 2
    return wrapper


@_guarded
def cmd_run(config, wandb_run=None):
    """Run one scenario file and write its report and requested artifacts."""
    if config.scenario is None:
        raise ConfigError('run needs a scenario file')
    scenario = config.apply(load_scenario(config.scenario))
    save_path = mkdir(config.save_path)
    _write_run_config(save_path, config, scenario.to_dict())
    lines = ['scenario: {0} ({1})'.format(scenario.name, scenario.kind),
             'strategy: {}'.format(scenario.core.strategy),
             'mitigation: {}'.format(scenario.core.mitigation)]
    n_levels = len(scenario.cache.levels)
    table = None
    if scenario.kind in SCENARIO_RUNNERS:
        predicates = builtin_predicates(config.mlds) \
            if 'mld' in config.emit else ()
        keep = 'trace' in config.emit or 'mld' in config.emit
        result = SCENARIO_RUNNERS[scenario.kind](
            scenario, predicates=predicates, keep_traces=keep)
        lines += ['trials: {}'.format(len(result.symbols)),
                  'accuracy: {:.4f}'.format(result.accuracy),
                  'recovered: {!r}'.format(result.recovered),
                  'replays: {}'.format(sum(map(sum, result.replay_counts))),
                  'squashes: {}'.format(sum(result.squash_counts)),
                  'fallback: {}'.format(result.fallback)]
        table = pd.DataFrame({
            'trial': range(len(result.symbols)),
            'expected': [result.expected(t)
                         for t in range(len(result.symbols))],
            'recovered': [-1 if s is None else s for s in result.symbols],
            'correct': result.per_byte_correct,
            'ambiguous': result.ambiguous,
            'hit_latencies': [' '.join(map(str, h))
                              for h in result.hit_latencies]})
        if 'trace' in config.emit:
            records = [dict(event.to_record(n_levels), trial=trial)
                       for trial, trace in enumerate(result.traces)
                       for event in trace]
            write_records(save_path / 'trace.jsonl', TRACE_VERSION, records)
        if 'mld' in config.emit:
            write_records(save_path / 'mld.jsonl', MLD_VERSION,
                          result.mld_records)
        if wandb_run is not None:
            wandb_run.log(result.to_record())
    elif scenario.kind == 'evict_time':
        report = scenario_evict_time(scenario)
        lines += ['{0}: {1}'.format(k, v)
                  for k, v in report.to_record().items()]
        table = pd.DataFrame({'seed': range(len(report.samples)),
                              'dependent_ticks': report.samples})
    else:
        report = scenario_replay_amplification(scenario)
        lines += ['replays: {}'.format(report.replays),
                  'transmissions: {}'.format(report.transmissions)]
        table = report.curve
    if 'report' in config.emit:
        _write_text(save_path / 'report.txt', REPORT_VERSION, lines)
    if 'csv' in config.emit and table is not None:
        _write_csv(save_path / 'results.csv', table)
    print('\n'.join(lines))
    return 0


def _resolve_scenario(name):
    path = Path(name).expanduser()
    if path.suffix in ('.yaml', '.yml'):
        return load_scenario(path)
    return load_scenario(SCENARIO_DIR / '{}.yaml'.format(name))


@_guarded
def cmd_matrix(config, wandb_run=None):
    """Evaluate every scenario under every mitigation; write CSV + report."""
    if not config.scenarios:
        raise ConfigError('matrix needs at least one scenario')
    scenarios = [config.apply(_resolve_scenario(s)) for s in config.scenarios]
    kinds = [s.kind for s in scenarios if s.kind not in SCENARIO_RUNNERS]
    if kinds:
        raise ConfigError('matrix cells must be leak scenarios, not '
                          '{}'.format(kinds[0]))
    save_path = mkdir(config.save_path)
    _write_run_config(save_path, config)
    df = run_matrix(scenarios, config.mitigations, n_jobs=config.n_jobs,
                    min_trials=config.min_trials, wandb_run=wandb_run)
    _write_csv(save_path / 'matrix.csv', df)
    table = matrix_table(df)
    _write_text(save_path / 'matrix.txt', REPORT_VERSION,
                table.to_string().split('\n'))
    print(table.to_string())
    return 0


def _sweep_cache(config):
    if config.cache_config is None:
        return CacheConfig()
    d = load_yaml(config.cache_config)
    if not isinstance(d, dict):
        raise ConfigError('{} must hold a mapping'.format(config.cache_config))
    return CacheConfig.from_dict(d.get('cache', d))


@_guarded
def cmd_sweep(config, wandb_run=None):
    """Sweep working-set sizes; write the latency table and LLC estimate."""
    cache_config = _sweep_cache(config)
    sizes = DEFAULT_SWEEP_SIZES if config.sizes is None \
        else [parse_size(s) for s in config.sizes]
    seed = config.overrides.get('seed', default_seed())
    timer = TimerModel(granularity=config.overrides.get('granularity', 1),
                       jitter_stddev=float(config.overrides.get('jitter', 0)),
                       seed=seed)
    save_path = mkdir(config.save_path)
    _write_run_config(save_path, config, {'cache': cache_config.to_dict(),
                                          'timer': timer.to_dict()})

    def progress(idx, n, size):
        print_with_overwrite(('Size', '{0}/{1}'.format(idx + 1, n),
                              format_size(size)))

    table = sweep_latency(CacheHierarchy(cache_config), sizes,
                          reps=config.reps, timer=timer, progress=progress)
    print()
    if wandb_run is not None:
        for record in table.to_dict('records'):
            wandb_run.log(record)
    _write_csv(save_path / 'sweep.csv', table)
    try:
        estimate = format_size(estimate_llc_size(table))
    except NoKnee as e:
        logger.warning('no knee in the latency curve: %s', e)
        estimate = 'none'
    line = 'estimated LLC size: {}'.format(estimate)
    _write_text(save_path / 'sweep.txt', REPORT_VERSION, [line])
    print(line)
    return 0


@_guarded
def cmd_list_scenarios(config, wandb_run=None):
    """Print name and kind of every shipped scenario."""
    rows = []
    for path in shipped_scenarios():
        scenario = load_scenario(path)
        rows.append({'file': path.name, 'name': scenario.name,
                     'kind': scenario.kind,
                     'strategy': scenario.core.strategy})
    print(pretify_dict({r['name']: '{0} ({1}, {2})'.format(
        r['kind'], r['strategy'], r['file']) for r in rows}))
    return 0


COMMANDS = {
    'run': cmd_run,
    'matrix': cmd_matrix,
    'sweep': cmd_sweep,
    'list-scenarios': cmd_list_scenarios,
}
