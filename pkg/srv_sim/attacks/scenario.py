"""
Scenario files: a gadget plus the machine, cache, timer and channel it runs
on.

    scenario:
      name: srv_leak
      kind: srv_leak
      gadget: ../gadgets/srv_leak.gadget   # relative to this file
      training_iterations: 3
      secret: "XXThe Magic Words are Squeamish Ossifrage."
      trials: 42
      params: {}
    core: {width: 16, strategy: srv, mitigation: none}
    cache:
      levels:
        - {size: 32KB, assoc: 8, hit_latency: 40}
        - {size: 1MB, assoc: 16, hit_latency: 150}
      memory_latency: 400
    timer: {granularity: 1, jitter_stddev: 0.0}
    channel: {stride: 64, threshold: 101}
    seed: 0
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import yaml

from srv_sim.attacks.channel import POC_SECRET, CovertChannel
from srv_sim.errors import ConfigError
from srv_sim.isa.gadget_parser import load_gadget
from srv_sim.isa.memory import MemoryImage
from srv_sim.memhier.cache import CacheConfig
from srv_sim.memhier.timer import TimerModel
from srv_sim.pipeline.config import CoreConfig
from srv_sim.utils import default_seed, load_yaml

SCENARIO_KINDS = ('srv_leak', 'spectre_stl', 'spectre_v1', 'evict_time',
                  'replay_amplification')
SCENARIO_DIR = Path(__file__).resolve().parents[2] / 'scenarios'

_SECTIONS = ('scenario', 'core', 'cache', 'timer', 'channel', 'seed')
_SCENARIO_KEYS = ('name', 'kind', 'gadget', 'training_iterations', 'secret',
                  'trials', 'params')


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str
    program: object
    training_iterations: int = 3
    secret: bytes = POC_SECRET
    trials: Optional[int] = None
    channel: CovertChannel = field(default_factory=CovertChannel)
    core: CoreConfig = field(default_factory=CoreConfig)
    cache: CacheConfig = field(default_factory=CacheConfig)
    timer: TimerModel = field(default_factory=TimerModel)
    seed: int = 0
    gadget_path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ConfigError('unknown scenario kind {0!r}; valid kinds: '
                              '{1}'.format(self.kind, ', '.join(SCENARIO_KINDS)))
        if not self.secret:
            raise ConfigError('scenario secret must not be empty')
        if self.training_iterations < 0:
            raise ConfigError('training_iterations must not be negative')
        if self.trials is not None and self.trials < 1:
            raise ConfigError('trials must be positive')

    @property
    def n_trials(self):
        return len(self.secret) if self.trials is None else self.trials

    def with_core(self, **changes):
        return replace(self, core=self.core.replace(**changes))

    def with_timer(self, **changes):
        values = self.timer.to_dict()
        values.update(changes)
        return replace(self, timer=TimerModel(**values))

    def replace(self, **changes):
        return replace(self, **changes)

    def memory(self):
        """Base memory image, laid out with the core's page and seed."""
        return MemoryImage.for_program(
            self.program, page_size=self.core.page_size,
            memory_size=self.core.memory_size, seed=self.core.layout_seed)

    def to_dict(self):
        secret = self.secret.decode('latin-1')
        return {
            'scenario': {'name': self.name, 'kind': self.kind,
                         'gadget': self.gadget_path,
                         'training_iterations': self.training_iterations,
                         'secret': secret, 'trials': self.trials,
                         'params': dict(self.program.params)},
            'core': self.core.to_dict(),
            'cache': self.cache.to_dict(),
            'timer': self.timer.to_dict(),
            'channel': self.channel.to_dict(),
            'seed': self.seed,
        }


def scenario_from_dict(d, base_dir='.'):
    """Build a Scenario from the mapping of a scenario file.

    Arguments:
        d: mapping with the sections scenario, core, cache, timer, channel
            and seed
        base_dir: directory the gadget path is relative to

    Raises:
        ConfigError for unknown sections or keys and wrongly typed values;
        GadgetSyntaxError or ValidationError from the gadget.
    """
    if not isinstance(d, dict):
        raise ConfigError('a scenario file must hold a mapping')
    unknown = sorted(set(d) - set(_SECTIONS))
    if unknown:
        raise ConfigError('unknown section(s): {}'.format(', '.join(unknown)))
    section = dict(d.get('scenario') or {})
    unknown = sorted(set(section) - set(_SCENARIO_KEYS))
    if unknown:
        raise ConfigError('unknown key(s) in scenario: {}'.format(
            ', '.join(unknown)))
    for key in ('name', 'kind', 'gadget'):
        if not isinstance(section.get(key), str):
            raise ConfigError('scenario.{} must be a string'.format(key))
    gadget_path = Path(base_dir) / section['gadget']
    if not gadget_path.is_file():
        raise ConfigError('gadget file {} not found'.format(gadget_path))
    program = load_gadget(gadget_path)
    params = section.get('params') or {}
    if not isinstance(params, dict) or not all(
            isinstance(v, int) and not isinstance(v, bool)
            for v in params.values()):
        raise ConfigError('scenario.params must map names to integers')
    if params:
        program = program.with_params(**params)
    secret = section.get('secret', POC_SECRET)
    if isinstance(secret, str):
        secret = secret.encode('latin-1')
    for key in ('training_iterations', 'trials'):
        value = section.get(key)
        if value is not None and (isinstance(value, bool) or
                                  not isinstance(value, int)):
            raise ConfigError('scenario.{} must be an integer'.format(key))
    seed = d.get('seed')
    if seed is None:
        seed = default_seed()
    elif isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError('seed must be an integer')
    kwargs = {}
    if section.get('training_iterations') is not None:
        kwargs['training_iterations'] = section['training_iterations']
    timer = dict(d.get('timer') or {})
    timer.setdefault('seed', seed)
    return Scenario(
        name=section['name'], kind=section['kind'], program=program,
        secret=bytes(secret), trials=section.get('trials'),
        channel=CovertChannel.from_dict(d.get('channel')),
        core=CoreConfig.from_dict(d.get('core')),
        cache=CacheConfig.from_dict(d.get('cache')),
        timer=TimerModel.from_dict(timer), seed=seed,
        gadget_path=str(gadget_path), **kwargs)


def load_scenario(path):
    """Read a scenario YAML file; the gadget path is relative to it."""
    path = Path(path).expanduser()
    if not path.is_file():
        raise ConfigError('scenario file {} not found'.format(path))
    try:
        d = load_yaml(path)
    except yaml.YAMLError as e:
        raise ConfigError('cannot parse {0}: {1}'.format(path, e))
    return scenario_from_dict(d, path.parent)


def shipped_scenarios():
    """Paths of the scenario files in the repository's scenarios folder."""
    return sorted(SCENARIO_DIR.glob('*.yaml'))
