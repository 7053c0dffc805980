"""
Machine configuration.
"""

import enum
from dataclasses import asdict, dataclass
from typing import Optional

from srv_sim.errors import ConfigError
from srv_sim.lsu.tracker import ReplayPolicy
from srv_sim.utils import dataclass_from_dict
from srv_sim.vectorize.vector_program import VECTOR_WIDTHS, Strategy


class Mitigation(enum.Enum):
    NONE = 'none'
    MEM_FENCE = 'mem_fence'
    FENCE_RECOMPILED_SCALAR = 'fence_recompiled_scalar'
    VFENCE = 'vfence'
    VISIBILITY_DELAY = 'visibility_delay'
    CFENCE_STYLE = 'cfence_style'
    IN_ORDER = 'in_order'


MITIGATIONS = tuple(m.value for m in Mitigation)
STRATEGIES = tuple(s.value for s in Strategy)
STORE_VISIBILITY = ('buffered', 'immediate')


@dataclass(frozen=True)
class CoreConfig:
    """Parameters of one simulated core.

    replay_limit defaults to width - 1. store_visibility 'immediate' lets
    younger lanes of the same pass see older lanes' stores (experiment);
    'buffered' keeps stores private to their lane until the lane is final.
    """
    width: int = 16
    replay_limit: Optional[int] = None
    replay_policy: str = 'erroneous_only'
    strategy: str = 'srv'
    mitigation: str = 'none'
    mdp_threshold: int = 3
    branch_counter_bits: int = 2
    branch_counter_init: int = 1
    store_visibility: str = 'buffered'
    ooo_issue_noise: int = 8
    alu_latency: int = 1
    fence_latency: int = 20
    flexvec_check_overhead: int = 8
    page_size: int = 4096
    memory_size: int = 1 << 30
    layout_seed: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.width not in VECTOR_WIDTHS:
            raise ConfigError('width must be one of {}'.format(
                ', '.join(str(w) for w in VECTOR_WIDTHS)))
        if self.replay_limit is not None and \
                not 0 <= self.replay_limit <= self.width - 1:
            raise ConfigError('replay_limit must lie in [0, width - 1]')
        if self.strategy not in STRATEGIES:
            raise ConfigError('strategy must be one of {}'.format(
                ', '.join(STRATEGIES)))
        if self.mitigation not in MITIGATIONS:
            raise ConfigError('unknown mitigation {0!r}; valid names: '
                              '{1}'.format(self.mitigation,
                                           ', '.join(MITIGATIONS)))
        if self.replay_policy not in tuple(p.value for p in ReplayPolicy):
            raise ConfigError('unknown replay_policy {!r}'.format(
                self.replay_policy))
        if self.store_visibility not in STORE_VISIBILITY:
            raise ConfigError('store_visibility must be one of {}'.format(
                ', '.join(STORE_VISIBILITY)))
        if self.mdp_threshold < 0 or self.branch_counter_bits < 1:
            raise ConfigError('predictor parameters must be positive')
        if not 0 <= self.branch_counter_init < 1 << self.branch_counter_bits:
            raise ConfigError('branch_counter_init outside counter range')
        if self.ooo_issue_noise < 0:
            raise ConfigError('ooo_issue_noise must not be negative')

    @property
    def effective_replay_limit(self):
        return self.width - 1 if self.replay_limit is None \
            else self.replay_limit

    @property
    def strategy_kind(self):
        return Strategy(self.strategy)

    @property
    def mitigation_kind(self):
        return Mitigation(self.mitigation)

    @property
    def policy(self):
        return ReplayPolicy(self.replay_policy)

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        limit = d.pop('replay_limit', None)
        if limit is not None and (isinstance(limit, bool) or
                                  not isinstance(limit, int)):
            raise ConfigError('core.replay_limit must be an integer')
        config = dataclass_from_dict(cls, d, 'core')
        if limit is None:
            return config
        return config.replace(replay_limit=limit)

    def replace(self, **changes):
        values = asdict(self)
        values.update(changes)
        return CoreConfig(**values)

    def to_dict(self):
        return asdict(self)
