"""
Observation model of a coarse software timer.

A helper thread incrementing a counter gives the attacker a clock with a
fixed granularity and some jitter; observed latencies are the true latency
plus gaussian noise, floored to the granularity.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from srv_sim.errors import ConfigError
from srv_sim.utils import dataclass_from_dict, rng_from_seed


class Observation(enum.Enum):
    HIT = 'hit'
    MISS = 'miss'


@dataclass
class TimerModel:
    granularity: int = 1
    jitter_stddev: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(
        default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.granularity < 1:
            raise ConfigError('timer granularity must be at least 1')
        if self.jitter_stddev < 0:
            raise ConfigError('timer jitter must not be negative')

    @property
    def rng(self):
        if self._rng is None:
            self._rng = rng_from_seed(self.seed)
        return self._rng

    def reseeded(self, seed):
        return TimerModel(self.granularity, self.jitter_stddev, seed)

    @classmethod
    def from_dict(cls, d):
        return dataclass_from_dict(cls, d, 'timer')

    def to_dict(self):
        return {'granularity': self.granularity,
                'jitter_stddev': self.jitter_stddev, 'seed': self.seed}


def observe(latency, timer):
    """Observed ticks for one access of the given true latency."""
    return int(observe_many(np.array([latency]), timer)[0])


def observe_many(latencies, timer):
    """Vectorised observe over an array of latencies.

    Arguments:
        latencies: array-like of true latencies in ticks
        timer: TimerModel; its generator advances by one draw per latency

    Returns:
        numpy int64 array of observed ticks, never negative.
    """
    raw = np.asarray(latencies, dtype=np.float64)
    if timer.jitter_stddev > 0:
        raw = raw + timer.rng.normal(0.0, timer.jitter_stddev, size=raw.shape)
    quantised = np.floor(raw / timer.granularity) * timer.granularity
    return np.maximum(quantised, 0).astype(np.int64)


def classify(observed, threshold):
    """Hit iff the observed latency is strictly below threshold."""
    if threshold <= 0:
        raise ValueError('threshold must be positive')
    return Observation.HIT if observed < threshold else Observation.MISS
