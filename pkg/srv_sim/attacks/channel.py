"""
Flush+reload covert channel over an encode array.

The victim touches entry s of the encode array, one cache line per symbol;
the attacker times a reload of every entry and takes the one that hits.
"""

import logging
from collections import namedtuple
from dataclasses import asdict, dataclass

import numpy as np

from srv_sim.errors import ConfigError, NoSymbol
from srv_sim.memhier.timer import Observation, classify, observe_many
from srv_sim.utils import dataclass_from_dict

logger = logging.getLogger(__name__)

POC_SECRET = b'XXThe Magic Words are Squeamish Ossifrage.'

DecodeResult = namedtuple('DecodeResult', 'symbol ambiguous latencies')


@dataclass(frozen=True)
class CovertChannel:
    """Encode array name, symbol count, bytes between symbols and the hit
    threshold in timer ticks."""
    array: str = 'encode_array'
    entries: int = 256
    stride: int = 64
    threshold: int = 101

    def __post_init__(self):
        if self.entries < 1:
            raise ConfigError('channel needs at least one entry')
        if self.threshold <= 0:
            raise ConfigError('channel threshold must be positive')

    def check(self, program, line):
        """Raise ConfigError unless every symbol has its own line."""
        if self.stride < line or self.stride % line:
            raise ConfigError('channel stride {0} is not a multiple of the '
                              '{1} byte line'.format(self.stride, line))
        decl = program.array(self.array)
        if decl.footprint < self.entries * self.stride:
            raise ConfigError('array {0} is too small for {1} entries of '
                              '{2} bytes'.format(self.array, self.entries,
                                                 self.stride))

    def entry_addresses(self, memory):
        decl = memory.program.array(self.array)
        return [memory.resolve_element(
            self.array, i * self.stride // decl.elem_size)[0]
            for i in range(self.entries)]

    @classmethod
    def from_dict(cls, d):
        return dataclass_from_dict(cls, d, 'channel')

    def to_dict(self):
        return asdict(self)


def reload_decode(cache, memory, channel, timer):
    """Time a reload of every encode entry and recover the symbol.

    Reloads only look the lines up: decoding leaves the cache as it was.

    Arguments:
        cache: CacheHierarchy after the victim ran
        memory: MemoryImage giving the encode array's layout
        channel: CovertChannel
        timer: TimerModel used to observe each reload

    Returns:
        DecodeResult; symbol is the unique hit, or the fastest hit with
        ambiguous set when several entries hit.

    Raises:
        NoSymbol if no entry hits.
    """
    addresses = channel.entry_addresses(memory)
    latencies = np.array([cache.latency_of(cache.lookup(a))
                          for a in addresses])
    observed = observe_many(latencies, timer)
    hits = [i for i, ticks in enumerate(observed)
            if classify(ticks, channel.threshold) is Observation.HIT]
    if not hits:
        raise NoSymbol('no encode entry hit below {} ticks'.format(
            channel.threshold))
    if len(hits) == 1:
        return DecodeResult(hits[0], False, observed)
    symbol = min(hits, key=lambda i: (observed[i], i))
    logger.warning('%d encode entries hit; taking the fastest, %#x',
                   len(hits), symbol)
    return DecodeResult(symbol, True, observed)
