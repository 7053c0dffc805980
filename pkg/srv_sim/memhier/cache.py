"""
Inclusive, set-associative cache hierarchy with deterministic latencies.

Each level keeps, per set, a list of tags ordered from least to most recently
used. A line present at level k is present at every outer level; evicting a
line from an outer level back-invalidates it in the inner ones.
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple

from srv_sim.errors import ConfigError
from srv_sim.utils import dataclass_from_dict, parse_size, rng_from_seed

logger = logging.getLogger(__name__)

REPLACEMENT_POLICIES = ('lru', 'random')
# Scratch addresses used for flush-by-eviction, far above any laid-out array.
SCRATCH_BASE = 1 << 40


@dataclass(frozen=True)
class CacheLevelConfig:
    size: int
    assoc: int
    hit_latency: int
    line: int = 64

    @property
    def n_sets(self):
        return self.size // (self.line * self.assoc)


def _default_levels():
    return (CacheLevelConfig(size=64 << 10, assoc=8, hit_latency=40),
            CacheLevelConfig(size=32 << 20, assoc=16, hit_latency=150))


@dataclass(frozen=True)
class CacheConfig:
    """Geometry and latencies of the hierarchy, innermost level first."""
    levels: Tuple[CacheLevelConfig, ...] = field(
        default_factory=_default_levels)
    memory_latency: int = 400
    replacement: str = 'lru'
    seed: int = 0

    def __post_init__(self):
        if not self.levels:
            raise ConfigError('a cache needs at least one level')
        line = self.levels[0].line
        previous_latency = 0
        for idx, level in enumerate(self.levels):
            if level.line != line:
                raise ConfigError('all levels must share one line size')
            if line & (line - 1):
                raise ConfigError('line size must be a power of two')
            if level.size <= 0 or level.assoc <= 0 or \
                    level.size % (level.line * level.assoc):
                raise ConfigError(
                    'level {0} size {1} is not divisible by line x assoc'.format(
                        idx + 1, level.size))
            if level.hit_latency <= previous_latency:
                raise ConfigError('latencies must strictly increase with level')
            previous_latency = level.hit_latency
        if self.memory_latency <= previous_latency:
            raise ConfigError('memory latency must exceed every hit latency')
        if self.replacement not in REPLACEMENT_POLICIES:
            raise ConfigError('replacement must be one of {}'.format(
                ', '.join(REPLACEMENT_POLICIES)))

    @property
    def line(self):
        return self.levels[0].line

    @property
    def llc_size(self):
        return self.levels[-1].size

    @property
    def memory_level(self):
        return len(self.levels) + 1

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        levels = d.pop('levels', None)
        config = dataclass_from_dict(cls, d, 'cache')
        if levels is None:
            return config
        if not isinstance(levels, list) or not levels:
            raise ConfigError('cache.levels must be a non-empty list')
        parsed = []
        for idx, level in enumerate(levels):
            level = dict(level)
            if 'size' in level and isinstance(level['size'], str):
                level['size'] = parse_size(level['size'])
            parsed.append(dataclass_from_dict(
                CacheLevelConfig, level, 'cache.levels[{}]'.format(idx)))
        try:
            return cls(levels=tuple(parsed), memory_latency=config.memory_latency,
                       replacement=config.replacement, seed=config.seed)
        except TypeError as e:
            raise ConfigError('invalid cache: {}'.format(e))

    def to_dict(self):
        return {
            'levels': [{'size': l.size, 'assoc': l.assoc,
                        'hit_latency': l.hit_latency, 'line': l.line}
                       for l in self.levels],
            'memory_latency': self.memory_latency,
            'replacement': self.replacement,
            'seed': self.seed,
        }


class CacheLevel:
    """One set-associative level."""

    def __init__(self, config):
        self.config = config
        self.n_sets = config.n_sets
        self.assoc = config.assoc
        self.sets = [[] for _ in range(self.n_sets)]

    def split(self, line_addr):
        return line_addr % self.n_sets, line_addr // self.n_sets

    def contains(self, line_addr):
        set_idx, tag = self.split(line_addr)
        return tag in self.sets[set_idx]

    def touch(self, line_addr):
        set_idx, tag = self.split(line_addr)
        ways = self.sets[set_idx]
        ways.remove(tag)
        ways.append(tag)

    def insert(self, line_addr, rng=None):
        """Fill a line; returns the evicted line address or None."""
        set_idx, tag = self.split(line_addr)
        ways = self.sets[set_idx]
        victim = None
        if len(ways) >= self.assoc:
            victim_way = 0 if rng is None else int(rng.integers(len(ways)))
            victim = ways.pop(victim_way) * self.n_sets + set_idx
        ways.append(tag)
        return victim

    def invalidate(self, line_addr):
        set_idx, tag = self.split(line_addr)
        ways = self.sets[set_idx]
        if tag in ways:
            ways.remove(tag)
            return True
        return False

    def lines(self):
        for set_idx, ways in enumerate(self.sets):
            for tag in ways:
                yield tag * self.n_sets + set_idx

    def reset(self):
        self.sets = [[] for _ in range(self.n_sets)]


class CacheHierarchy:
    """Mutable cache state of one simulated machine.

    Arguments:
        config: CacheConfig
    """

    def __init__(self, config=None):
        self.config = CacheConfig() if config is None else config
        self.levels = [CacheLevel(level) for level in self.config.levels]
        self.line = self.config.line
        self._rng = rng_from_seed(self.config.seed) \
            if self.config.replacement == 'random' else None

    @property
    def memory_level(self):
        return self.config.memory_level

    def latency_of(self, level):
        if level == self.memory_level:
            return self.config.memory_latency
        return self.config.levels[level - 1].hit_latency

    def line_of(self, address):
        return address // self.line

    def lookup(self, address):
        """Innermost level holding address, without touching any state."""
        line_addr = self.line_of(address)
        for idx, level in enumerate(self.levels):
            if level.contains(line_addr):
                return idx + 1
        return self.memory_level

    def contains(self, address, level=None):
        """True if the line of address is valid at level (any level if None)."""
        line_addr = self.line_of(address)
        if level is None:
            return any(lvl.contains(line_addr) for lvl in self.levels)
        return self.levels[level - 1].contains(line_addr)

    def access(self, address, kind='load', fill=True):
        """Look up address, updating replacement state and filling on a miss.

        Arguments:
            address: byte address
            kind: 'load' or 'store' (write-allocate, so both behave alike)
            fill: if False the state is left untouched and only the level is
                reported

        Returns:
            Tuple of (hit_level, latency_ticks); hit_level is
            len(levels) + 1 for memory.
        """
        hit_level = self.lookup(address)
        if fill:
            line_addr = self.line_of(address)
            if hit_level != self.memory_level:
                self.levels[hit_level - 1].touch(line_addr)
            self._fill_inner(line_addr, hit_level)
        return hit_level, self.latency_of(hit_level)

    def fill(self, address):
        """Bring the line of address into every level."""
        line_addr = self.line_of(address)
        hit_level = self.lookup(address)
        if hit_level != self.memory_level:
            self.levels[hit_level - 1].touch(line_addr)
        self._fill_inner(line_addr, hit_level)

    def _fill_inner(self, line_addr, hit_level):
        # Outermost first so inclusion holds after every insert.
        for idx in range(min(hit_level, len(self.levels) + 1) - 2, -1, -1):
            self._insert(idx, line_addr)

    def _insert(self, level_idx, line_addr):
        victim = self.levels[level_idx].insert(line_addr, self._rng)
        if victim is not None:
            for inner in self.levels[:level_idx]:
                inner.invalidate(victim)

    def evict(self, address):
        """Remove the line of address from every level."""
        line_addr = self.line_of(address)
        for level in self.levels:
            level.invalidate(line_addr)

    def reset(self):
        for level in self.levels:
            level.reset()

    def stream(self, base, footprint):
        """Sequentially touch every line of [base, base + footprint).

        Returns:
            Number of line accesses performed.
        """
        first = self.line_of(base)
        last = self.line_of(base + footprint - 1)
        n_lines = last - first + 1
        if self._rng is not None:
            for line_addr in range(first, last + 1):
                self.access(line_addr * self.line, 'store')
            return n_lines
        for level in self.levels:
            self._stream_level(level, first, n_lines)
        self._enforce_inclusion()
        return n_lines

    @staticmethod
    def _stream_level(level, first, n_lines):
        # Under LRU each set ends with the untouched survivors followed by the
        # streamed tags in order, truncated to the newest assoc entries.
        n_sets = level.n_sets
        for offset in range(min(n_sets, n_lines)):
            line_addr = first + offset
            set_idx, first_tag = level.split(line_addr)
            count = (n_lines - offset + n_sets - 1) // n_sets
            new_tags = range(first_tag, first_tag + count)
            if count >= level.assoc:
                level.sets[set_idx] = list(new_tags[-level.assoc:])
                continue
            survivors = [t for t in level.sets[set_idx] if t not in new_tags]
            ways = survivors + list(new_tags)
            level.sets[set_idx] = ways[-level.assoc:]

    def _enforce_inclusion(self):
        for idx in range(len(self.levels) - 2, -1, -1):
            outer = self.levels[idx + 1]
            inner = self.levels[idx]
            for line_addr in list(inner.lines()):
                if not outer.contains(line_addr):
                    inner.invalidate(line_addr)

    def snapshot(self):
        """Hashable copy of the resident tags, for equality checks in tests."""
        return tuple(tuple(tuple(ways) for ways in level.sets)
                     for level in self.levels)


def trash_cache(state, footprint, base=SCRATCH_BASE):
    """Flush by eviction: write a scratch region of the given footprint.

    Arguments:
        state: CacheHierarchy
        footprint: bytes to stream, at least one line
        base: scratch region start

    Returns:
        Number of line accesses performed.
    """
    if footprint < state.line:
        raise ValueError('footprint must cover at least one line')
    n = state.stream(base, footprint)
    logger.debug('trashed cache with %d line writes', n)
    return n


class CacheView:
    """Read-only window on a hierarchy, handed to leakage descriptors."""

    def __init__(self, state):
        self._state = state

    @property
    def n_levels(self):
        return len(self._state.levels)

    def contains(self, address, level=None):
        return self._state.contains(address, level)

    def lookup(self, address):
        return self._state.lookup(address)
