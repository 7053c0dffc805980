"""
Microarchitectural leakage descriptors: predicates evaluated on simulator
events that flag when an optimization could have been used to leak.

A descriptor for a speculative optimization catches the misprediction that
forces a flush or replay; one for a non-speculative optimization catches
the event whose timing depends on data. The kind tag records which case a
descriptor covers; nothing enforces it.
"""

from dataclasses import dataclass
from typing import Callable, Tuple

SPECULATIVE = 'speculative'
NON_SPECULATIVE = 'non_speculative'


@dataclass(frozen=True)
class MldPredicate:
    """A named predicate subscribed to some event kinds.

    evaluate receives the event and a read-only MicroarchState (cache view,
    branch predictor view and, for LSQ events, the entry) and returns a
    truth value. It must not change simulator state.
    """
    name: str
    kinds: Tuple[str, ...]
    evaluate: Callable
    kind: str = SPECULATIVE

    def subscribes(self, event):
        return event.kind in self.kinds


def mld_dcache(event, state, level=1):
    """True iff event's line is valid at level before the access."""
    if event.address is None:
        return False
    return state.cache.contains(event.address, level)


def mld_branch(event, state):
    """True iff the predicted direction differs from the resolved one."""
    return bool(event.detail.get('predicted')) != \
        bool(event.detail.get('taken'))


def mld_srv(event, state):
    """True iff the LSQ entry has horizontally overlapped bytes."""
    return state.entry is not None and bool(state.entry.hob)


def dcache_predicate(level=1, name=None):
    """Data cache descriptor querying a given level (None: any level)."""
    if name is None:
        name = {1: 'dcache', None: 'dcache_any'}.get(
            level, 'dcache_l{}'.format(level))
    return MldPredicate(
        name,
        ('load', 'store', 'probe'),
        lambda event, state: mld_dcache(event, state, level),
        NON_SPECULATIVE)


DCACHE = dcache_predicate()
BRANCH = MldPredicate('branch', ('branch',), mld_branch)
SRV = MldPredicate('srv', ('lsq',), mld_srv)

BUILTIN_MLDS = {p.name: p for p in (DCACHE, BRANCH, SRV)}


def builtin_predicates(names):
    """Look up builtin descriptors by name.

    Raises:
        KeyError naming the valid descriptors if a name is unknown.
    """
    result = []
    for name in names:
        if name not in BUILTIN_MLDS:
            raise KeyError('unknown MLD {0!r}; valid names: {1}'.format(
                name, ', '.join(sorted(BUILTIN_MLDS))))
        result.append(BUILTIN_MLDS[name])
    return result
