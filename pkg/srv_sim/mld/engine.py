"""
Evaluation of leakage descriptors alongside a simulation.
"""

import logging
from collections import Counter, namedtuple

from srv_sim.pipeline.runners import build_core
from srv_sim.pipeline.trace import write_records

logger = logging.getLogger(__name__)

MLD_VERSION = 'mld_v1'

MldFiring = namedtuple('MldFiring', 'tick name instr_seq lane detail')


class MldReport:
    """Firings in the order the events occurred."""

    def __init__(self):
        self.firings = []

    def append(self, firing):
        self.firings.append(firing)

    def __len__(self):
        return len(self.firings)

    def __iter__(self):
        return iter(self.firings)

    def named(self, name):
        return [f for f in self.firings if f.name == name]

    def counts(self):
        return Counter(f.name for f in self.firings)

    def lanes(self, name):
        return sorted({f.lane for f in self.named(name)})

    def to_records(self):
        return [{'tick': f.tick, 'name': f.name, 'instr_seq': f.instr_seq,
                 'lane': f.lane, 'detail': f.detail} for f in self.firings]

    def write(self, path):
        write_records(path, MLD_VERSION, self.to_records())


def evaluate_mld_hooks(event, state, predicates):
    """Offer one event to every subscribed predicate.

    Arguments:
        event: Event, not yet applied to the microarchitectural state
        state: read-only MicroarchState
        predicates: iterable of MldPredicate

    Returns:
        List of MldFiring.
    """
    firings = []
    for predicate in predicates:
        if predicate.subscribes(event) and predicate.evaluate(event, state):
            detail = {'kind': event.kind}
            if event.address is not None:
                detail['address'] = hex(event.address)
            if state.entry is not None:
                detail['hob'] = state.entry.hob.hex()
            firings.append(MldFiring(event.tick, predicate.name,
                                     event.instr_seq, event.lane, detail))
    return firings


class MldEngine:
    """Holds the registered predicates and accumulates their firings.

    Arguments:
        predicates: iterable of MldPredicate
    """

    def __init__(self, predicates=()):
        self.predicates = list(predicates)
        self.report = MldReport()

    def offer(self, event, state):
        if not self.predicates:
            return
        for firing in evaluate_mld_hooks(event, state, self.predicates):
            logger.debug('MLD %s fired at tick %d (instr %d, lane %d)',
                         firing.name, firing.tick, firing.instr_seq,
                         firing.lane)
            self.report.append(firing)


def run_with_mlds(program, memory, config=None, predicates=(), cache=None,
                  core=None):
    """Run program with leakage descriptors attached.

    Arguments:
        program: GadgetProgram
        memory: MemoryImage
        config: CoreConfig choosing the machine
        predicates: iterable of MldPredicate
        cache: CacheHierarchy or CacheConfig for a new core
        core: existing core to reuse (keeps its cache and predictors); its
            engine is replaced for this run

    Returns:
        Tuple of (ExecResult, MldReport).
    """
    engine = MldEngine(predicates)
    if core is None:
        core = build_core(config, cache, engine)
    previous, core.mld_engine = core.mld_engine, engine
    try:
        result = core.run(program, memory)
    finally:
        core.mld_engine = previous
    logger.info('MLD firings: %s', dict(engine.report.counts()))
    return result, engine.report
