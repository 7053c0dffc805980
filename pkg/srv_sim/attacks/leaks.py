"""
End-to-end covert-channel leaks: train, flush, arm, decode.

Every trial trains the machine with benign data, trashes the cache, runs the
gadget once with data that makes it reach the secret through speculation
and decodes the symbol from the cache. Byte trial % len(secret) of the
secret is targeted by trial number trial.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from srv_sim.attacks.channel import reload_decode
from srv_sim.errors import ConfigError, NoSymbol
from srv_sim.isa.interpreter import run_reference
from srv_sim.memhier.cache import CacheHierarchy, trash_cache
from srv_sim.mld.engine import run_with_mlds
from srv_sim.pipeline.runners import build_core
from srv_sim.vectorize.vector_program import Strategy

logger = logging.getLogger(__name__)


@dataclass
class LeakResult:
    scenario: str
    mitigation: str
    secret: bytes
    symbols: List[Optional[int]] = field(default_factory=list)
    ambiguous: List[bool] = field(default_factory=list)
    hit_latencies: List[list] = field(default_factory=list)
    replay_counts: List[list] = field(default_factory=list)
    squash_counts: List[int] = field(default_factory=list)
    architectural_ok: List[bool] = field(default_factory=list)
    mld_firings: List[dict] = field(default_factory=list)
    fallback: bool = False
    traces: List[list] = field(default_factory=list)
    mld_records: List[dict] = field(default_factory=list)

    def expected(self, trial):
        return self.secret[trial % len(self.secret)]

    @property
    def per_byte_correct(self):
        return [s == self.expected(t) for t, s in enumerate(self.symbols)]

    @property
    def accuracy(self):
        if not self.symbols:
            return 0.0
        return float(np.mean(self.per_byte_correct))

    @property
    def n_correct(self):
        return int(sum(self.per_byte_correct))

    @property
    def recovered(self):
        return bytes(ord('?') if s is None else s for s in self.symbols)

    def to_record(self):
        return {'scenario': self.scenario, 'mitigation': self.mitigation,
                'trials': len(self.symbols), 'correct': self.n_correct,
                'accuracy': self.accuracy,
                'ambiguous': int(sum(self.ambiguous)),
                'no_symbol': sum(s is None for s in self.symbols),
                'replays': int(sum(sum(r) for r in self.replay_counts)),
                'squashes': int(sum(self.squash_counts)),
                'architectural_ok': all(self.architectural_ok)}


def secret_link(program, secret_array='secret'):
    """(name, offset) of the array whose linked region covers the secret."""
    for decl in program.arrays:
        if decl.linked == secret_array:
            return decl.name, decl.link_offset
    raise ConfigError('no array of the gadget is linked to {}'.format(
        secret_array))


def store_secret(memory, secret, secret_array='secret'):
    decl = memory.program.array(secret_array)
    if len(secret) > decl.length:
        raise ConfigError('secret of {0} bytes does not fit array {1} of '
                          '{2}'.format(len(secret), secret_array, decl.length))
    for i, byte in enumerate(secret):
        memory.write_element(secret_array, i, byte)


class SrvLeakArming:
    """Cross-lane store-to-load gadget A[x[z]] = encode[secret_val[A[z]]].

    Benign data makes every lane write its own element. Armed data makes
    lane 0 overwrite A[1], which lane 1 loads in the same vector load: the
    stale A[1] is a cross-object index into the secret.
    """

    def benign(self, memory, program, trial):
        for z in range(program.trip_count):
            memory.write_element('x', z, z)
            memory.write_element('A', z, z)

    def armed(self, memory, program, pos):
        self.benign(memory, program, 0)
        _, offset = secret_link(program)
        memory.write_element('x', 0, 1)
        memory.write_element('x', 1, 0)
        memory.write_element('A', 1, offset + pos)


class SpectreStlArming:
    """ptr[idx[0]] = 0 followed by a load of ptr[0]: the load bypasses the
    aliasing store once the dependence predictor has been trained."""

    def benign(self, memory, program, trial):
        memory.write_element('idx', 0, 1)
        memory.write_element('ptr', 0, 0)

    def armed(self, memory, program, pos):
        _, offset = secret_link(program)
        memory.write_element('idx', 0, 0)
        memory.write_element('ptr', 0, offset + pos)


class SpectreV1Arming:
    """Bounds-checked table lookup trained with in-bounds indices."""

    def benign(self, memory, program, trial):
        bound = program.param_values.get('bound', 1)
        memory.write_element('xs', 0, trial % max(bound, 1))

    def armed(self, memory, program, pos):
        _, offset = secret_link(program)
        memory.write_element('xs', 0, offset + pos)


ARMING = {
    'srv_leak': SrvLeakArming(),
    'spectre_stl': SpectreStlArming(),
    'spectre_v1': SpectreV1Arming(),
}


def run_leak(scenario, n_trials=None, predicates=(), check_oracle=True,
             keep_traces=False):
    """Run the train/flush/arm/decode sequence of a leak scenario.

    One core (cache and predictors) persists across all trials.

    Arguments:
        scenario: Scenario of kind srv_leak, spectre_stl or spectre_v1
        n_trials: trial count (default scenario.n_trials)
        predicates: leakage descriptors attached to every run
        check_oracle: compare every armed run with the scalar reference
        keep_traces: keep the event trace and descriptor firings of every
            armed run

    Returns:
        LeakResult. Trials without any hit decode to None and count as
        incorrect.
    """
    if scenario.kind not in ARMING:
        raise ConfigError('{} is not a leak scenario'.format(scenario.kind))
    arming = ARMING[scenario.kind]
    program = scenario.program
    scenario.channel.check(program, scenario.cache.line)
    base = scenario.memory()
    store_secret(base, scenario.secret)
    core = build_core(scenario.core, CacheHierarchy(scenario.cache))
    timer = scenario.timer.reseeded(scenario.seed)
    n_trials = scenario.n_trials if n_trials is None else n_trials
    result = LeakResult(scenario.name, scenario.core.mitigation,
                        bytes(scenario.secret))
    for trial in range(n_trials):
        pos = trial % len(scenario.secret)
        training_firings = 0
        for t in range(scenario.training_iterations):
            memory = base.copy()
            arming.benign(memory, program, trial * scenario.training_iterations
                          + t)
            _, report = run_with_mlds(program, memory, predicates=predicates,
                                      core=core)
            training_firings += len(report)
        trash_cache(core.cache, 2 * scenario.cache.llc_size)
        memory = base.copy()
        arming.armed(memory, program, pos)
        run, report = run_with_mlds(program, memory, predicates=predicates,
                                    core=core)
        result.mld_firings.append({'training': training_firings,
                                   'armed': len(report)})
        if keep_traces:
            result.traces.append(run.trace)
            result.mld_records.extend(
                dict(record, trial=trial) for record in report.to_records())
        result.replay_counts.append(list(run.replay_counts))
        result.squash_counts.append(run.squash_count)
        if check_oracle:
            result.architectural_ok.append(
                run.final_memory == run_reference(program, memory))
        try:
            decoded = reload_decode(core.cache, memory, scenario.channel,
                                    timer)
        except NoSymbol:
            result.symbols.append(None)
            result.ambiguous.append(False)
            result.hit_latencies.append([])
            continue
        result.symbols.append(decoded.symbol)
        result.ambiguous.append(decoded.ambiguous)
        result.hit_latencies.append(
            [int(t) for t in decoded.latencies
             if t < scenario.channel.threshold])
    result.fallback = core.fallback_active
    logger.info('%s under %s: %d/%d bytes recovered', scenario.name,
                scenario.core.mitigation, result.n_correct, n_trials)
    return result


def _require(scenario, kind, strategies):
    if scenario.kind != kind:
        raise ConfigError('expected a {0} scenario, got {1}'.format(
            kind, scenario.kind))
    if scenario.core.strategy_kind not in strategies:
        raise ConfigError('{0} needs strategy {1}, got {2}'.format(
            kind, ' or '.join(s.value for s in strategies),
            scenario.core.strategy))


def scenario_srv_leak(scenario, **kwargs):
    """Leak through a stale cross-lane load inside a vectorized region."""
    _require(scenario, 'srv_leak', (Strategy.SRV, Strategy.VFENCED_SRV,
                                    Strategy.SCALAR_FALLBACK,
                                    Strategy.FLEXVEC))
    return run_leak(scenario, **kwargs)


def scenario_spectre_stl(scenario, **kwargs):
    """Leak through a load that bypassed an aliasing older store."""
    _require(scenario, 'spectre_stl', (Strategy.SCALAR_OOO,))
    return run_leak(scenario, **kwargs)


def scenario_spectre_v1(scenario, **kwargs):
    """Leak through a mispredicted bounds check."""
    _require(scenario, 'spectre_v1', (Strategy.SCALAR_OOO,))
    return run_leak(scenario, **kwargs)


SCENARIO_RUNNERS = {
    'srv_leak': scenario_srv_leak,
    'spectre_stl': scenario_spectre_stl,
    'spectre_v1': scenario_spectre_v1,
}
