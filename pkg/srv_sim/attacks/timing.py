"""
Evict+time measurement across a vectorized region.

A probe before the loop starts the clock and a probe after it stops it. With
secret = 1 the loop's first access goes to a line the attacker evicted, so
the measured interval grows by the miss penalty. The region end serializes
execution on the vector machine: the closing probe cannot start before the
region commits, so the interval carries no scheduling noise.
"""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from srv_sim.errors import ConfigError
from srv_sim.memhier.cache import CacheHierarchy
from srv_sim.memhier.timer import observe
from srv_sim.pipeline.runners import build_core

logger = logging.getLogger(__name__)


@dataclass
class TimingReport:
    dependent_path_ticks: float
    hit_path_ticks: float
    independent_path_ticks: float
    post_region_variance: float
    samples: List[int] = field(default_factory=list)
    serialized: bool = True

    def to_record(self):
        return {'dependent_path_ticks': self.dependent_path_ticks,
                'hit_path_ticks': self.hit_path_ticks,
                'independent_path_ticks': self.independent_path_ticks,
                'post_region_variance': self.post_region_variance,
                'serialized': self.serialized}


def _loop_end(result):
    ends = [e.tick + e.latency for e in result.trace
            if e.kind in ('load', 'store')]
    return max(ends, default=0)


def measure_interval(scenario, core_config, secret, evict, timer):
    """Ticks from the opening probe's start to the closing probe's end.

    The gadget runs once to warm the cache; the target line is then evicted
    (if evict) and the gadget runs again under measurement.

    Returns:
        Tuple of (observed ticks, whether the closing probe started after
        every loop access completed).
    """
    program = scenario.program.with_params(secret=secret)
    if not program.pre_probes or not program.epilogue:
        raise ConfigError('evict_time gadget needs a probe before and after '
                          'the loop')
    core = build_core(core_config, CacheHierarchy(scenario.cache))
    memory = scenario.memory()
    core.run(program, memory)
    if evict:
        core.cache.evict(memory.resolve_element('target', 0)[0])
    result = core.run(program, memory)
    opening, closing = result.probe_ticks[0], result.probe_ticks[-1]
    ticks = observe(closing.complete - opening.start, timer)
    return ticks, closing.start >= _loop_end(result)


def scenario_evict_time(scenario, n_seeds=None):
    """Compare the secret-dependent, cached and scalar paths.

    Arguments:
        scenario: Scenario of kind evict_time whose gadget declares param
            secret and arrays target and marker
        n_seeds: machine seeds sampled (default scenario.n_trials)

    Returns:
        TimingReport with tick means over seeds and the variance of the
        secret-dependent path.
    """
    if scenario.kind != 'evict_time':
        raise ConfigError('expected an evict_time scenario, got {}'.format(
            scenario.kind))
    n_seeds = scenario.n_trials if n_seeds is None else n_seeds
    timer = scenario.timer.reseeded(scenario.seed)
    dependent, hits, independent = [], [], []
    serialized = True
    for seed in range(n_seeds):
        config = scenario.core.replace(seed=scenario.seed + seed)
        ticks, ordered = measure_interval(scenario, config, 1, True, timer)
        dependent.append(ticks)
        serialized = serialized and ordered
        hits.append(measure_interval(scenario, config, 1, False, timer)[0])
        independent.append(measure_interval(
            scenario, config.replace(strategy='scalar'), 0, False, timer)[0])
    report = TimingReport(
        dependent_path_ticks=float(np.mean(dependent)),
        hit_path_ticks=float(np.mean(hits)),
        independent_path_ticks=float(np.mean(independent)),
        post_region_variance=float(np.var(dependent)),
        samples=[int(t) for t in dependent], serialized=serialized)
    logger.info('evict+time on %s: dependent %.1f, hit %.1f, scalar %.1f, '
                'variance %.2f', scenario.core.strategy,
                report.dependent_path_ticks, report.hit_path_ticks,
                report.independent_path_ticks, report.post_region_variance)
    return report
