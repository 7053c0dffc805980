"""
Replay amplification: a chained dependence makes every replay pass re-run
the transmitting load, giving a noisy receiver one more observation per
pass.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.stats import binom

from srv_sim.attacks.leaks import store_secret
from srv_sim.errors import ConfigError
from srv_sim.memhier.cache import CacheHierarchy
from srv_sim.pipeline.runners import build_core
from srv_sim.utils import rng_from_seed

logger = logging.getLogger(__name__)


@dataclass
class AmplificationReport:
    replays: int
    transmissions: int
    curve: pd.DataFrame


def chain_indices(n):
    """x[i] = i + 1, last lane pointing at itself: one violation per pass."""
    return [i + 1 for i in range(n - 1)] + [n - 1]


def detection_curve(p, passes, trials=10000, seed=0, confidence=0.95):
    """Probability of at least one detection within r observations.

    Arguments:
        p: probability that a single observation is lost in channel noise
        passes: largest number of observations r
        trials: Monte Carlo trials per r
        seed: generator seed
        confidence: level of the binomial interval around the estimate

    Returns:
        DataFrame with columns passes, analytic (1 - p**r), empirical,
        ci_low and ci_high.
    """
    if not 0 <= p <= 1:
        raise ValueError('p must lie in [0, 1]')
    if passes < 1:
        raise ValueError('passes must be positive')
    rng = rng_from_seed(seed)
    detected = rng.random((trials, passes)) >= p
    empirical = np.logical_or.accumulate(detected, axis=1).mean(axis=0)
    r = np.arange(1, passes + 1)
    low, high = binom.interval(confidence, trials, empirical)
    return pd.DataFrame({'passes': r, 'analytic': 1 - p ** r,
                         'empirical': empirical, 'ci_low': low / trials,
                         'ci_high': high / trials})


def scenario_replay_amplification(scenario, channel_noise_p=0.5,
                                  trials=10000, expected_replays=None):
    """Count replays of the chained gadget and the detection curve they buy.

    Arguments:
        scenario: Scenario of kind replay_amplification; its gadget has an
            index array x, and lane trip_count - 1 loads the encode array
        channel_noise_p: probability an observation is lost
        trials: Monte Carlo trials for the curve
        expected_replays: replay count the index vector must produce
            (default width - 1)

    Raises:
        ConfigError if the gadget does not replay expected_replays times.
    """
    if scenario.kind != 'replay_amplification':
        raise ConfigError('expected a replay_amplification scenario, got '
                          '{}'.format(scenario.kind))
    program = scenario.program
    width = scenario.core.width
    expected = width - 1 if expected_replays is None else expected_replays
    memory = scenario.memory()
    store_secret(memory, scenario.secret)
    n = min(width, program.trip_count)
    for i, target in enumerate(chain_indices(n)):
        memory.write_element('x', i, target)
    core = build_core(scenario.core, CacheHierarchy(scenario.cache))
    result = core.run(program, memory)
    replays = result.replay_counts[0] if result.replay_counts else 0
    if replays != expected:
        raise ConfigError('index vector yields {0} replays, expected '
                          '{1}'.format(replays, expected))
    start, end = memory.address_map.range_of(scenario.channel.array)
    transmissions = sum(
        1 for e in result.trace
        if e.kind == 'load' and e.lane == n - 1 and start <= e.address < end)
    curve = detection_curve(channel_noise_p, transmissions, trials,
                            scenario.seed)
    logger.info('%d replays, %d transmissions; detection %.4f', replays,
                transmissions, curve['empirical'].iloc[-1])
    return AmplificationReport(replays, transmissions, curve)
