"""
Entry points running a program on one of the machine models.
"""

import logging

from srv_sim.errors import UnsupportedPattern
from srv_sim.pipeline.config import CoreConfig
from srv_sim.pipeline.core import ScalarCore
from srv_sim.pipeline.ooo_stl import OooStlCore
from srv_sim.pipeline.srv import SrvCore
from srv_sim.vectorize.vector_program import Strategy

logger = logging.getLogger(__name__)


def build_core(config=None, cache=None, mld_engine=None):
    """Machine model for config.strategy.

    Arguments:
        config: CoreConfig (defaults to CoreConfig())
        cache: CacheHierarchy to share, CacheConfig, or None for defaults
        mld_engine: optional MldEngine

    Returns:
        ScalarCore, OooStlCore or SrvCore; the core keeps its cache and
        predictors across calls to run.
    """
    config = CoreConfig() if config is None else config
    strategy = config.strategy_kind
    if strategy is Strategy.SCALAR:
        cls = ScalarCore
    elif strategy is Strategy.SCALAR_OOO:
        cls = OooStlCore
    else:
        cls = SrvCore
    return cls(config, cache, mld_engine)


def _log_summary(name, result):
    logger.info('%s: %d cycles, %d replays, %d squashes', name,
                result.cycles, sum(result.replay_counts), result.squash_count)
    return result


def run_scalar(program, memory, config=None, cache=None, mld_engine=None):
    """Run program without speculation; config.strategy is ignored."""
    config = CoreConfig() if config is None else config
    core = ScalarCore(config, cache, mld_engine)
    return _log_summary('scalar', core.run(program, memory))


def run_ooo_stl(program, memory, config=None, cache=None, mld_engine=None):
    """Run program on the out-of-order scalar machine."""
    config = CoreConfig(strategy='scalar_ooo') if config is None else config
    core = OooStlCore(config, cache, mld_engine)
    return _log_summary('scalar_ooo', core.run(program, memory))


def run_srv(program, memory, config=None, cache=None, mld_engine=None):
    """Run program on the vector machine.

    Raises:
        UnsupportedPattern if config names a scalar strategy.
    """
    config = CoreConfig() if config is None else config
    if not config.strategy_kind.is_vector:
        raise UnsupportedPattern(
            'run_srv needs a vector strategy, got {}'.format(config.strategy))
    core = SrvCore(config, cache, mld_engine)
    return _log_summary(config.strategy, core.run(program, memory))
