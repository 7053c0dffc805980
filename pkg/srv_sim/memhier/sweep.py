"""
Cache reverse engineering: latency-versus-working-set sweep and LLC size
estimation from its knee.
"""

import logging

import numpy as np
import pandas as pd

from srv_sim.errors import CapacityError, NoKnee
from srv_sim.memhier.timer import observe_many

logger = logging.getLogger(__name__)

SWEEP_BASE = 1 << 32
LATENCY_TABLE_COLUMNS = ['size_bytes', 'mean_ticks', 'samples']
DEFAULT_SWEEP_SIZES = [(4 << 10) << i for i in range(16)]  # 4KB ... 128MB


def sweep_latency(state, sizes, reps=1, page=4096, timer=None,
                  memory_size=1 << 32, progress=None):
    """Measure mean reload latency for increasing working-set sizes.

    For every size the cache is emptied, the array is initialised (written)
    and loaded (read) sequentially, then one address per page is re-probed
    and its observed latency recorded.

    Arguments:
        state: CacheHierarchy to measure (reset between repetitions)
        sizes: ascending list of array sizes in bytes
        reps: repetitions per size
        page: probe stride in bytes
        timer: TimerModel used to observe latencies (exact when None)
        memory_size: largest array the simulated memory can hold
        progress: optional callable(size_idx, n_sizes, size)

    Returns:
        LatencyTable: pandas DataFrame with columns size_bytes, mean_ticks,
        samples, sorted by size_bytes.

    Raises:
        ValueError if sizes is empty or not ascending.
        CapacityError if a size exceeds memory_size.
    """
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError('no sizes to sweep')
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError('sizes must be strictly ascending')
    rows = []
    for size_idx, size in enumerate(sizes):
        if size > memory_size:
            raise CapacityError(
                'sweep size {0} exceeds simulated memory {1}'.format(
                    size, memory_size))
        if progress is not None:
            progress(size_idx, len(sizes), size)
        latencies = []
        for _ in range(reps):
            state.reset()
            state.stream(SWEEP_BASE, size)
            state.stream(SWEEP_BASE, size)
            for address in range(SWEEP_BASE, SWEEP_BASE + size, page):
                latencies.append(state.access(address)[1])
        if timer is not None:
            observed = observe_many(latencies, timer)
        else:
            observed = np.asarray(latencies, dtype=np.int64)
        rows.append((size, float(np.mean(observed)), len(observed)))
        logger.info('sweep size %d: mean %.1f ticks over %d probes',
                    size, rows[-1][1], rows[-1][2])
    return pd.DataFrame(rows, columns=LATENCY_TABLE_COLUMNS)


def estimate_llc_size(table):
    """Largest swept size whose mean latency lies below the plateau midpoint.

    Arguments:
        table: LatencyTable with at least three rows

    Returns:
        Estimated LLC capacity in bytes.

    Raises:
        ValueError if the table has fewer than three rows.
        NoKnee if the largest mean is less than 1.5x the smallest.
    """
    if len(table) < 3:
        raise ValueError('knee detection needs at least three sizes')
    table = table.sort_values('size_bytes')
    low = table.mean_ticks.min()
    high = table.mean_ticks.max()
    if high <= 0 or (low > 0 and high / low < 1.5):
        raise NoKnee('latency is flat ({0:.1f} to {1:.1f} ticks)'.format(
            low, high))
    midpoint = (low + high) / 2
    below = table[table.mean_ticks < midpoint]
    return int(below.size_bytes.max())
