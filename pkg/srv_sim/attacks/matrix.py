"""
Scenario by mitigation leak matrix.
"""

import logging
import time
from functools import partial

import pandas as pd
from scipy.stats import binom

from srv_sim.attacks.leaks import SCENARIO_RUNNERS
from srv_sim.pipeline.config import MITIGATIONS
from srv_sim.utils import get_eta, parallelise, print_with_overwrite

logger = logging.getLogger(__name__)

DEFAULT_MATRIX_SCENARIOS = ('srv_leak', 'kumar_fallback', 'spectre_stl',
                            'spectre_v1')
MIN_MATRIX_TRIALS = 64
CHANCE = 1 / 256
NO_LEAK_ACCURACY = 3 / 256


def verdict(accuracy):
    if accuracy >= 1.0:
        return 'leak'
    if accuracy <= NO_LEAK_ACCURACY:
        return 'no leak'
    return 'partial'


def run_cell(scenario, mitigation, min_trials=MIN_MATRIX_TRIALS):
    """LeakResult record of one scenario under one mitigation."""
    cell = scenario.with_core(mitigation=mitigation)
    n_trials = max(cell.n_trials, min_trials)
    result = SCENARIO_RUNNERS[cell.kind](cell, n_trials=n_trials)
    record = result.to_record()
    record['scenario'] = scenario.name
    # Probability of at least this many correct bytes by guessing.
    record['p_value'] = float(binom.sf(record['correct'] - 1,
                                       record['trials'], CHANCE))
    record['verdict'] = verdict(record['accuracy'])
    return record


def _run_cell(cell, min_trials):
    return run_cell(cell[0], cell[1], min_trials)


def run_matrix(scenarios, mitigations=MITIGATIONS, n_jobs=1,
               min_trials=MIN_MATRIX_TRIALS, wandb_run=None):
    """Accuracy of every (scenario, mitigation) cell.

    Arguments:
        scenarios: iterable of leak Scenarios
        mitigations: mitigation names
        n_jobs: joblib workers; cells are independent simulations
        min_trials: lower bound on trials per cell (the secret is cycled)
        wandb_run: optional wandb run each cell record is logged to

    Returns:
        DataFrame with one row per cell.
    """
    cells = [(s, m) for s in scenarios for m in mitigations]
    if n_jobs == 1:
        records = []
        start_time = time.time()
        for idx, (scenario, mitigation) in enumerate(cells):
            records.append(run_cell(scenario, mitigation, min_trials))
            print_with_overwrite(
                ('Cell', '{0}/{1}'.format(idx + 1, len(cells)), scenario.name,
                 mitigation),
                ('ETA:', get_eta(start_time, idx, len(cells))))
        print()
    else:
        records = parallelise(partial(_run_cell, min_trials=min_trials),
                              cells, n_jobs=n_jobs)
    if wandb_run is not None:
        for record in records:
            wandb_run.log(record)
    df = pd.DataFrame(records)
    logger.info('matrix of %d cells complete', len(df))
    return df


def matrix_table(df, value='verdict'):
    """Scenario rows by mitigation columns, in the order the cells ran."""
    table = df.pivot(index='scenario', columns='mitigation', values=value)
    scenarios = list(dict.fromkeys(df['scenario']))
    mitigations = list(dict.fromkeys(df['mitigation']))
    return table.loc[scenarios, mitigations]
