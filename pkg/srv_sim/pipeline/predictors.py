"""
Memory dependence and branch predictors.
"""

from collections import defaultdict


class MemDepPredictor:
    """Store-set style predictor over (store statement, load statement) pairs.

    Every execution in which the pair did not alias raises its confidence;
    an alias resets it. Once confidence reaches threshold the load is allowed
    to issue ahead of the store.
    """

    def __init__(self, threshold=3):
        self.threshold = threshold
        self.counters = defaultdict(int)

    def predicts_no_alias(self, pair):
        return self.counters[pair] >= self.threshold

    def train(self, pair, aliased):
        if aliased:
            self.counters[pair] = 0
        else:
            self.counters[pair] += 1

    def confidence(self, pair):
        return self.counters[pair]


class BranchPredictor:
    """Saturating counters per branch site.

    The branch guarding a statement is taken when the statement executes;
    counters at or above half their range predict taken. The cold state is
    weakly not-taken by default.
    """

    def __init__(self, bits=2, init=1):
        self.max_value = (1 << bits) - 1
        self.threshold = 1 << (bits - 1)
        self.init = init
        self.counters = {}

    def counter(self, site):
        return self.counters.get(site, self.init)

    def predict(self, site):
        return self.counter(site) >= self.threshold

    def update(self, site, taken):
        value = self.counter(site)
        if taken:
            value = min(self.max_value, value + 1)
        else:
            value = max(0, value - 1)
        self.counters[site] = value


class PredictorView:
    """Read-only window on a branch predictor, for leakage descriptors."""

    def __init__(self, predictor):
        self._predictor = predictor

    def counter(self, site):
        return self._predictor.counter(site)

    def predict(self, site):
        return self._predictor.predict(site)
