"""
Scalar out-of-order machine with memory dependence and branch speculation.

Loads may issue ahead of older stores of the same iteration once the
dependence predictor is confident the two never alias, and guarded
statements execute ahead of their bounds check when the branch predictor
says the guard holds. Misspeculated work is squashed and re-executed; the
cache lines it touched stay filled.
"""

import logging

from srv_sim.isa.program import ArrayRead
from srv_sim.pipeline.config import Mitigation
from srv_sim.pipeline.core import Core, OverlayMemory

logger = logging.getLogger(__name__)


class OooStlCore(Core):
    """Out-of-order scalar core with dataflow timing.

    Every operation starts when its operands are ready and the in-order
    front end has dispatched it; dispatch advances by one tick plus a seeded
    scheduling skew per operation.
    """

    def _begin(self, program, memory):
        super()._begin(program, memory)
        self.dispatch = 0

    @property
    def bypass_allowed(self):
        return self.mitigation not in (Mitigation.MEM_FENCE,
                                       Mitigation.IN_ORDER,
                                       Mitigation.FENCE_RECOMPILED_SCALAR)

    @property
    def branch_speculation_allowed(self):
        return self.mitigation not in (Mitigation.IN_ORDER,
                                       Mitigation.FENCE_RECOMPILED_SCALAR)

    def _event_clock(self):
        return self.dispatch

    def _start(self, ready=0):
        start = max(self.dispatch, ready)
        if self.mitigation is Mitigation.IN_ORDER:
            start = max(start, self.horizon)
        noise = self.config.ooo_issue_noise
        skew = int(self.rng.integers(0, noise + 1)) if noise else 0
        self.dispatch += 1 + skew
        return start

    def _finish(self, start, latency):
        complete = start + latency
        self.horizon = max(self.horizon, complete)
        self.tick = max(self.tick, self.dispatch)
        return complete

    def _fence(self, instr_seq=-1):
        self._emit('fence', instr_seq=instr_seq)
        self.dispatch = max(self.dispatch, self.horizon) + \
            self.config.fence_latency
        self.horizon = self.dispatch

    def _execute_loop(self):
        fenced = self.mitigation in (Mitigation.MEM_FENCE,
                                     Mitigation.FENCE_RECOMPILED_SCALAR)
        for z in range(self.program.trip_count):
            self._iteration(z)
            if fenced:
                self._fence()

    def _iteration(self, z):
        store_log = {}
        for stmt_id, flat in enumerate(self.flat):
            candidates = [i for i in store_log if store_log[i]]
            bypassed = []
            if self.bypass_allowed and self._has_loads(flat):
                bypassed = [i for i in candidates
                            if self.memdep.predicts_no_alias((i, stmt_id))]
            if bypassed:
                self._speculative_statement(stmt_id, flat, z, store_log,
                                            bypassed, candidates)
            else:
                outcome = self._logged_statement(stmt_id, flat, z, store_log)
                self._train(stmt_id, candidates, store_log, outcome)

    @staticmethod
    def _has_loads(flat):
        return any(isinstance(n.expr, ArrayRead)
                   for n in flat)

    def _guard_hook(self, stmt_id, z):
        def on_guard(taken, _):
            self._resolve_branch(stmt_id, z, taken)
        return on_guard

    def _logged_statement(self, stmt_id, flat, z, store_log,
                          resolve_branches=True):
        log = store_log.setdefault(stmt_id, [])

        def write(address, size, value):
            log.append((address, size, self.memory.read(address, size)))
            self.memory.write(address, size, value)

        return self._exec_statement(stmt_id, flat, z, self.memory.read, write,
                                    on_guard=self._guard_hook(stmt_id, z)
                                    if resolve_branches else None)

    def _train(self, stmt_id, candidates, store_log, outcome):
        for i in candidates:
            written = self._written_bytes(store_log[i])
            self.memdep.train((i, stmt_id),
                              aliased=bool(written & outcome.load_bytes))

    @staticmethod
    def _written_bytes(log):
        written = set()
        for address, size, _ in log:
            written.update(range(address, address + size))
        return written

    def _speculative_statement(self, stmt_id, flat, z, store_log, bypassed,
                               candidates):
        # The load issues before the bypassed stores: it sees their old bytes.
        stale = {}
        for i in sorted(bypassed, reverse=True):
            for address, size, old in reversed(store_log[i]):
                for b in range(size):
                    stale[address + b] = (old >> (8 * b)) & 0xff
        pending = {}
        view = OverlayMemory(self.memory, pending, stale)
        first_event = len(self.events)
        outcome = self._exec_statement(
            stmt_id, flat, z, view.read, view.writer(pending), transient=True,
            fill=self.speculation_fills_cache,
            on_guard=self._guard_hook(stmt_id, z))
        aliased = [i for i in bypassed
                   if self._written_bytes(store_log[i]) & outcome.load_bytes]
        for i in bypassed:
            self.memdep.train((i, stmt_id), aliased=i in aliased)
        if aliased:
            self.squash_count += 1
            self._emit('squash', instr_seq=stmt_id, lane=z,
                       detail={'cause': 'memory_order',
                               'stores': sorted(aliased)})
            logger.debug('iteration %d statement %d squashed after '
                         'store-to-load bypass', z, stmt_id)
            outcome = self._logged_statement(stmt_id, flat, z, store_log,
                                             resolve_branches=False)
            self._train(stmt_id, [i for i in candidates if i not in bypassed],
                        store_log, outcome)
            return
        if outcome.suppressed:
            # The out-of-bounds access was architectural; raise it for real.
            self._logged_statement(stmt_id, flat, z, store_log)
            return
        log = store_log.setdefault(stmt_id, [])
        for address in sorted(pending):
            log.append((address, 1, self.memory.read_byte(address)))
            self.memory.write_byte(address, pending[address])
        for event in self.events[first_event:]:
            event.transient = False
        if not self.speculation_fills_cache:
            # Loads turned out correct: make their fills visible now.
            for event in self.events[first_event:]:
                if event.address is not None:
                    self.cache.fill(event.address)
        self._train(stmt_id, [i for i in candidates if i not in bypassed],
                    store_log, outcome)

    def _resolve_branch(self, site, z, taken):
        predicted = super()._resolve_branch(site, z, taken)
        if bool(predicted) == bool(taken):
            return predicted
        if predicted and self.branch_speculation_allowed:
            self._transient_body(site, z)
        self.squash_count += 1
        self._emit('squash', instr_seq=site, lane=z,
                   detail={'cause': 'branch'})
        return predicted

    def _transient_body(self, stmt_id, z):
        pending = {}
        view = OverlayMemory(self.memory, pending)
        self._exec_statement(
            stmt_id, self.unguarded(stmt_id), z, view.read,
            view.writer(pending), transient=True,
            fill=self.speculation_fills_cache)
