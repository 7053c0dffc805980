"""
Base class of the simulated machines and the result of a run.

A core owns the microarchitectural state that persists across runs (cache,
predictors, fallback mode) and, during a run, the memory image, event log
and clock. Subclasses decide how the loop executes; statement execution in
program order, probes, event emission and leakage-descriptor hooks live
here.
"""

import logging
from abc import ABC, abstractmethod
from collections import namedtuple
from dataclasses import dataclass, field, replace
from typing import List

from srv_sim.errors import OutOfBounds
from srv_sim.isa.interpreter import leaf_value
from srv_sim.isa.program import ArrayRead, BinOp, Select, apply_binop, \
    flatten_statement, path_holds
from srv_sim.memhier.cache import CacheHierarchy, CacheView
from srv_sim.pipeline.config import CoreConfig, Mitigation
from srv_sim.pipeline.predictors import BranchPredictor, MemDepPredictor, \
    PredictorView
from srv_sim.pipeline.trace import Event
from srv_sim.utils import rng_from_seed

logger = logging.getLogger(__name__)

ProbeTiming = namedtuple('ProbeTiming', 'array index start complete level')
MicroarchState = namedtuple('MicroarchState', 'cache branch entry')


@dataclass
class ExecResult:
    final_memory: object
    trace: List[Event]
    cycles: int
    replay_counts: List[int] = field(default_factory=list)
    squash_count: int = 0
    replayed_predicates: List[list] = field(default_factory=list)
    probe_ticks: List[ProbeTiming] = field(default_factory=list)
    fallback: bool = False


class StatementOutcome:
    """Bytes a statement execution read from and wrote to memory."""

    def __init__(self):
        self.load_bytes = set()
        self.store_bytes = set()
        self.suppressed = False


class Core(ABC):
    """Base (abstract) class for all simulated machines.

    Arguments:
        config: CoreConfig
        cache: CacheHierarchy to share, or CacheConfig to build one from
        mld_engine: optional MldEngine offered every event
    """

    def __init__(self, config=None, cache=None, mld_engine=None):
        self.config = CoreConfig() if config is None else config
        self.cache = cache if isinstance(cache, CacheHierarchy) \
            else CacheHierarchy(cache)
        self.memdep = MemDepPredictor(self.config.mdp_threshold)
        self.branch_predictor = BranchPredictor(
            self.config.branch_counter_bits, self.config.branch_counter_init)
        self.mld_engine = mld_engine
        self.fallback_active = False
        self.rng = rng_from_seed(self.config.seed)
        self.mitigation = self.config.mitigation_kind
        self._flat_cache = {}

    def run(self, program, memory):
        """Execute program on a copy of memory.

        Arguments:
            program: GadgetProgram
            memory: MemoryImage laid out for program (left untouched)

        Returns:
            ExecResult
        """
        self._begin(program, memory)
        for probe in program.pre_probes:
            self._probe(probe)
        self._execute_loop()
        self._drain()
        for probe in program.epilogue:
            self._probe(probe)
        return self._result()

    @abstractmethod
    def _execute_loop(self):
        pass

    def _begin(self, program, memory):
        self.program = program
        self.memory = memory.copy()
        self.params = program.param_values
        self.events = []
        self.tick = 0
        self.horizon = 0
        self.squash_count = 0
        self.replay_counts = []
        self.replayed_predicates = []
        self.probe_ticks = []
        self.flat = self._flatten(program)

    def _flatten(self, program):
        key = program.statements
        if key not in self._flat_cache:
            self._flat_cache[key] = tuple(
                tuple(flatten_statement(stmt)) for stmt in program.statements)
        return self._flat_cache[key]

    def _result(self):
        return ExecResult(
            final_memory=self.memory, trace=self.events,
            cycles=max(self.tick, self.horizon),
            replay_counts=self.replay_counts, squash_count=self.squash_count,
            replayed_predicates=self.replayed_predicates,
            probe_ticks=self.probe_ticks, fallback=self.fallback_active)

    # Timing: additive by default. Subclasses may overlap operations.

    def _event_clock(self):
        return self.tick

    def _start(self, ready=0):
        return self.tick

    def _finish(self, start, latency):
        self.tick = start + latency
        self.horizon = max(self.horizon, self.tick)
        return self.tick

    def _drain(self):
        """Wait for every outstanding operation before the epilogue."""

    def _fence(self, instr_seq=-1):
        self._emit('fence', instr_seq=instr_seq)
        self.tick = max(self.tick, self.horizon) + self.config.fence_latency
        self.horizon = self.tick

    # Events and hooks.

    def _offer(self, event, entry=None):
        if self.mld_engine is None:
            return
        self.mld_engine.offer(event, MicroarchState(
            CacheView(self.cache), PredictorView(self.branch_predictor), entry))

    def _emit(self, kind, entry=None, **fields):
        event = Event(self._event_clock(), kind, **fields)
        self._offer(event, entry)
        self.events.append(event)
        return event

    def _memory_access(self, kind, address, size, value=None, instr_seq=-1,
                       lane=-1, ready=0, fill=True, transient=False,
                       detail=None):
        """Emit a memory event and look it up in the cache.

        Returns:
            Tuple of (start, complete, level).
        """
        event = Event(self._event_clock(), kind, instr_seq, lane, address,
                      size, value, transient=transient, detail=detail or {})
        self._offer(event)
        start = self._start(ready)
        level, latency = self.cache.access(
            address, 'store' if kind == 'store' else 'load', fill=fill)
        event.level, event.latency = level, latency
        self.events.append(event)
        return start, self._finish(start, latency), level

    def _probe(self, probe):
        address, size = self.memory.resolve_element(probe.array, probe.index)
        start, complete, level = self._memory_access(
            'probe', address, size, self.memory.read(address, size),
            detail={'array': probe.array, 'index': probe.index})
        self.probe_ticks.append(
            ProbeTiming(probe.array, probe.index, start, complete, level))

    # Scalar statement execution, shared by every machine.

    def _resolve(self, array, index, transient):
        try:
            return self.memory.resolve_element(array, index)
        except OutOfBounds:
            if transient:
                return None
            raise

    def _exec_statement(self, stmt_id, flat, z, read, write, transient=False,
                        fill=True, on_guard=None):
        """Run one statement of iteration z in program order.

        Arguments:
            stmt_id: statement index (instr_seq of its events)
            flat: flattened statement
            z: iteration index
            read: callable (address, size) -> value
            write: callable (address, size, value) -> None
            transient: the work will be squashed; out-of-bounds accesses are
                suppressed instead of raised
            fill: whether accesses update the cache
            on_guard: optional callable (guard value, ready tick) invoked once
                the guard is resolved

        Returns:
            StatementOutcome
        """
        outcome = StatementOutcome()
        values, ready = {}, {}
        guard_slot = None
        if flat[-1].path:
            guard_slot = flat[-1].path[0][0]
        for node in flat:
            if not path_holds(node.path, values):
                continue
            dep = max((ready.get(c, 0) for c in node.children), default=0)
            expr = node.expr
            if node.role == 'store':
                index, value = values[node.children[0]], \
                    values[node.children[1]]
                located = self._resolve(expr.dst_array, index, transient)
                if located is None:
                    outcome.suppressed = True
                    return outcome
                address, size = located
                value &= (1 << (8 * size)) - 1
                write(address, size, value)
                outcome.store_bytes.update(range(address, address + size))
                _, ready[node.slot], _ = self._memory_access(
                    'store', address, size, value, stmt_id, z, dep, fill,
                    transient)
                values[node.slot] = value
            elif isinstance(expr, ArrayRead):
                located = self._resolve(
                    expr.array, values[node.children[0]], transient)
                if located is None:
                    outcome.suppressed = True
                    return outcome
                address, size = located
                value = read(address, size)
                outcome.load_bytes.update(range(address, address + size))
                _, ready[node.slot], _ = self._memory_access(
                    'load', address, size, value, stmt_id, z, dep, fill,
                    transient)
                values[node.slot] = value
            elif isinstance(expr, (BinOp, Select)):
                if isinstance(expr, BinOp):
                    values[node.slot] = apply_binop(
                        expr.op, values[node.children[0]],
                        values[node.children[1]])
                else:
                    cond, if_true, if_false = node.children
                    values[node.slot] = values[if_true] if values[cond] \
                        else values[if_false]
                ready[node.slot] = self._finish(
                    self._start(dep), self.config.alu_latency)
            else:
                values[node.slot] = leaf_value(expr, z, self.params)
                ready[node.slot] = 0
            if node.slot == guard_slot and on_guard is not None:
                on_guard(values[node.slot], ready[node.slot])
        return outcome

    def _scalar_iteration(self, z, fenced=False):
        """Architectural, non-speculative execution of iteration z."""
        for stmt_id, flat in enumerate(self.flat):
            self._exec_statement(
                stmt_id, flat, z, self.memory.read, self.memory.write,
                on_guard=lambda taken, _, s=stmt_id, it=z:
                self._resolve_branch(s, it, taken))
            if fenced:
                self._fence(stmt_id)

    def _resolve_branch(self, site, z, taken):
        """Record a resolved branch and train the predictor."""
        predicted = self.branch_predictor.predict(site)
        self._emit('branch', instr_seq=site, lane=z, detail={
            'predicted': bool(predicted), 'taken': bool(taken)})
        self.branch_predictor.update(site, bool(taken))
        return predicted

    @property
    def speculation_fills_cache(self):
        return self.mitigation not in (Mitigation.VISIBILITY_DELAY,
                                       Mitigation.CFENCE_STYLE)

    def unguarded(self, stmt_id):
        """Flattened statement stmt_id with its guard removed."""
        stmt = self.program.statements[stmt_id]
        key = ('unguarded', stmt)
        if key not in self._flat_cache:
            self._flat_cache[key] = tuple(
                flatten_statement(replace(stmt, guard=None)))
        return self._flat_cache[key]


class ScalarCore(Core):
    """In-order scalar machine without speculation: the reference."""

    def _execute_loop(self):
        for z in range(self.program.trip_count):
            self._scalar_iteration(z)


class OverlayMemory:
    """Byte overlays layered over a memory image, searched first to last."""

    def __init__(self, memory, *overlays):
        self.memory = memory
        self.overlays = overlays

    def read(self, address, size):
        value = 0
        for b in range(size):
            for overlay in self.overlays:
                byte = overlay.get(address + b)
                if byte is not None:
                    break
            else:
                byte = self.memory.read_byte(address + b)
            value |= byte << (8 * b)
        return value

    def writer(self, overlay):
        def write(address, size, value):
            for b in range(size):
                overlay[address + b] = (value >> (8 * b)) & 0xff
        return write
