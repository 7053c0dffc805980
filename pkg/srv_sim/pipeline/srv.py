"""
Vector machine executing speculative vectorization regions.

Each chunk of width iterations executes as vector instructions over all
active lanes. Loads read memory as it stood before the chunk, the write
logs of older lanes that are already final and their own lane's earlier
stores. After every pass the dependence tracker marks lanes whose loads
missed an older lane's store; those lanes are rolled back and executed
again with the replay register as predicate until no taint remains, and
only then do the lanes' write logs reach memory. Cache state is never
rolled back.
"""

import logging

from srv_sim.errors import OutOfBounds, ReplayBudgetExceeded
from srv_sim.isa.interpreter import leaf_value
from srv_sim.isa.program import Select, apply_binop, path_holds
from srv_sim.lsu.entries import LOAD, STORE, LsqEntry
from srv_sim.lsu.tracker import DependenceTracker
from srv_sim.pipeline.config import Mitigation
from srv_sim.pipeline.core import Core
from srv_sim.vectorize.fences import AROUND_REGION, BETWEEN_STATEMENTS, \
    insert_fences, vfence_transform
from srv_sim.vectorize.flexvec import cross_lane_dependences, \
    flexvec_partition
from srv_sim.vectorize.lowering import vectorize_loop
from srv_sim.vectorize.vector_program import Opcode, Strategy, lanes_of

logger = logging.getLogger(__name__)


class LaneState:
    """Architectural state of one lane during a region pass."""

    def __init__(self, program, flat_statements, z):
        self.z = z
        self.log = {}
        self.fills = []
        self.poison = None
        self.values = []
        params = program.param_values
        for flat in flat_statements:
            values = {}
            for node in flat:
                if not node.children:
                    values[node.slot] = leaf_value(node.expr, z, params)
            self.values.append(values)


class Region:
    """Lanes of one predicate executing together, with their write logs.

    Arguments:
        lanes: lane ids of the region, ascending
        memory: MemoryImage as it stood before the region
        immediate: younger lanes of the same pass see older lanes' stores
    """

    def __init__(self, lanes, memory, immediate=False):
        self.lanes = list(lanes)
        self.memory = memory
        self.immediate = immediate
        self.states = {}
        self.pass_lanes = set()
        self.final = set()

    def begin_pass(self, lanes, program, flat_statements, base):
        self.pass_lanes = set(lanes)
        self.final.difference_update(lanes)
        for lane in lanes:
            self.states[lane] = LaneState(program, flat_statements, base + lane)

    def end_pass(self, tainted):
        self.final.update(lane for lane in self.pass_lanes
                          if lane not in tainted)

    def visible_lanes(self, lane):
        older = [l for l in self.lanes if l < lane and
                 (l in self.final or
                  (self.immediate and l in self.pass_lanes))]
        return [lane] + sorted(older, reverse=True)

    def read(self, lane, address, size):
        sources = [self.states[l].log for l in self.visible_lanes(lane)]
        value = 0
        for b in range(size):
            for log in sources:
                byte = log.get(address + b)
                if byte is not None:
                    break
            else:
                byte = self.memory.read_byte(address + b)
            value |= byte << (8 * b)
        return value

    def write(self, lane, address, size, value):
        log = self.states[lane].log
        for b in range(size):
            log[address + b] = (value >> (8 * b)) & 0xff


class SrvCore(Core):
    """Vector machine for the srv, vfenced_srv, flexvec and scalar_fallback
    strategies.
    """

    def _begin(self, program, memory):
        super()._begin(program, memory)
        self.strategy = self.config.strategy_kind
        self.vector_program = None
        if self.mitigation is not Mitigation.FENCE_RECOMPILED_SCALAR:
            self.vector_program = self.build_vector_program(program)

    def build_vector_program(self, program):
        """Lower program for this core's strategy and mitigation."""
        vp = vectorize_loop(program, self.config.width, self.strategy)
        if self.mitigation is Mitigation.MEM_FENCE:
            vp = insert_fences(vp, BETWEEN_STATEMENTS)
            vp = insert_fences(vp, AROUND_REGION)
        elif self.mitigation is Mitigation.VFENCE and \
                vp.strategy is Strategy.SRV:
            vp = vfence_transform(vp)
        return vp

    def _execute_loop(self):
        if self.vector_program is None:
            for z in range(self.program.trip_count):
                self._scalar_iteration(z, fenced=True)
            return
        for chunk in self.vector_program.chunks:
            if self.strategy is Strategy.SCALAR_FALLBACK and \
                    self.fallback_active:
                self._scalar_chunk(chunk)
                self.replay_counts.append(0)
                self.replayed_predicates.append([])
            elif self.strategy is Strategy.FLEXVEC:
                self._flexvec_chunk(chunk)
            else:
                self._srv_chunk(chunk)

    def _scalar_chunk(self, chunk):
        for lane in chunk.active_lanes:
            self._scalar_iteration(chunk.base + lane)

    def _srv_chunk(self, chunk):
        replays, replayed = 0, []
        for predicate in chunk.schedule:
            lanes = lanes_of(predicate, chunk.width)
            outcome = self._run_region(chunk, lanes)
            if outcome is None:
                # Violation under scalar fallback: the chunk runs scalar.
                self._scalar_chunk(chunk)
                break
            replays += len(outcome)
            replayed.extend(outcome)
        self.replay_counts.append(replays)
        self.replayed_predicates.append(replayed)

    def _flexvec_chunk(self, chunk):
        # One check per chunk, against memory as it stood before the chunk.
        deps = cross_lane_dependences(
            self.program, self.flat, chunk.base, chunk.active_lanes,
            self.memory)
        self._finish(self._start(), self.config.flexvec_check_overhead)
        replays, replayed = 0, []
        for group in flexvec_partition(deps, chunk.width):
            lanes = [lane for lane in group if lane in chunk.active_lanes]
            if not lanes:
                continue
            self._emit('flexvec_group', lane=lanes[0],
                       detail={'base': chunk.base, 'lanes': lanes})
            outcome = self._run_region(chunk, lanes)
            replays += len(outcome)
            replayed.extend(outcome)
        self.replay_counts.append(replays)
        self.replayed_predicates.append(replayed)

    def _run_region(self, chunk, lanes):
        """Execute one region to commit.

        Returns:
            List of replayed lane lists, one per replay pass, or None when a
            scalar fallback core abandoned the region.

        Raises:
            ReplayBudgetExceeded if taint persists after replay_limit
            replays.
            OutOfBounds if a committing lane accessed outside its array.
        """
        region = Region(lanes, self.memory,
                        self.config.store_visibility == 'immediate')
        tracker = DependenceTracker(chunk.width, self.config.policy)
        pending, pass_index, replayed = list(lanes), 0, []
        first_event = len(self.events)
        while True:
            tracker.begin_pass(pending)
            region.begin_pass(pending, self.program, self.flat, chunk.base)
            self._run_pass(chunk, region, tracker, pending, pass_index)
            register = tracker.resolve(pending)
            region.end_pass(register)
            # Every earlier execution of a tainted lane is squashed.
            region_events = self.events[first_event:]
            self._report_pass(tracker, register, pass_index, chunk.base)
            if not register:
                break
            fallback = self.strategy is Strategy.SCALAR_FALLBACK
            for event in region_events:
                if fallback or event.lane in register:
                    event.transient = True
            if fallback:
                self.fallback_active = True
                self._emit('fallback', lane=register.lanes()[0],
                           detail={'base': chunk.base})
                logger.info('dependence violation in chunk at iteration %d: '
                            'falling back to scalar code', chunk.base)
                return None
            replayed.append(register.lanes())
            if len(replayed) > self.config.effective_replay_limit:
                raise ReplayBudgetExceeded(
                    'lanes {0} still tainted after {1} replays'.format(
                        register.lanes(), self.config.effective_replay_limit))
            logger.debug('chunk at iteration %d replays lanes %s',
                         chunk.base, register.lanes())
            pending, pass_index = register.lanes(), pass_index + 1
        self._commit(region, chunk)
        return replayed

    def _run_pass(self, chunk, region, tracker, lanes, pass_index):
        for instr in chunk.instrs:
            if instr.opcode.is_marker:
                self._marker(instr, lanes, pass_index)
                continue
            if instr.opcode.is_load or instr.opcode.is_store:
                for lane in lanes:
                    self._lane_access(instr, region, tracker, lane,
                                      pass_index)
                continue
            node = instr.node
            for lane in lanes:
                state = region.states[lane]
                values = state.values[instr.stmt_id]
                if state.poison is not None or \
                        not path_holds(node.path, values):
                    continue
                if isinstance(node.expr, Select):
                    cond, if_true, if_false = node.children
                    values[node.slot] = values[if_true] if values[cond] \
                        else values[if_false]
                else:
                    values[node.slot] = apply_binop(
                        node.expr.op, values[node.children[0]],
                        values[node.children[1]])
            self._finish(self._start(), self.config.alu_latency)

    def _lane_access(self, instr, region, tracker, lane, pass_index):
        state = region.states[lane]
        node = instr.node
        values = state.values[instr.stmt_id]
        if state.poison is not None or not path_holds(node.path, values):
            return
        if instr.opcode.is_store:
            array = node.expr.dst_array
        else:
            array = node.expr.array
        index = values[node.children[0]]
        try:
            address, size = self.memory.resolve_element(array, index)
        except OutOfBounds as e:
            state.poison = e
            return
        detail = {'pass': pass_index}
        if instr.opcode.is_store:
            value = values[node.children[1]] & ((1 << (8 * size)) - 1)
            region.write(lane, address, size, value)
            kind, fill = STORE, self.mitigation is not \
                Mitigation.VISIBILITY_DELAY
        else:
            value = region.read(lane, address, size)
            kind, fill = LOAD, self.speculation_fills_cache
        values[node.slot] = value
        tracker.record(LsqEntry(instr.seq, lane, kind, address, size, value,
                                pass_index, instr.stmt_id,
                                self.cache.config.line))
        self._memory_access(kind, address, size, value, instr.seq, lane,
                            fill=fill, detail=detail)
        if self.mitigation is Mitigation.VISIBILITY_DELAY:
            state.fills.append(address)

    def _marker(self, instr, lanes, pass_index):
        if instr.opcode is Opcode.FENCE:
            self._fence(instr.seq)
            return
        name = {Opcode.SRV_START: 'srv_start', Opcode.SRV_END: 'srv_end',
                Opcode.VFENCE: 'vfence'}[instr.opcode]
        self._emit(name, instr_seq=instr.seq, lane=lanes[0],
                   detail={'pass': pass_index, 'lanes': list(lanes)})
        if instr.opcode is Opcode.VFENCE:
            self.tick = max(self.tick, self.horizon) + \
                self.config.fence_latency
            self.horizon = self.tick

    def _report_pass(self, tracker, register, pass_index, base):
        for entry in tracker.entries():
            if entry.pass_index != pass_index and not entry.hob:
                continue
            self._emit('lsq', entry=entry, instr_seq=entry.instr_seq,
                       lane=entry.lane, address=entry.addr, size=entry.size,
                       detail={'access': entry.kind, 'pass': entry.pass_index,
                               'vob': entry.vob.hex(),
                               'hob': entry.hob.hex()})
        self._emit('replay', detail={'base': base, 'pass': pass_index,
                                     'taint': hex(register.bits),
                                     'lanes': register.lanes()})

    def _commit(self, region, chunk):
        for lane in region.lanes:
            state = region.states[lane]
            if state.poison is not None:
                raise state.poison
        for lane in region.lanes:
            state = region.states[lane]
            for address in sorted(state.log):
                self.memory.write_byte(address, state.log[address])
            if self.mitigation is Mitigation.VISIBILITY_DELAY:
                for address in state.fills:
                    self.cache.fill(address)
        self._emit('commit', lane=region.lanes[0],
                   detail={'base': chunk.base, 'lanes': region.lanes})
