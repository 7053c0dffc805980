"""
Cross-lane memory dependence tracking for SRV regions.

Time flows down the vector program and across lanes: lane i of any
instruction is older than lane j > i of every instruction. A load's
vertically overlapped bytes (VOB) are those also written by stores of other
vector instructions; its horizontally overlapped bytes (HOB) keep only the
bytes written by older lanes, which the load should have seen but could not.
A lane owning an entry with nonzero HOB is replayed.
"""

import enum
import logging
from collections import defaultdict
from dataclasses import dataclass

from srv_sim.lsu.entries import LOAD, STORE, ByteMask

logger = logging.getLogger(__name__)


class ReplayPolicy(enum.Enum):
    ERRONEOUS_ONLY = 'erroneous_only'
    ERRONEOUS_AND_LATER = 'erroneous_and_later'


@dataclass(frozen=True)
class ReplayRegister:
    """Per-lane taint bits."""
    bits: int = 0
    width: int = 16

    @classmethod
    def from_lanes(cls, lanes, width):
        bits = 0
        for lane in lanes:
            bits |= 1 << lane
        return cls(bits, width)

    def lanes(self):
        return [lane for lane in range(self.width) if self.bits >> lane & 1]

    def __contains__(self, lane):
        if not 0 <= lane < self.width:
            return False
        return bool(self.bits >> lane & 1)

    def __or__(self, other):
        return ReplayRegister(self.bits | other.bits, self.width)

    def __bool__(self):
        return self.bits != 0

    def __len__(self):
        return bin(self.bits).count('1')


def is_older(a, b):
    """True iff access a = (instr_seq, lane) precedes b in scalar order."""
    seq_a, lane_a = a
    seq_b, lane_b = b
    return (lane_a, seq_a) < (lane_b, seq_b)


def compute_vob(entry, region_entries):
    """Bytes of entry's window also touched by an opposite-kind access.

    A load checks against stores; a store checks against loads and stores.
    Entries of the same vector instruction never count.

    Arguments:
        entry: LsqEntry
        region_entries: other LsqEntry objects of the region

    Returns:
        ByteMask over entry's window.
    """
    kinds = (STORE,) if entry.kind == LOAD else (LOAD, STORE)
    bits = 0
    for other in region_entries:
        if other is entry or other.instr_seq == entry.instr_seq:
            continue
        if other.kind in kinds and other.window == entry.window:
            bits |= other.mask.bits
    return ByteMask(entry.window, bits & entry.mask.bits, entry.line)


def contributions(entry, region_entries):
    """Store entries overlapping a load, each with its overlap mask."""
    if entry.kind != LOAD:
        return []
    result = []
    for other in region_entries:
        if other.kind != STORE or other.window != entry.window:
            continue
        overlap = other.mask & entry.mask
        if overlap:
            result.append((other, overlap))
    return result


def compute_hob(entry, vob, overlapping_entries):
    """Part of vob contributed by strictly older lanes.

    Arguments:
        entry: LsqEntry
        vob: entry's vertically overlapped bytes
        overlapping_entries: list of (contributor, contribution mask)

    Returns:
        ByteMask, always a subset of vob.
    """
    bits = 0
    for contributor, mask in overlapping_entries:
        if contributor.lane < entry.lane:
            bits |= mask.bits
    return ByteMask(vob.window, bits & vob.bits, vob.width)


def mark_replay(entries, width, policy=ReplayPolicy.ERRONEOUS_ONLY):
    """Taint every lane owning an entry with nonzero hob.

    Under ERRONEOUS_AND_LATER every lane younger than the oldest tainted lane
    that appears among entries is tainted too.
    """
    taint = 0
    lanes = set()
    for entry in entries:
        lanes.add(entry.lane)
        if entry.hob:
            taint |= 1 << entry.lane
    register = ReplayRegister(taint, width)
    if policy is ReplayPolicy.ERRONEOUS_AND_LATER and register:
        register = extend_to_later(register, lanes)
    return register


def extend_to_later(register, lanes):
    oldest = register.lanes()[0]
    return register | ReplayRegister.from_lanes(
        [lane for lane in lanes if lane > oldest], register.width)


class DependenceTracker:
    """LSQ of one executing SRV region.

    Holds the latest execution of every lane. Entries of a replayed lane are
    replaced when the lane executes again.

    Arguments:
        width: lanes per vector
        policy: ReplayPolicy
    """

    def __init__(self, width, policy=ReplayPolicy.ERRONEOUS_ONLY):
        self.width = width
        self.policy = ReplayPolicy(policy)
        self.lane_entries = defaultdict(list)
        self.final_lanes = set()

    def begin_pass(self, lanes):
        for lane in lanes:
            self.lane_entries[lane] = []
            self.final_lanes.discard(lane)

    def record(self, entry):
        self.lane_entries[entry.lane].append(entry)

    def entries(self):
        return [e for lane in sorted(self.lane_entries)
                for e in self.lane_entries[lane]]

    def resolve(self, pass_lanes):
        """Compute masks for every entry and decide which lanes replay.

        A load only counts stores it could not have observed: those from a
        pass at least as recent as its own. When a lane that had already
        become final is tainted again, younger lanes that read bytes of its
        squashed write log (final ones, or ones that ran this pass) are tainted
        with it.

        Arguments:
            pass_lanes: lanes executed in the pass just finished

        Returns:
            ReplayRegister of lanes to re-execute.
        """
        entries = self.entries()
        buckets = defaultdict(list)
        for entry in entries:
            buckets[entry.window].append(entry)
        for entry in entries:
            others = buckets[entry.window]
            entry.vob = compute_vob(entry, others)
            if entry.kind == LOAD:
                unseen = [(c, m) for c, m in contributions(entry, others)
                          if c.pass_index >= entry.pass_index]
                entry.hob = compute_hob(entry, entry.vob, unseen)
            else:
                entry.hob = ByteMask.empty(entry.window, entry.line)
        register = mark_replay(entries, self.width)
        register = self._cascade(register, pass_lanes)
        if self.policy is ReplayPolicy.ERRONEOUS_AND_LATER and register:
            register = extend_to_later(register, pass_lanes)
        self.final_lanes.difference_update(register.lanes())
        self.final_lanes.update(
            lane for lane in pass_lanes if lane not in register)
        if register:
            logger.debug('replay register %s', register.lanes())
        return register

    def _cascade(self, register, pass_lanes):
        tainted = set(register.lanes())
        # Lanes that ran this pass may have read a log that is now squashed.
        readers = self.final_lanes | set(pass_lanes)
        changed = True
        while changed:
            changed = False
            squashed = [e for lane in tainted if lane in self.final_lanes
                        for e in self.lane_entries[lane] if e.kind == STORE]
            for lane in sorted(readers - tainted):
                for load in self.lane_entries[lane]:
                    if load.kind != LOAD:
                        continue
                    if any(s.lane < lane and s.pass_index < load.pass_index
                           and s.window == load.window and s.mask & load.mask
                           for s in squashed):
                        tainted.add(lane)
                        changed = True
                        break
        return ReplayRegister.from_lanes(tainted, self.width)
