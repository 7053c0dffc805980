"""
Vector instructions, chunks and programs produced by the loop vectorizer.
"""

import enum
from dataclasses import dataclass, replace
from typing import Optional, Tuple

VECTOR_WIDTHS = (1, 2, 4, 8, 16, 32)


class Strategy(enum.Enum):
    """How a machine handles cross-iteration memory dependences."""
    SCALAR = 'scalar'
    SCALAR_OOO = 'scalar_ooo'
    SRV = 'srv'
    FLEXVEC = 'flexvec'
    SCALAR_FALLBACK = 'scalar_fallback'
    VFENCED_SRV = 'vfenced_srv'

    @property
    def is_vector(self):
        return self not in (Strategy.SCALAR, Strategy.SCALAR_OOO)

    @property
    def uses_regions(self):
        return self in (Strategy.SRV, Strategy.VFENCED_SRV,
                        Strategy.SCALAR_FALLBACK)


class Opcode(enum.Enum):
    V_LOAD_CONTIG = 'VLoadContig'
    V_GATHER = 'VGather'
    V_ALU = 'VAlu'
    V_STORE_CONTIG = 'VStoreContig'
    V_SCATTER = 'VScatter'
    SRV_START = 'SrvStart'
    SRV_END = 'SrvEnd'
    FENCE = 'Fence'
    VFENCE = 'Vfence'

    @property
    def is_load(self):
        return self in (Opcode.V_LOAD_CONTIG, Opcode.V_GATHER)

    @property
    def is_store(self):
        return self in (Opcode.V_STORE_CONTIG, Opcode.V_SCATTER)

    @property
    def is_marker(self):
        return self in (Opcode.SRV_START, Opcode.SRV_END, Opcode.FENCE,
                        Opcode.VFENCE)


@dataclass(frozen=True)
class VectorInstr:
    """One vector instruction.

    node is the flattened statement node the instruction computes (None for
    markers); operands are the per-lane index expression of memory
    instructions.
    """
    seq: int
    opcode: Opcode
    stmt_id: Optional[int] = None
    node: Optional[tuple] = None
    operands: Optional[object] = None


@dataclass(frozen=True)
class Chunk:
    """width consecutive iterations starting at base.

    width is always the vector width, also for the tail chunk; predicate has
    one bit per active lane and decides which lanes run. schedule lists the
    predicates the chunk executes, one region (or group) each, in order.
    """
    base: int
    width: int
    predicate: int
    instrs: Tuple[VectorInstr, ...]
    schedule: Tuple[int, ...]

    @property
    def active_lanes(self):
        return [lane for lane in range(self.width) if self.predicate >> lane & 1]

    @property
    def n_active(self):
        return bin(self.predicate).count('1')


@dataclass(frozen=True)
class VectorProgram:
    program: object
    width: int
    strategy: Strategy
    chunks: Tuple[Chunk, ...]
    flat_statements: Tuple[tuple, ...]

    def with_chunks(self, chunks, strategy=None):
        return replace(self, chunks=tuple(chunks),
                       strategy=self.strategy if strategy is None else strategy)


def lanes_of(predicate, width):
    return [lane for lane in range(width) if predicate >> lane & 1]


def renumber(instrs):
    return tuple(replace(instr, seq=seq) for seq, instr in enumerate(instrs))


