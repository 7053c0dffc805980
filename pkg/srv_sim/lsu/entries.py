"""
Load/store queue records and their byte masks.
"""

from dataclasses import dataclass, field
from typing import Optional

from srv_sim.utils import hex_mask

LOAD = 'load'
STORE = 'store'


@dataclass(frozen=True)
class ByteMask:
    """One bit per byte of a line-aligned window."""
    window: int
    bits: int = 0
    width: int = 64

    @classmethod
    def for_access(cls, address, size, line=64):
        window = address - address % line
        offset = address - window
        if offset + size > line:
            raise ValueError('access at {0:#x} of {1} bytes straddles a '
                             'line'.format(address, size))
        return cls(window, ((1 << size) - 1) << offset, line)

    @classmethod
    def empty(cls, window=0, width=64):
        return cls(window, 0, width)

    def _check(self, other):
        if other.window != self.window or other.width != self.width:
            raise ValueError('masks over different windows')

    def __and__(self, other):
        if other.window != self.window:
            return ByteMask(self.window, 0, self.width)
        return ByteMask(self.window, self.bits & other.bits, self.width)

    def __or__(self, other):
        self._check(other)
        return ByteMask(self.window, self.bits | other.bits, self.width)

    def __bool__(self):
        return self.bits != 0

    def issubset(self, other):
        return self.bits & ~other.bits == 0

    def byte_addresses(self):
        return [self.window + b for b in range(self.width)
                if self.bits >> b & 1]

    def hex(self):
        return hex_mask(self.bits, self.width)


@dataclass
class LsqEntry:
    """One lane's access of one vector memory instruction."""
    instr_seq: int
    lane: int
    kind: str
    addr: int
    size: int
    value: int = 0
    pass_index: int = 0
    stmt_id: int = 0
    line: int = 64
    vob: Optional[ByteMask] = field(default=None)
    hob: Optional[ByteMask] = field(default=None)

    def __post_init__(self):
        if self.size not in (1, 4, 8):
            raise ValueError('access size must be 1, 4 or 8')
        if self.kind not in (LOAD, STORE):
            raise ValueError('kind must be load or store')
        self.mask = ByteMask.for_access(self.addr, self.size, self.line)
        if self.vob is None:
            self.vob = ByteMask.empty(self.mask.window, self.line)
        if self.hob is None:
            self.hob = ByteMask.empty(self.mask.window, self.line)

    @property
    def window(self):
        return self.mask.window

    def to_record(self):
        return {
            'instr_seq': self.instr_seq,
            'lane': self.lane,
            'kind': self.kind,
            'address': hex(self.addr),
            'size': self.size,
            'pass': self.pass_index,
            'vob': self.vob.hex(),
            'hob': self.hob.hex(),
        }
