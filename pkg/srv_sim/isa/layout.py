"""
Placement of a program's arrays in simulated memory.
"""

import bisect
from dataclasses import dataclass
from typing import Dict, Tuple

from srv_sim.errors import CapacityError, ValidationError
from srv_sim.utils import rng_from_seed

DEFAULT_MEMORY_SIZE = 1 << 30
# Leaves address 0 and the first page unmapped.
LAYOUT_ORIGIN_PAGES = 1
MAX_EXTRA_GAP_PAGES = 4


@dataclass(frozen=True)
class AddressMap:
    """Base address of every array plus the inverse lookup."""
    bases: Dict[str, int]
    sizes: Dict[str, Tuple[int, int]]
    page_size: int
    end: int

    def base(self, name):
        return self.bases[name]

    def range_of(self, name):
        elem_size, length = self.sizes[name]
        base = self.bases[name]
        return base, base + elem_size * length

    def resolve(self, address):
        """Array name and element index containing address, or None."""
        names = sorted(self.bases, key=self.bases.get)
        starts = [self.bases[n] for n in names]
        pos = bisect.bisect_right(starts, address) - 1
        if pos < 0:
            return None
        name = names[pos]
        elem_size, length = self.sizes[name]
        offset = address - self.bases[name]
        if offset >= elem_size * length:
            return None
        return name, offset // elem_size


def layout_memory(program, page_size=4096, memory_size=DEFAULT_MEMORY_SIZE,
                  seed=0):
    """Assign every array a page-aligned base address.

    Arrays are placed in declaration order, each starting on a fresh page and
    separated from its predecessor by at least one unused page; the seed draws
    a few extra gap pages so different seeds give different addresses.

    Arguments:
        program: GadgetProgram
        page_size: power of two, at least 4096
        memory_size: bytes of simulated memory
        seed: layout seed

    Returns:
        AddressMap

    Raises:
        ValidationError if page_size is not a power of two >= 4096.
        CapacityError if the arrays do not fit in memory_size bytes.
    """
    if page_size < 4096 or page_size & (page_size - 1):
        raise ValidationError(
            'page_size must be a power of two >= 4096, got {}'.format(
                page_size))
    rng = rng_from_seed(seed)
    cursor = LAYOUT_ORIGIN_PAGES * page_size
    bases, sizes = {}, {}
    for decl in program.arrays:
        gap_pages = 1 + int(rng.integers(0, MAX_EXTRA_GAP_PAGES))
        cursor += gap_pages * page_size
        bases[decl.name] = cursor
        sizes[decl.name] = (decl.elem_size, decl.length)
        pages = -(-decl.footprint // page_size)
        cursor += pages * page_size
        if cursor > memory_size:
            raise CapacityError(
                'arrays need {0} bytes but simulated memory holds {1}'.format(
                    cursor, memory_size))
    return AddressMap(bases, sizes, page_size, cursor)
