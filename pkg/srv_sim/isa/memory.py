"""
Byte-addressed, little-endian memory image of a laid-out program.
"""

import bisect

from srv_sim.errors import OutOfBounds
from srv_sim.isa.layout import layout_memory


class MemoryImage:
    """Contents of every array of a program, addressed through its layout.

    Arrays start zeroed, then the program's prologue is applied. Values are
    stored truncated to the element size. The image is mutable; pipelines
    copy it before running so callers keep their own snapshot.
    """

    def __init__(self, program, address_map=None, contents=None):
        self.program = program
        self.address_map = address_map if address_map is not None \
            else layout_memory(program)
        self._starts = sorted(
            (self.address_map.base(decl.name), decl.name)
            for decl in program.arrays)
        self._bases = [base for base, _ in self._starts]
        if contents is not None:
            self._by_name = contents
            return
        self._by_name = {decl.name: bytearray(decl.footprint)
                         for decl in program.arrays}
        for init in program.prologue:
            for index in range(init.start, init.stop):
                self.write_element(init.array, index, init.value)

    @classmethod
    def for_program(cls, program, page_size=4096, memory_size=1 << 30,
                    seed=0):
        return cls(program, layout_memory(
            program, page_size=page_size, memory_size=memory_size, seed=seed))

    def copy(self):
        return MemoryImage(self.program, self.address_map, {
            name: bytearray(data) for name, data in self._by_name.items()})

    def resolve_element(self, name, index):
        """Address and size of element index of array name.

        Indices inside a linked region resolve to the linked array.

        Raises:
            OutOfBounds if the index is outside the array and its linked
            region.
        """
        decl = self.program.array(name)
        if 0 <= index < decl.length:
            return self.address_map.base(name) + index * decl.elem_size, \
                decl.elem_size
        if decl.linked is not None:
            target = self.program.array(decl.linked)
            offset = index - decl.link_offset
            if 0 <= offset < target.length:
                return self.address_map.base(target.name) + \
                    offset * target.elem_size, target.elem_size
        raise OutOfBounds(name, index)

    def _locate(self, address):
        pos = bisect.bisect_right(self._bases, address) - 1
        if pos < 0:
            raise OutOfBounds('<unmapped>', address)
        base, name = self._starts[pos]
        offset = address - base
        if offset >= len(self._by_name[name]):
            raise OutOfBounds('<unmapped>', address)
        return self._by_name[name], offset

    def read_byte(self, address):
        data, offset = self._locate(address)
        return data[offset]

    def write_byte(self, address, value):
        data, offset = self._locate(address)
        data[offset] = value & 0xff

    def read(self, address, size):
        data, offset = self._locate(address)
        return int.from_bytes(data[offset:offset + size], 'little')

    def write(self, address, size, value):
        data, offset = self._locate(address)
        mask = (1 << (8 * size)) - 1
        data[offset:offset + size] = (value & mask).to_bytes(size, 'little')

    def read_element(self, name, index):
        return self.read(*self.resolve_element(name, index))

    def write_element(self, name, index, value):
        address, size = self.resolve_element(name, index)
        self.write(address, size, value)

    def array_values(self, name):
        """All element values of array name as a list of ints."""
        decl = self.program.array(name)
        data = self._by_name[name]
        size = decl.elem_size
        return [int.from_bytes(data[i * size:(i + 1) * size], 'little')
                for i in range(decl.length)]

    def __eq__(self, other):
        if not isinstance(other, MemoryImage):
            return NotImplemented
        return self._by_name == other._by_name

    def __repr__(self):
        return 'MemoryImage({})'.format(
            ', '.join(sorted(self._by_name)))
