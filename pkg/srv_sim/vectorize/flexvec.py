"""
FlexVec-style partial vectorization: split a chunk into lane groups so that
no lane reads a value written by an older lane of its own group.
"""

from srv_sim.errors import OutOfBounds
from srv_sim.isa.interpreter import compute_node
from srv_sim.isa.program import path_holds


def flexvec_partition(cross_lane_deps, width):
    """Split lanes [0, width) into consecutive, order preserving groups.

    A new group starts at every reader lane whose writer lies in the current
    group; readers of writers in earlier groups are safe, and dependences on
    younger writers are ignored.

    Arguments:
        cross_lane_deps: set of (writer lane, reader lane) pairs
        width: lanes per chunk

    Returns:
        List of lists of lane ids.
    """
    writers_of = {}
    for writer, reader in cross_lane_deps:
        if not (0 <= writer < width and 0 <= reader < width):
            raise ValueError('lane outside width {}'.format(width))
        if writer < reader:
            writers_of.setdefault(reader, []).append(writer)
    groups = [[]]
    group_start = 0
    for lane in range(width):
        if any(w >= group_start for w in writers_of.get(lane, ())):
            groups.append([])
            group_start = lane
        groups[-1].append(lane)
    return groups


def cross_lane_dependences(program, flat_statements, base, lanes, memory):
    """Read-after-write pairs between lanes, from concrete index values.

    Every lane is evaluated against memory as it stands before the chunk
    executes, as the runtime check instructions would; bytes a lane reads
    from memory (not from its own earlier stores) are compared with the
    store bytes of every older lane.

    Arguments:
        program: GadgetProgram
        flat_statements: flattened statements of the loop body
        base: iteration of lane 0
        lanes: lanes to check
        memory: MemoryImage before the chunk

    Returns:
        Set of (writer lane, reader lane) pairs.
    """
    params = program.param_values
    reads, writes = {}, {}
    for lane in lanes:
        lane_reads, own = set(), {}
        z = base + lane

        def load(array, index):
            try:
                address, size = memory.resolve_element(array, index)
            except OutOfBounds:
                return 0
            value = 0
            for b in range(size):
                byte = own.get(address + b)
                if byte is None:
                    lane_reads.add(address + b)
                    byte = memory.read_byte(address + b)
                value |= byte << (8 * b)
            return value

        def store(array, index, value):
            try:
                address, size = memory.resolve_element(array, index)
            except OutOfBounds:
                return
            for b in range(size):
                own[address + b] = (value >> (8 * b)) & 0xff

        for flat in flat_statements:
            values = {}
            for node in flat:
                if path_holds(node.path, values):
                    values[node.slot] = compute_node(
                        node, values, z, params, load, store)
        reads[lane], writes[lane] = lane_reads, set(own)
    deps = set()
    for reader in lanes:
        for writer in lanes:
            if writer < reader and writes[writer] & reads[reader]:
                deps.add((writer, reader))
    return deps
