"""
Scalar reference semantics: one loop iteration at a time, in program order.
"""

from collections import namedtuple

from srv_sim.isa.program import ArrayRead, BinOp, Induction, Literal, Param, \
    Select, apply_binop, flatten_statement, path_holds

Access = namedtuple('Access', 'kind array index address size value')
Access.__doc__ = """Architectural memory access of the scalar oracle."""

IterationResult = namedtuple('IterationResult', 'delta events')
IterationResult.__doc__ = """Outcome of one iteration.

delta: list of (address, size, value) stores, in program order
events: ordered list of Access records
"""


def leaf_value(expr, z, params):
    if isinstance(expr, Literal):
        return expr.value & ((1 << 64) - 1)
    if isinstance(expr, Induction):
        return z
    if isinstance(expr, Param):
        return params[expr.name] & ((1 << 64) - 1)
    raise TypeError('{} is not a leaf'.format(type(expr).__name__))


def compute_node(node, values, z, params, load, store):
    """Value of one flattened node given the values of its operands.

    Arguments:
        node: FlatNode
        values: dict of slot -> value for already evaluated nodes
        z: iteration index
        params: parameter values
        load: callable (array, index) -> value
        store: callable (array, index, value) -> None

    Returns:
        The node's value (the stored value for store nodes).
    """
    expr = node.expr
    if isinstance(expr, ArrayRead):
        return load(expr.array, values[node.children[0]])
    if isinstance(expr, BinOp):
        return apply_binop(expr.op, values[node.children[0]],
                           values[node.children[1]])
    if isinstance(expr, Select):
        cond, if_true, if_false = node.children
        return values[if_true] if values[cond] else values[if_false]
    if node.role == 'store':
        index_slot, rhs_slot = node.children
        store(expr.dst_array, values[index_slot], values[rhs_slot])
        return values[rhs_slot]
    return leaf_value(expr, z, params)


def eval_scalar_iter(program, z, memory, params=None):
    """Execute every statement of iteration z without mutating memory.

    Stores made earlier in the iteration are visible to later loads of the
    same iteration through an overlay.

    Arguments:
        program: GadgetProgram
        z: iteration index, 0 <= z < trip_count
        memory: MemoryImage holding the state before the iteration
        params: optional parameter overrides

    Returns:
        IterationResult with the store delta and the ordered access events.

    Raises:
        OutOfBounds if an index falls outside its array and linked region.
    """
    if not 0 <= z < program.trip_count:
        raise ValueError('iteration {0} outside loop of {1}'.format(
            z, program.trip_count))
    values_of_params = program.param_values
    if params:
        values_of_params.update(params)
    overlay = {}
    delta, events = [], []

    def read(address, size):
        value = 0
        for b in range(size):
            byte = overlay.get(address + b)
            if byte is None:
                byte = memory.read_byte(address + b)
            value |= byte << (8 * b)
        return value

    def load(array, index):
        address, size = memory.resolve_element(array, index)
        value = read(address, size)
        events.append(Access('load', array, index, address, size, value))
        return value

    def store(array, index, value):
        address, size = memory.resolve_element(array, index)
        value &= (1 << (8 * size)) - 1
        for b in range(size):
            overlay[address + b] = (value >> (8 * b)) & 0xff
        delta.append((address, size, value))
        events.append(Access('store', array, index, address, size, value))

    for stmt in program.statements:
        values = {}
        for node in flatten_statement(stmt):
            if not path_holds(node.path, values):
                continue
            values[node.slot] = compute_node(
                node, values, z, values_of_params, load, store)
    return IterationResult(delta, events)


def apply_delta(memory, delta):
    for address, size, value in delta:
        memory.write(address, size, value)


def run_reference(program, memory, params=None):
    """Run the whole loop on a copy of memory; returns the final image."""
    memory = memory.copy()
    for z in range(program.trip_count):
        apply_delta(memory, eval_scalar_iter(program, z, memory, params).delta)
    return memory
