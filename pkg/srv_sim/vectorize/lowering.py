"""
Scalar loop to vector program lowering.

Every statement becomes, in order, one vector memory or ALU instruction per
non-leaf node of its flattened form, covering all lanes of the chunk. A load
issued by a later iteration in scalar order therefore executes in the same
vector instruction as the first iteration's load, ahead of every store of
the statement.
"""

from srv_sim.errors import UnsupportedPattern
from srv_sim.isa.program import ArrayRead, BinOp, Induction, Select, \
    flatten_statement
from srv_sim.vectorize.fences import vfence_transform
from srv_sim.vectorize.vector_program import VECTOR_WIDTHS, Chunk, Opcode, \
    Strategy, VectorInstr, VectorProgram, renumber


def lower_statement(stmt_id, flat):
    """Vector instructions of one flattened statement (seq numbers unset)."""
    instrs = []
    for node in flat:
        expr = node.expr
        if node.role == 'store':
            opcode = Opcode.V_STORE_CONTIG \
                if isinstance(expr.dst_index, Induction) else Opcode.V_SCATTER
            instrs.append(VectorInstr(-1, opcode, stmt_id, node,
                                      expr.dst_index))
        elif isinstance(expr, ArrayRead):
            opcode = Opcode.V_LOAD_CONTIG \
                if isinstance(expr.index, Induction) else Opcode.V_GATHER
            instrs.append(VectorInstr(-1, opcode, stmt_id, node, expr.index))
        elif isinstance(expr, (BinOp, Select)):
            instrs.append(VectorInstr(-1, Opcode.V_ALU, stmt_id, node))
        elif node.children:
            raise UnsupportedPattern(
                'cannot lower {}'.format(type(expr).__name__))
    return instrs


def full_predicate(n_lanes):
    return (1 << n_lanes) - 1


def vectorize_loop(program, width, strategy=Strategy.SRV):
    """Lower a program's loop into chunks of width iterations.

    Arguments:
        program: GadgetProgram
        width: lanes per vector, one of 1, 2, 4, 8, 16, 32
        strategy: vector Strategy

    Returns:
        VectorProgram; region strategies bracket each chunk with SrvStart and
        SrvEnd, the tail chunk carries a partial predicate.

    Raises:
        UnsupportedPattern for scalar strategies or unsupported widths.
    """
    strategy = Strategy(strategy)
    if not strategy.is_vector:
        raise UnsupportedPattern(
            '{} is not a vector strategy'.format(strategy.value))
    if width not in VECTOR_WIDTHS:
        raise UnsupportedPattern('unsupported vector width {}'.format(width))
    flat_statements = tuple(
        tuple(flatten_statement(stmt)) for stmt in program.statements)
    body = []
    for stmt_id, flat in enumerate(flat_statements):
        body.extend(lower_statement(stmt_id, flat))
    if strategy.uses_regions:
        body = [VectorInstr(-1, Opcode.SRV_START)] + body + \
               [VectorInstr(-1, Opcode.SRV_END)]
    instrs = renumber(body)
    chunks = []
    for base in range(0, program.trip_count, width):
        predicate = full_predicate(min(width, program.trip_count - base))
        chunks.append(Chunk(base, width, predicate, instrs, (predicate,)))
    vp = VectorProgram(program, width, Strategy.SRV if
                       strategy is Strategy.VFENCED_SRV else strategy,
                       tuple(chunks), flat_statements)
    if strategy is Strategy.VFENCED_SRV:
        vp = vfence_transform(vp)
    return vp
