"""
Fence insertion and the lane-serialising Vfence transform.
"""

from srv_sim.errors import UnsupportedPattern
from srv_sim.vectorize.vector_program import Opcode, Strategy, VectorInstr, \
    renumber

BETWEEN_STATEMENTS = 'between_statements'
AROUND_REGION = 'around_region'
FENCE_PLACEMENTS = (BETWEEN_STATEMENTS, AROUND_REGION)


def _fenced_instrs(instrs, placement):
    fence = VectorInstr(-1, Opcode.FENCE)
    result = []
    if placement == AROUND_REGION:
        has_region = any(i.opcode is Opcode.SRV_START for i in instrs)
        if not has_region:
            return [fence] + list(instrs) + [fence]
        for instr in instrs:
            if instr.opcode is Opcode.SRV_START:
                result.append(fence)
            result.append(instr)
            if instr.opcode is Opcode.SRV_END:
                result.append(fence)
        return result
    previous_stmt = None
    for instr in instrs:
        if instr.stmt_id is not None:
            if previous_stmt is not None and instr.stmt_id != previous_stmt:
                result.append(fence)
            previous_stmt = instr.stmt_id
        result.append(instr)
    return result


def insert_fences(vp, placement):
    """Insert Fence instructions without changing the vector lowering.

    Arguments:
        vp: VectorProgram
        placement: 'between_statements' or 'around_region'

    Returns:
        New VectorProgram with the same strategy.
    """
    if placement not in FENCE_PLACEMENTS:
        raise ValueError('placement must be one of {}'.format(
            ', '.join(FENCE_PLACEMENTS)))
    chunks = []
    for chunk in vp.chunks:
        instrs = renumber(_fenced_instrs(chunk.instrs, placement))
        chunks.append(chunk.__class__(chunk.base, chunk.width, chunk.predicate,
                                      instrs, chunk.schedule))
    return vp.with_chunks(chunks)


def vfence_transform(vp):
    """Serialise lanes: each chunk runs one single-lane region per lane.

    Arguments:
        vp: VectorProgram with strategy SRV

    Returns:
        VectorProgram with strategy VFENCED_SRV whose chunk schedules hold
        one predicate per active lane, in lane order.

    Raises:
        UnsupportedPattern if vp is not an SRV program.
    """
    if vp.strategy is not Strategy.SRV:
        raise UnsupportedPattern('Vfence applies to SRV programs only')
    chunks = []
    for chunk in vp.chunks:
        instrs = []
        for instr in chunk.instrs:
            instrs.append(instr)
            if instr.opcode is Opcode.SRV_START:
                instrs.append(VectorInstr(-1, Opcode.VFENCE))
        schedule = tuple(1 << lane for lane in chunk.active_lanes)
        chunks.append(chunk.__class__(chunk.base, chunk.width, chunk.predicate,
                                      renumber(instrs), schedule))
    return vp.with_chunks(chunks, Strategy.VFENCED_SRV)
