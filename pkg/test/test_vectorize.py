import pytest

from srv_sim.errors import UnsupportedPattern
from srv_sim.isa.gadget_parser import parse_gadget
from srv_sim.isa.interpreter import run_reference
from srv_sim.isa.program import flatten_statement
from srv_sim.pipeline.config import CoreConfig
from srv_sim.pipeline.runners import run_srv
from srv_sim.vectorize.fences import AROUND_REGION, BETWEEN_STATEMENTS, \
    insert_fences, vfence_transform
from srv_sim.vectorize.flexvec import cross_lane_dependences, \
    flexvec_partition
from srv_sim.vectorize.lowering import vectorize_loop
from srv_sim.vectorize.vector_program import Opcode, Strategy
from test.setup_and_params import SCATTER_UPDATE_GROUPS, SCATTER_UPDATE_TEXT, \
    TWO_STATEMENT_TEXT, scatter_update_memory, scatter_update_program, setup

dump_path = setup()


def opcodes(chunk):
    return [instr.opcode for instr in chunk.instrs]


def test_lowering_promotes_later_loads():
    program = parse_gadget(
        'array x 4 4\narray y 4 4\nloop 3:\n  y[x[z]] = y[x[z]] + 1\n')
    vp = vectorize_loop(program, 4)
    assert len(vp.chunks) == 1
    chunk = vp.chunks[0]
    assert opcodes(chunk) == [
        Opcode.SRV_START, Opcode.V_LOAD_CONTIG, Opcode.V_GATHER, Opcode.V_ALU,
        Opcode.V_LOAD_CONTIG, Opcode.V_SCATTER, Opcode.SRV_END]
    # The third iteration's gather runs in the same instruction as the first
    assert chunk.active_lanes == [0, 1, 2]
    assert [instr.seq for instr in chunk.instrs] == list(range(7))


def test_lowering_exact_fit_and_tail():
    program = scatter_update_program()
    vp = vectorize_loop(program, 16)
    assert len(vp.chunks) == 1
    assert vp.chunks[0].predicate == 0xffff
    vp = vectorize_loop(program.with_trip_count(17), 16)
    assert [c.base for c in vp.chunks] == [0, 16]
    assert vp.chunks[1].active_lanes == [0]


def test_lowering_predicates_cover_trip_count():
    program = scatter_update_program()
    for trip_count in range(1, 17):
        short = program.with_trip_count(trip_count)
        for width in (1, 2, 4, 8, 16):
            vp = vectorize_loop(short, width)
            assert all(c.width == width for c in vp.chunks)
            assert sum(c.n_active for c in vp.chunks) == trip_count
            assert [c.base + lane for c in vp.chunks
                    for lane in c.active_lanes] == list(range(trip_count))


def test_lowering_contiguous_store():
    program = parse_gadget(TWO_STATEMENT_TEXT)
    vp = vectorize_loop(program, 8, Strategy.FLEXVEC)
    # No region markers outside the region strategies
    assert opcodes(vp.chunks[0]) == [
        Opcode.V_LOAD_CONTIG, Opcode.V_ALU, Opcode.V_STORE_CONTIG,
        Opcode.V_LOAD_CONTIG, Opcode.V_ALU, Opcode.V_STORE_CONTIG]


def test_lowering_rejects_scalar_and_bad_width():
    program = scatter_update_program()
    with pytest.raises(UnsupportedPattern):
        vectorize_loop(program, 16, Strategy.SCALAR_OOO)
    with pytest.raises(UnsupportedPattern):
        vectorize_loop(program, 3)


def test_flexvec_partition_scatter_update():
    deps = {(0, 3), (4, 7), (8, 11), (12, 15)}
    assert flexvec_partition(deps, 16) == SCATTER_UPDATE_GROUPS


def test_flexvec_partition_no_deps():
    assert flexvec_partition(set(), 16) == [list(range(16))]


def test_flexvec_partition_chain():
    deps = {(j - 1, j) for j in range(1, 16)}
    assert flexvec_partition(deps, 16) == [[lane] for lane in range(16)]


def test_flexvec_partition_ignores_younger_writers():
    assert flexvec_partition({(5, 1)}, 8) == [list(range(8))]
    with pytest.raises(ValueError):
        flexvec_partition({(0, 9)}, 8)


def test_cross_lane_dependences_scatter_update():
    program = scatter_update_program()
    flat = tuple(tuple(flatten_statement(s)) for s in program.statements)
    deps = cross_lane_dependences(program, flat, 0, list(range(16)),
                                  scatter_update_memory())
    assert deps == {(0, 3), (4, 7), (8, 11), (12, 15)}


def test_cross_lane_dependences_chain():
    program = scatter_update_program()
    flat = tuple(tuple(flatten_statement(s)) for s in program.statements)
    memory = scatter_update_memory(indices=[i + 1 for i in range(15)] + [15])
    deps = cross_lane_dependences(program, flat, 0, list(range(16)), memory)
    # Brute force: lane j reads a[j], lane i writes a[i + 1]
    expected = {(i, j) for i in range(16) for j in range(16)
                if i < j and min(i + 1, 15) == j}
    assert deps == expected
    assert flexvec_partition(deps, 16) == [[lane] for lane in range(16)]


def test_vfence_transform_serialises_lanes():
    vp = vfence_transform(vectorize_loop(scatter_update_program(), 16))
    assert vp.strategy is Strategy.VFENCED_SRV
    chunk = vp.chunks[0]
    assert chunk.schedule == tuple(1 << lane for lane in range(16))
    assert opcodes(chunk)[:2] == [Opcode.SRV_START, Opcode.VFENCE]


def test_vfence_width_one():
    program = scatter_update_program()
    vp = vfence_transform(vectorize_loop(program, 1))
    assert len(vp.chunks) == 16
    assert all(c.schedule == (1,) for c in vp.chunks)


def test_vfence_rejects_non_srv():
    with pytest.raises(UnsupportedPattern):
        vfence_transform(vectorize_loop(scatter_update_program(), 16,
                                        Strategy.FLEXVEC))


def test_vfenced_scatter_update_matches_oracle():
    program = scatter_update_program()
    memory = scatter_update_memory()
    result = run_srv(program, memory, CoreConfig(strategy='vfenced_srv'))
    assert result.replay_counts == [0]
    assert result.final_memory == run_reference(program, memory)


def test_fences_between_statements():
    vp = insert_fences(vectorize_loop(parse_gadget(TWO_STATEMENT_TEXT), 16),
                       BETWEEN_STATEMENTS)
    ops = opcodes(vp.chunks[0])
    assert ops.count(Opcode.FENCE) == 1
    fence = ops.index(Opcode.FENCE)
    stmt_ids = [i.stmt_id for i in vp.chunks[0].instrs]
    assert stmt_ids[fence - 1] == 0 and stmt_ids[fence + 1] == 1


def test_fences_around_region():
    vp = insert_fences(vectorize_loop(parse_gadget(SCATTER_UPDATE_TEXT), 16),
                       AROUND_REGION)
    ops = opcodes(vp.chunks[0])
    assert ops[:2] == [Opcode.FENCE, Opcode.SRV_START]
    assert ops[-2:] == [Opcode.SRV_END, Opcode.FENCE]
    assert vp.strategy is Strategy.SRV
    with pytest.raises(ValueError):
        insert_fences(vp, 'everywhere')
