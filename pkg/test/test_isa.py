import pytest

from srv_sim.errors import CapacityError, GadgetSyntaxError, OutOfBounds, \
    ValidationError
from srv_sim.isa.gadget_parser import load_gadget, parse_gadget, pretty_print
from srv_sim.isa.interpreter import eval_scalar_iter, run_reference
from srv_sim.isa.layout import layout_memory
from srv_sim.isa.memory import MemoryImage
from srv_sim.isa.program import ArrayRead, BinOp, Induction, Select
from test.setup_and_params import GADGET_DIR, IDENTITY_TEXT, \
    SCATTER_UPDATE_INDICES, SCATTER_UPDATE_TEXT, brute_force_scatter_update, \
    random_index_vectors, scatter_update_memory, scatter_update_program, \
    setup

dump_path = setup()


def test_parse_scatter_update():
    program = parse_gadget(SCATTER_UPDATE_TEXT)
    assert program.trip_count == 16
    assert len(program.statements) == 1
    stmt = program.statements[0]
    assert stmt.dst_array == 'a'
    assert stmt.dst_index == ArrayRead('x', Induction())
    assert isinstance(stmt.rhs, BinOp) and stmt.rhs.op == '+'


def test_parse_empty_loop():
    with pytest.raises(ValidationError, match='loop has no statements'):
        parse_gadget('array a 4 16\nfor z in 0..16 { }\n')


def test_parse_error_has_position():
    with pytest.raises(GadgetSyntaxError) as exc_info:
        parse_gadget('array a 4 16\nloop 16:\n  a[z] = a[z] +\n')
    assert exc_info.value.line == 3
    # Callers may also catch the builtin
    with pytest.raises(SyntaxError):
        parse_gadget('array a 4 16\nloop 16:\n  a[z = 1\n')


def test_parse_rejects_invalid_programs():
    with pytest.raises(ValidationError):
        parse_gadget('array a 3 16\nloop 1:\n  a[z] = 1\n')
    with pytest.raises(ValidationError):
        parse_gadget('array s 1 4 readonly\nloop 1:\n  s[z] = 1\n')
    with pytest.raises(ValidationError):
        parse_gadget('array a 4 16\nloop 1:\n  a[z] = b[z]\n')
    with pytest.raises(ValidationError):
        parse_gadget('array a 4 16 linked a 16\nloop 1:\n  a[z] = 1\n')
    with pytest.raises(ValidationError):
        parse_gadget('array a 4 16\narray b 4 16\narray c 4 16\nloop 1:\n'
                     '  a[b[c[a[z]]]] = 1\n')


def test_leak_literal():
    program = load_gadget(GADGET_DIR / 'leak_literal.gadget')
    assert len(program.statements) == 1
    assert len(program.epilogue) == 256
    assert program.param_values == {'try': 63}
    assert program.epilogue[1].index == 256


def test_pretty_print_round_trip():
    for name in ('srv_leak', 'spectre_stl', 'spectre_v1', 'evict_time',
                 'replay_amplification', 'scatter_update', 'leak_literal'):
        program = load_gadget(GADGET_DIR / '{}.gadget'.format(name))
        assert parse_gadget(pretty_print(program)) == program


def test_pretty_print_keeps_precedence():
    program = parse_gadget(
        'param p = 1\narray a 8 16\nloop 4:\n'
        '  a[z] = ((a[z] + 1) * 2) ^ (p == 1 ? z : 3)\n')
    assert parse_gadget(pretty_print(program)) == program
    rhs = program.statements[0].rhs
    assert rhs.op == '^'
    assert isinstance(rhs.rhs, Select)


def test_layout_is_disjoint_and_page_separated():
    program = parse_gadget(
        'array p 1 256\narray q 1 256\nloop 1:\n  p[z] = q[z]\n')
    address_map = layout_memory(program, page_size=4096)
    p_start, p_end = address_map.range_of('p')
    q_start, q_end = address_map.range_of('q')
    assert p_start % 4096 == 0 and q_start % 4096 == 0
    assert q_start - p_end >= 4096
    assert address_map.resolve(q_start + 3) == ('q', 3)
    assert address_map.resolve(p_end + 1) is None


def test_layout_seed_determinism():
    program = scatter_update_program()
    assert layout_memory(program, seed=4) == layout_memory(program, seed=4)


def test_encode_array_lines():
    program = load_gadget(GADGET_DIR / 'srv_leak.gadget')
    memory = MemoryImage.for_program(program)
    lines = {memory.resolve_element('encode_array', i * 64)[0] // 64
             for i in range(256)}
    assert len(lines) == 256


def test_layout_capacity():
    program = parse_gadget('array big 8 1024\nloop 1:\n  big[z] = 1\n')
    with pytest.raises(CapacityError):
        layout_memory(program, memory_size=4096)
    with pytest.raises(ValidationError):
        layout_memory(program, page_size=1000)


def test_memory_little_endian_and_truncation():
    program = parse_gadget('array a 4 4\narray b 1 4\nloop 1:\n  a[z] = 1\n')
    memory = MemoryImage.for_program(program)
    memory.write_element('a', 1, 0x1122334455)
    assert memory.read_element('a', 1) == 0x22334455
    address, _ = memory.resolve_element('a', 1)
    assert memory.read_byte(address) == 0x55
    assert memory.read_byte(address + 3) == 0x22


def test_memory_byte_lookup_edges():
    program = parse_gadget(
        'array a 4 4\narray b 1 4\narray c 8 2\nloop 1:\n  a[z] = 1\n')
    memory = MemoryImage.for_program(program)
    for value, name in enumerate('abc', 1):
        start, end = memory.address_map.range_of(name)
        memory.write_byte(start, value)
        memory.write_byte(end - 1, value)
        assert memory.read_byte(start) == value
        assert memory.read_byte(end - 1) == value
        # Arrays are page separated, so the byte after each one is unmapped
        with pytest.raises(OutOfBounds):
            memory.read_byte(end)
    lowest = min(memory.address_map.range_of(n)[0] for n in 'abc')
    with pytest.raises(OutOfBounds):
        memory.read_byte(lowest - 1)


def test_linked_region_resolution():
    program = load_gadget(GADGET_DIR / 'srv_leak.gadget')
    memory = MemoryImage.for_program(program)
    memory.write_element('secret', 5, 0x61)
    assert memory.resolve_element('secret_val', 4096 + 5) == \
        memory.resolve_element('secret', 5)
    assert memory.read_element('secret_val', 4096 + 5) == 0x61
    assert memory.read_element('secret_val', 7) == 256
    with pytest.raises(OutOfBounds):
        memory.resolve_element('secret_val', 300)
    with pytest.raises(OutOfBounds):
        memory.resolve_element('secret_val', 4096 + 64)


def test_eval_scalar_iter_scatter_update():
    program = scatter_update_program()
    memory = scatter_update_memory(values=[0] * 16)
    result = eval_scalar_iter(program, 0, memory)
    address, size = memory.resolve_element('a', 3)
    assert result.delta == [(address, 4, 2)]
    assert [e.kind for e in result.events] == ['load', 'load', 'store']
    # Memory is left untouched
    assert memory.read_element('a', 3) == 0


def test_eval_scalar_iter_identity():
    program = parse_gadget(IDENTITY_TEXT)
    memory = MemoryImage.for_program(program)
    memory.write_element('a', 4, 99)
    result = eval_scalar_iter(program, 4, memory)
    load, store = result.events
    assert load.value == store.value == 99
    assert run_reference(program, memory) == memory


def test_eval_scalar_iter_range():
    program = scatter_update_program()
    with pytest.raises(ValueError):
        eval_scalar_iter(program, 16, scatter_update_memory())


def test_eval_scalar_iter_out_of_bounds():
    program = scatter_update_program()
    memory = scatter_update_memory()
    memory.write_element('x', 2, 40)
    with pytest.raises(OutOfBounds):
        eval_scalar_iter(program, 2, memory)


def test_run_reference_matches_brute_force():
    program = scatter_update_program()
    values = [7 * i + 1 for i in range(16)]
    memory = scatter_update_memory(values=values)
    final = run_reference(program, memory)
    assert final.array_values('a') == brute_force_scatter_update(
        SCATTER_UPDATE_INDICES, values)
    for indices in random_index_vectors(20):
        memory = scatter_update_memory(indices, values)
        final = run_reference(program, memory)
        assert final.array_values('a') == brute_force_scatter_update(
            indices, values)


def test_wrapping_arithmetic():
    program = parse_gadget(
        'array a 8 2\nloop 1:\n  a[1] = a[0] + 1\n')
    memory = MemoryImage.for_program(program)
    memory.write_element('a', 0, (1 << 64) - 1)
    assert run_reference(program, memory).read_element('a', 1) == 0


def test_params_override():
    program = load_gadget(GADGET_DIR / 'evict_time.gadget')
    assert program.param_values == {'secret': 1}
    assert program.with_params(secret=0).param_values == {'secret': 0}
    with pytest.raises(ValidationError):
        program.with_params(missing=1)
